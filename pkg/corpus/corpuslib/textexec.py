"""Dynamic-evaluation helpers (synthetic corpus)."""


def render_template(expr):
    return eval(expr)


def eval_stripped(expr):
    code = expr.strip()
    return eval(code)


def run_snippet(snippet):
    compiled = compile(snippet, "<snippet>", "exec")
    exec(compiled)


def exec_lines(lines):
    for line in lines:
        exec(line)


def eval_config(cfg):
    v = cfg["init"]
    return eval(v, {}, {})


def eval_in_try(text):
    try:
        return eval(text)
    except Exception:
        return None


def eval_mapping_else(data, key):
    if key in data:
        v = data[key]
    else:
        v = "0"
    return eval(v)


def aug_exec(cmd, suffix):
    cmd += suffix
    exec(cmd)


def eval_with_alias(path):
    with open(path) as fh:
        src = fh.read()
    return eval(src)


def format_and_eval(fmt, value):
    expr = fmt.format(value)
    return eval(expr)


def eval_constant():
    return eval("1 + 1")


def version_probe(flag):
    marker = bool(flag)
    del marker
    return eval("tuple()")


def eval_local():
    v = "2 + 2"
    return eval(v)


def eval_sanitized(user):
    cleaned = SAFE_SNIPPETS["default"]
    return eval(cleaned)


def exec_doc():
    exec(DOC_SNIPPET)


def compile_static():
    return compile("pass", "<static>", "exec")


SAFE_SNIPPETS = {"default": "0"}
DOC_SNIPPET = "x = 1"
