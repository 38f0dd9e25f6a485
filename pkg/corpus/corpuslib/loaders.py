"""Loader-style helpers mixing primitives (synthetic corpus)."""


def load_and_eval(path):
    data = open(path).read()
    return eval(data)


def locate(name):
    parts = name.split(".")
    mod = __import__(parts[0])
    obj = mod
    for p in parts[1:]:
        obj = getattr(obj, p)
    return obj


def eval_kv(pairs):
    out = {}
    for kv in pairs:
        k, v = kv.split("=")
        out[k] = eval(v)
    return out


def compile_sources(sources):
    results = []
    for src in sources:
        results.append(compile(src, "<dyn>", "eval"))
    return results


class CommandBuffer:
    def __init__(self):
        self.pending = ""

    def queue(self, cmd):
        self.pending = cmd

    def flush(self):
        import os
        return os.system(self.pending)


class Evaluator:
    def __init__(self, expression):
        self.expression = expression

    def run_stored(self):
        return eval(self.expression)


class FieldRunner:
    def __init__(self):
        self.script = ""
        self.globals_map = {}

    def execute(self):
        exec(self.script, self.globals_map)
