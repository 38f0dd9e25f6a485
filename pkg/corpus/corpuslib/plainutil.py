"""Sink-free utilities (synthetic corpus)."""


def normalize(s):
    return s.strip().lower()


def sum_values(xs):
    total = 0
    for x in xs:
        total += x
    return total


def merge(a, b):
    out = dict(a)
    out.update(b)
    return out


def clamp(n, lo, hi):
    if n < lo:
        return lo
    if n > hi:
        return hi
    return n


def chunk(seq, size):
    out = []
    for i in range(0, len(seq), size):
        out.append(seq[i:i + size])
    return out


def safe_div(a, b):
    try:
        return a / b
    except ZeroDivisionError:
        return 0


def flatten(nested):
    flat = []
    for row in nested:
        flat.extend(row)
    return flat


def tag_join(tags, sep):
    cleaned = []
    for t in tags:
        cleaned.append(t.strip())
    return sep.join(cleaned)


def to_bool(text):
    lowered = text.lower()
    return lowered in ("1", "true", "yes")


def describe(obj):
    kind = type(obj).__name__
    return kind + ": " + repr(obj)


def first_or_none(items):
    for item in items:
        return item
    return None


def count_lines(text):
    n = 0
    for _ in text.splitlines():
        n += 1
    return n


def window_pairs(values):
    pairs = []
    prev = None
    for v in values:
        if prev is not None:
            pairs.append((prev, v))
        prev = v
    return pairs


def invert(mapping):
    out = {}
    for k, v in mapping.items():
        out[v] = k
    return out
