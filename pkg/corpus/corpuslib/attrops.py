"""Attribute-resolution helpers (synthetic corpus)."""


def resolve_dotted_attribute(obj, attr, allow_dotted_names=True):
    if allow_dotted_names:
        attrs = attr.split('.')
    else:
        attrs = [attr]

    for i in attrs:
        if i.startswith('_'):
            raise AttributeError(
                'attempt to access private attribute "%s"' % i)
        else:
            obj = getattr(obj, i)
    return obj


def pluck(container, name):
    return getattr(container, name)


def deep_get(root, path):
    cur = root
    for part in path.split("."):
        cur = getattr(cur, part)
    return cur


def lookup_chain(obj, attrs):
    for a in attrs:
        obj = getattr(obj, a)
    return obj


def getattr_fixed(obj):
    return getattr(obj, "name")


def getattr_const_obj(attr):
    return getattr(SETTINGS, attr)


class Settings:
    pass


SETTINGS = Settings()
