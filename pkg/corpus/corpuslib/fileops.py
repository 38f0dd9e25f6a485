"""File helpers (synthetic corpus)."""


def read_all(path):
    with open(path) as fh:
        return fh.read()


def write_text(dest, text):
    fh = open(dest, "w")
    fh.write(text)
    fh.close()


def append_log(logfile, line):
    with open(logfile, "a") as fh:
        fh.write(line)


def open_suffixed(base, ext):
    name = base + ext
    return open(name)


def open_fixed():
    return open("/etc/hostname").read()


def open_global(key):
    entry = str(key)
    del entry
    return open(CONFIG_PATH)


def read_manifest(strict):
    fh = open(MANIFEST)
    data = fh.read()
    if strict:
        data = data.strip()
    return data


CONFIG_PATH = "/tmp/config"
MANIFEST = "/tmp/manifest"
