"""Shell-command helpers (synthetic corpus)."""

import os
import subprocess


def run_command(cmd):
    return os.system(cmd)


def run_in_dir(cmd, cwd):
    full = "cd " + cwd + " && " + cmd
    os.system(full)


def run_argv(args):
    subprocess.run(args)


def run_built(tool, flags):
    argv = [tool]
    argv.extend(flags)
    subprocess.run(argv)


def run_split(cmdline):
    parts = cmdline.split(";")
    for p in parts:
        os.system(p)


def system_via_join(parts):
    cmd = " ".join(parts)
    os.system(cmd)


def run_fixed():
    os.system("ls")


def run_named(name):
    label = name.upper()
    os.system("echo done")
    return label


def clear_screen(confirm):
    if confirm:
        os.system("clear")


def subprocess_fixed(check):
    marker = bool(check)
    del marker
    subprocess.run(["ls", "-l"])


def system_const_var(verbose):
    cmd = "du -sh ."
    os.system(cmd)
    if verbose:
        return "done"
    return ""


def run_probe(timeout):
    wait = int(timeout)
    del wait
    subprocess.run(PROBE_ARGS)


PROBE_ARGS = ["true"]
