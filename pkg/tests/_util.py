import os
import sys
from contextlib import contextmanager

import numpy as np
from pytest_relaxed import trap

from lightcone.frames import observer
from lightcone.main import program as default_program
from lightcone.program import LightconeProgram
from lightcone.spacetime import builtin

support = os.path.join(os.path.dirname(__file__), "_support")


def support_file(subpath):
    with open(os.path.join(support, subpath)) as fd:
        return fd.read()


def support_path(subpath):
    return os.path.join(support, subpath)


def minkowski(dim=4):
    return builtin("minkowski", dim=dim)


def observer_at(spec, point=None, T=None):
    """
    Observer at ``point`` (default: the origin), foliation normal unless
    ``T`` is given.
    """
    if point is None:
        point = np.zeros(spec.dim)
    return observer(spec, point, T)


def assert_close(actual, expected, rel=1e-9, abs=1e-12):
    actual = np.asarray(actual, dtype=float)
    expected = np.asarray(expected, dtype=float)
    bound = abs + rel * np.abs(expected)
    worst = float(np.max(np.abs(actual - expected) - bound))
    assert worst <= 0, "{} != {} (excess {:.3g})".format(
        actual, expected, worst
    )


@trap
def run(invocation, program=None, binary=True):
    """
    Run ``invocation`` via ``program``, returning output stream captures.

    ``program`` defaults to the real ``lightcone`` program. ``binary=False``
    skips prefixing the argv with ``"lightcone "``.

    :returns: Two-tuple of ``stdout, stderr`` strings.
    """
    if program is None:
        program = default_program
    if binary:
        invocation = "lightcone {}".format(invocation)
    program.run(invocation, exit=False)
    return sys.stdout.getvalue(), sys.stderr.getvalue()


def exit_code(invocation, program=None):
    """
    Run ``invocation`` with real exiting and return the exit code.
    """
    program = program or LightconeProgram(binary="lightcone")
    try:
        silence(program, invocation)
    except SystemExit as exc:
        return exc.code or 0
    return 0


@trap
def silence(program, invocation):
    program.run("lightcone {}".format(invocation))


@contextmanager
def cwd(path):
    old = os.getcwd()
    os.chdir(path)
    try:
        yield
    finally:
        os.chdir(old)
