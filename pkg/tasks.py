from __future__ import annotations

from typing import TYPE_CHECKING, Optional

from invoke import Collection, Exit, task

if TYPE_CHECKING:
    from invoke import Context


@task
def test(
    c: Context,
    verbose: bool = False,
    module: Optional[str] = None,
    k: Optional[str] = None,
    x: bool = False,
    opts: str = "",
    pty: bool = True,
) -> None:
    """
    Run pytest over the unit suite.

    ``module`` narrows the run to ``tests/<module>.py``; ``k`` and ``x`` are
    passed through as pytest's ``-k`` and ``-x``.
    """
    flags = [opts] if opts else []
    if verbose:
        flags.append("--verbose")
    if k:
        flags.append("-k {!r}".format(k))
    if x:
        flags.append("-x")
    target = "tests/{}.py".format(module) if module else ""
    c.run("pytest {} {}".format(" ".join(flags), target).strip(), pty=pty)


@task(help=test.help)  # type: ignore
def integration(
    c: Context, opts: Optional[str] = None, pty: bool = True
) -> None:
    """
    Run the integration suite, which drives the installed binary. Slow!
    """
    if not c.run("which lightcone", hide=True, warn=True):
        raise Exit("No lightcone on PATH; try 'pip install -e .' first.")
    c.run("pytest {} integration/".format(opts or "").strip(), pty=pty)


@task
def coverage(c: Context, report: str = "term", opts: str = "") -> None:
    """
    Run both suites under coverage and print a ``report``-style summary.
    """
    c.run("coverage erase")
    for target in ("tests", "integration"):
        c.run("coverage run --append -m pytest {} {}".format(opts, target))
    c.run("coverage {}".format("report" if report == "term" else report))


@task
def check(c: Context) -> None:
    """
    Run the linters the way CI does.
    """
    c.run("black --check src tests integration tasks.py")
    c.run("isort --check-only src tests integration tasks.py")
    c.run("flake8 src")
    c.run("mypy src")


ns = Collection(test, coverage, integration, check)
