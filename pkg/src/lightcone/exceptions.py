"""
Custom exception classes.

These vary in use case from "a metric document is malformed and the user
needs a line and column" to "a numeric evaluation wandered somewhere it must
not", and exist so that callers can tell expected failure modes apart from
truly unexpected errors.
"""

from __future__ import annotations

from pprint import pformat
from textwrap import dedent
from traceback import format_exception
from typing import TYPE_CHECKING, Any, Optional, Sequence

if TYPE_CHECKING:
    from .util import ExceptionWrapper


class ParseError(ValueError):
    """
    A metric-spec document or expression could not be parsed.

    Carries the 1-based ``line`` and ``column`` of the problem plus the
    offending ``token`` (which may be empty at end of input), so that CLI users
    can find the mistake without reading a traceback.
    """

    def __init__(
        self,
        msg: str,
        line: int = 1,
        column: int = 1,
        token: str = "",
    ) -> None:
        super().__init__(msg)
        self.msg = msg
        self.line = line
        self.column = column
        self.token = token

    def __str__(self) -> str:
        where = "line {}, column {}: {}".format(
            self.line, self.column, self.msg
        )
        if self.token:
            where += " (near {!r})".format(self.token)
        return where


class SpecError(ValueError):
    """
    A metric spec parsed fine but does not describe a usable spacetime.

    Raised for unknown models or variables, dimension mismatches, a lapse that
    is not positive, or a metric whose signature is not (-, +, ..., +) at one
    of the probe points.
    """


class ChartError(ValueError):
    """
    A point, or part of a finite-difference stencil, lies outside the chart.

    :param point: The offending chart coordinates.
    """

    def __init__(self, msg: str, point: Optional[Sequence[float]] = None):
        super().__init__(msg)
        self.point = None if point is None else tuple(point)


class NonFiniteError(ArithmeticError):
    """
    Evaluation of a geometric quantity produced NaN or infinity.

    ``quantity`` names what was being computed (``"metric"``,
    ``"christoffel"``...), ``point`` where.
    """

    def __init__(
        self, quantity: str, point: Optional[Sequence[float]] = None
    ) -> None:
        self.quantity = quantity
        self.point = None if point is None else tuple(point)
        super().__init__(
            "non-finite {} at {}".format(quantity, self.point)
        )


class FrameError(ValueError):
    """
    An observer or frame could not be built.

    Typically the supplied vector is not timelike at the base point, or the
    metric is degenerate there.
    """


class BoundError(ValueError):
    """
    A constant chain produced a non-positive (or non-finite) link.

    ``link`` is the name of the failing constant, ``value`` its value.

    .. note::
        Analyses usually record this in their report rather than raising; it
        is raised when the caller asked for the bound itself.
    """

    def __init__(self, link: str, value: float) -> None:
        self.link = link
        self.value = value
        super().__init__(
            "bound chain failed at {}: {!r} is not positive".format(
                link, value
            )
        )


def _printable_kwargs(kwargs: Any) -> Any:
    """
    Return print-friendly version of a thread-related ``kwargs`` dict.

    Long argument lists (direction tables, grids) are truncated.
    """
    printable = {}
    for key, value in kwargs.items():
        item = value
        if key == "args":
            item = []
            for arg in value:
                new_arg = arg
                if hasattr(arg, "__len__") and len(arg) > 10:
                    msg = "<... remainder truncated during error display ...>"
                    new_arg = list(arg[:10]) + [msg]
                item.append(new_arg)
        printable[key] = item
    return printable


class ThreadException(Exception):
    """
    One or more exceptions were raised within batch worker threads.

    The real underlying exceptions are stored in the `exceptions` attribute,
    ordered by the batch index of the item that failed.

    .. note::
        Items which did not encounter an exception do not contribute to this
        exception object and thus are not present inside `exceptions`.
    """

    #: A tuple of `ExceptionWrappers <lightcone.util.ExceptionWrapper>`
    #: containing the thread constructor kwargs and the caught exception as
    #: seen by `sys.exc_info` (so: type, value, traceback).
    exceptions: tuple["ExceptionWrapper", ...] = tuple()

    def __init__(self, exceptions: list[ExceptionWrapper]) -> None:
        self.exceptions = tuple(exceptions)

    def __str__(self) -> str:
        details = []
        for x in self.exceptions:
            detail = "Thread args: {}\n\n{}"
            details.append(
                detail.format(
                    pformat(_printable_kwargs(x.kwargs)),
                    "\n".join(format_exception(x.type, x.value, x.traceback)),
                )
            )
        args = (
            len(self.exceptions),
            ", ".join(x.type.__name__ for x in self.exceptions),
            "\n\n".join(details),
        )
        return dedent(
            f"""\
            Saw {args[0]} exceptions within threads ({args[1]}):


            {args[2]}
            """
        )
