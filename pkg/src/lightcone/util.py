from __future__ import annotations

import logging
import os
import sys
from collections import namedtuple
from queue import Empty, Queue
from threading import Thread
from types import TracebackType
from typing import Any, Callable, Optional, Sequence, TypeVar

from .exceptions import ThreadException

LOG_FORMAT = "%(name)s.%(module)s.%(funcName)s: %(message)s"


def enable_logging() -> None:
    logging.basicConfig(level=logging.DEBUG, format=LOG_FORMAT)


# Allow from-the-start debugging (vs toggled by the CLI --debug flag) via
# shell env var.
if os.environ.get("LIGHTCONE_DEBUG"):
    enable_logging()

log = logging.getLogger("lightcone")
debug = log.debug

T = TypeVar("T")
R = TypeVar("R")


class ExceptionHandlingThread(Thread):
    """
    Thread handler making it easier for parent to handle thread exceptions.

    When used directly, can be used in place of a regular ``threading.Thread``.
    If subclassed, the subclass must do one of:

    - supply ``target`` to ``__init__``
    - define ``_run()`` instead of ``run()``

    This is because this thread's entire point is to wrap behavior around the
    thread's execution; subclasses could not redefine ``run()`` without
    breaking that functionality.
    """

    def __init__(self, **kwargs: Any) -> None:
        """
        Create a new exception-handling thread instance.

        Takes all regular `threading.Thread` keyword arguments, via
        ``**kwargs`` for easier display of thread identity when raising
        captured exceptions.
        """
        super().__init__(**kwargs)
        self.daemon = True
        self.kwargs = kwargs
        self.exc_info: Optional[
            tuple[
                Optional[type[BaseException]],
                Optional[BaseException],
                Optional[TracebackType],
            ]
        ] = None

    def run(self) -> None:
        try:
            if hasattr(self, "_run") and callable(self._run):
                self._run()
            else:
                super().run()
        except BaseException:
            # Store for actual reraising later
            self.exc_info = sys.exc_info()
            name = "_run"
            if "target" in self.kwargs:
                name = self.kwargs["target"].__name__
            debug(
                "Encountered exception %r in thread for %r",
                self.exc_info[1],
                name,
            )

    def exception(self) -> Optional[ExceptionWrapper]:
        """
        If an exception occurred, return an `.ExceptionWrapper` around it.

        :returns:
            An `.ExceptionWrapper` managing the result of `sys.exc_info`, if an
            exception was raised during thread execution. If no exception
            occurred, returns ``None`` instead.
        """
        if self.exc_info is None:
            return None
        return ExceptionWrapper(self.kwargs, *self.exc_info)

    @property
    def is_dead(self) -> bool:
        """
        Returns ``True`` if not alive and has a stored exception.
        """
        return (not self.is_alive()) and self.exc_info is not None

    def __repr__(self) -> str:
        if "target" in self.kwargs:
            return str(self.kwargs["target"].__name__)
        return type(self).__name__


class BatchWorker(ExceptionHandlingThread):
    """
    Pulls item indices off a shared queue and stores results by index.

    A worker stops at the first exception it sees (which the parent collects
    via `exception`); the remaining workers keep draining the queue.
    """

    def __init__(
        self,
        func: Callable[[Any], Any],
        items: Sequence[Any],
        indices: Queue,
        results: list,
        **kwargs: Any,
    ) -> None:
        super().__init__(**kwargs)
        self.func = func
        self.items = items
        self.indices = indices
        self.results = results
        self.current: Optional[int] = None

    def _run(self) -> None:
        while True:
            try:
                index = self.indices.get(block=False)
            except Empty:
                return
            self.current = index
            self.results[index] = self.func(self.items[index])

    def exception(self) -> Optional[ExceptionWrapper]:
        if self.exc_info is None:
            return None
        kwargs = dict(self.kwargs, index=self.current)
        return ExceptionWrapper(kwargs, *self.exc_info)


def run_batch(
    func: Callable[[T], R], items: Sequence[T], workers: int = 1
) -> list[R]:
    """
    Map ``func`` over ``items``, optionally across worker threads.

    Results come back in item order no matter how many workers ran or which
    finished first, so aggregates built from them are deterministic.

    :param workers:
        Thread count. ``1`` (or fewer) runs inline in the calling thread with
        no threading machinery involved.

    :raises:
        `.ThreadException` if any item raised, wrapping every such exception
        ordered by item index.
    """
    if workers <= 1 or len(items) <= 1:
        return [func(item) for item in items]
    indices: Queue = Queue()
    for index in range(len(items)):
        indices.put(index)
    results: list = [None] * len(items)
    threads = [
        BatchWorker(func, items, indices, results, name="batch-{}".format(i))
        for i in range(min(workers, len(items)))
    ]
    for thread in threads:
        thread.start()
    for thread in threads:
        thread.join()
    wrappers = [t.exception() for t in threads if t.is_dead]
    if wrappers:
        wrappers.sort(key=lambda w: w.kwargs["index"])  # type: ignore
        raise ThreadException(wrappers)  # type: ignore
    return results


#: A namedtuple wrapping a thread-borne exception & that thread's arguments.
#: Mostly used as an intermediate between `.ExceptionHandlingThread` (which
#: preserves initial exceptions) and `.ThreadException` (which holds 1..N such
#: exceptions, as typically multiple threads are involved.)
ExceptionWrapper = namedtuple(
    "ExceptionWrapper", "kwargs type value traceback"
)
