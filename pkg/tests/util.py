import logging
import threading

import pytest
from pytest_relaxed import raises

from lightcone.exceptions import ThreadException
from lightcone.util import LOG_FORMAT, debug, enable_logging, log, run_batch


class run_batch_:
    def keeps_item_order(self):
        items = list(range(20))
        assert run_batch(lambda x: 2 * x, items) == [2 * x for x in items]
        assert run_batch(lambda x: 2 * x, items, workers=4) == [
            2 * x for x in items
        ]

    def runs_inline_with_one_worker(self):
        seen = []
        run_batch(lambda x: seen.append(threading.current_thread()), [1, 2])
        assert all(t is threading.main_thread() for t in seen)

    def uses_threads_otherwise(self):
        seen = set()
        run_batch(lambda x: seen.add(threading.current_thread().name), [1, 2])
        run_batch(
            lambda x: seen.add(threading.current_thread().name),
            [1, 2, 3],
            workers=2,
        )
        assert any(name.startswith("batch-") for name in seen)

    def empty_input(self):
        assert run_batch(str, [], workers=8) == []

    def failures_are_collected_in_item_order(self):
        def check(x):
            if x % 3 == 0:
                raise ValueError(x)
            return x

        with pytest.raises(ThreadException) as info:
            run_batch(check, list(range(1, 10)), workers=3)
        failures = info.value.exceptions
        indices = [failure.kwargs["index"] for failure in failures]
        assert indices == sorted(indices)
        assert all(failure.type is ValueError for failure in failures)
        assert "ValueError" in str(info.value)

    @raises(ZeroDivisionError)
    def inline_failures_propagate(self):
        run_batch(lambda x: 1 / x, [1, 0])


class logging_:
    def logger_is_namespaced(self):
        assert log.name == "lightcone"
        assert debug == log.debug

    def enable_logging_goes_to_debug(self):
        root = logging.getLogger()
        old_level, old_handlers = root.level, list(root.handlers)
        root.handlers = []
        try:
            enable_logging()
            assert root.level == logging.DEBUG
            assert root.handlers[0].formatter._fmt == LOG_FORMAT
        finally:
            root.handlers = old_handlers
            root.setLevel(old_level)
