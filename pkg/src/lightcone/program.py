"""
The `invoke.Program` behind the ``lightcone`` binary.
"""

from __future__ import annotations

import os
from typing import Any, Optional

from invoke import Collection, Exit, Program
from invoke.exceptions import ParseError
from invoke.parser import Argument

from . import tasks
from .config import LightconeConfig
from .tasks import BAD_INPUT
from .util import debug

#: Core flags kept from invoke; the rest concern shell command execution.
CORE_FLAGS = {
    "complete",
    "config",
    "debug",
    "help",
    "list",
    "list-depth",
    "list-format",
    "print-completion-script",
    "version",
    "write-pyc",
}


class LightconeProgram(Program):
    """
    Bundled-namespace program running the tasks of `lightcone.tasks`.

    Differs from a stock `invoke.Program` in three ways: only the core flags
    that make sense without shell commands are offered (plus
    ``--threads``), config comes from `.LightconeConfig`, and parse errors
    exit with code 2 instead of 1.
    """

    def __init__(self, **kwargs: Any) -> None:
        kwargs.setdefault("namespace", Collection.from_module(tasks))
        kwargs.setdefault("config_class", LightconeConfig)
        super().__init__(**kwargs)

    def core_args(self) -> list[Argument]:
        kept = [
            arg
            for arg in super().core_args()
            if arg.name in CORE_FLAGS
        ]
        return kept + [
            Argument(
                names=("threads", "j"),
                kind=int,
                help="Worker threads for batch analyses.",
            )
        ]

    def update_config(self, merge: bool = True) -> None:
        overrides = {}
        if self.args.threads.value:
            overrides["threads"] = self.args.threads.value
        self.config.load_overrides(overrides, merge=False)
        runtime_path = self.args.config.value
        if runtime_path is None:
            runtime_path = os.environ.get("LIGHTCONE_RUNTIME_CONFIG", None)
        self.config.set_runtime_path(runtime_path)
        self.config.load_runtime(merge=False)
        if merge:
            self.config.merge()

    def parse_core(self, argv: Optional[list[str]]) -> None:
        try:
            super().parse_core(argv)
        except ParseError as exc:
            raise Exit(str(exc), code=BAD_INPUT)

    def parse_tasks(self) -> None:
        try:
            super().parse_tasks()
        except ParseError as exc:
            debug("Task arguments did not parse: %s", exc)
            raise Exit(str(exc), code=BAD_INPUT)
