"""
Output bundles written by the CLI tasks.

A bundle is a directory holding ``summary.csv`` (one row per analysis),
``report.txt`` (human-readable) and ``manifest.yaml`` listing every file the
run produced. CSV files carry a ``#`` header line with the lightcone version
and seed; the timestamp lives only in the manifest, so reruns with the same
inputs produce byte-identical CSV.
"""

from __future__ import annotations

import csv
import io
import os
from dataclasses import dataclass, field
from datetime import datetime, timezone
from typing import Any, Optional

import yaml

from ._version import __version__
from .util import debug

SUMMARY = "summary.csv"
REPORT = "report.txt"
MANIFEST = "manifest.yaml"


def csv_preamble(seed: int) -> str:
    return "# lightcone {} seed {}\n".format(__version__, seed)


def _cell(value: Any) -> str:
    if value is None:
        return "none"
    if isinstance(value, bool):
        return "yes" if value else "no"
    if isinstance(value, float):
        return "{:.10g}".format(value)
    return str(value)


@dataclass
class ReportBundle:
    """
    Everything one CLI command produces.

    Build it up with `add_row`, `add_text` and `add_file`, then `write` it.
    ``files`` maps bundle-relative file names to a one-line description.
    """

    command: str
    directory: str
    seed: int = 0
    rows: list[dict[str, Any]] = field(default_factory=list)
    text: list[str] = field(default_factory=list)
    files: dict[str, str] = field(default_factory=dict)
    contents: dict[str, str] = field(default_factory=dict, repr=False)
    settings: dict[str, Any] = field(default_factory=dict)
    failures: list[tuple[str, str]] = field(default_factory=list)

    def add_row(self, analysis: str, **values: Any) -> None:
        self.rows.append(dict(analysis=analysis, **values))

    def add_text(self, text: str) -> None:
        self.text.append(text.rstrip("\n"))

    def add_file(
        self, name: str, content: str, description: str, data: bool = True
    ) -> None:
        """
        Queue a data file. CSV and plot files (``data``) get the version and
        seed preamble.
        """
        if data:
            content = csv_preamble(self.seed) + content
        self.files[name] = description
        self.contents[name] = content

    def fail(self, name: str, detail: str) -> None:
        """
        Record a failed check; the task turns these into exit code 1.
        """
        self.failures.append((name, detail))

    @property
    def ok(self) -> bool:
        return not self.failures

    def summary_csv(self) -> str:
        columns: list[str] = []
        for row in self.rows:
            for key in row:
                if key not in columns:
                    columns.append(key)
        out = io.StringIO()
        writer = csv.writer(out, lineterminator="\n")
        writer.writerow(columns)
        for row in self.rows:
            writer.writerow([_cell(row.get(key, "")) for key in columns])
        return csv_preamble(self.seed) + out.getvalue()

    def report_text(self) -> str:
        head = "lightcone {} {} (seed {})".format(
            __version__, self.command, self.seed
        )
        parts = [head, "=" * len(head)] + self.text
        if self.failures:
            parts.append("FAILED:")
            parts += ["  {}: {}".format(n, d) for n, d in self.failures]
        return "\n\n".join(parts) + "\n"

    def manifest(self, timestamp: Optional[str] = None) -> dict[str, Any]:
        return {
            "command": self.command,
            "version": __version__,
            "seed": self.seed,
            "timestamp": timestamp
            or datetime.now(timezone.utc).isoformat(timespec="seconds"),
            "status": "ok" if self.ok else "failed",
            "settings": self.settings,
            "files": dict(
                {SUMMARY: "one row per analysis", REPORT: "text report"},
                **self.files,
            ),
        }

    def write(self) -> str:
        """
        Write the bundle and return the manifest path.

        :raises: ``FileNotFoundError`` if a listed file did not make it to
            disk.
        """
        os.makedirs(self.directory, exist_ok=True)
        outputs = dict(self.contents)
        outputs[SUMMARY] = self.summary_csv()
        outputs[REPORT] = self.report_text()
        for name, content in outputs.items():
            path = os.path.join(self.directory, name)
            with open(path, "w", encoding="utf-8", newline="") as fd:
                fd.write(content)
        manifest = self.manifest()
        missing = [
            name
            for name in manifest["files"]
            if not os.path.isfile(os.path.join(self.directory, name))
        ]
        if missing:
            raise FileNotFoundError(
                "bundle lists missing file(s): {}".format(", ".join(missing))
            )
        path = os.path.join(self.directory, MANIFEST)
        with open(path, "w", encoding="utf-8") as fd:
            yaml.safe_dump(manifest, fd, sort_keys=False)
        debug("Wrote %d file(s) to %s", len(outputs) + 1, self.directory)
        return path
