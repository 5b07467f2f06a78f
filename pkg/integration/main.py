import os
import sys

import yaml
from pytest_relaxed import trap

from invoke import run
from lightcone._version import __version__


def _output_eq(cmd, expected):
    assert run(cmd, hide=True).stdout == expected


def _manifest(directory):
    with open(os.path.join(directory, "manifest.yaml")) as fd:
        return yaml.safe_load(fd)


class Main:
    class basics:
        @trap
        def version_output(self):
            _output_eq(
                "lightcone --version", "Lightcone {}\n".format(__version__)
            )

        @trap
        def help_output(self):
            assert "Usage: lightcone " in run("lightcone --help").stdout

        @trap
        def per_task_help(self):
            stdout = run("lightcone --help volume").stdout
            assert "--angle" in stdout

        @trap
        def invocable_via_python_dash_m(self):
            _output_eq(
                "{} -m lightcone --version".format(sys.executable),
                "Lightcone {}\n".format(__version__),
            )

    class exit_statuses:
        def clean_verify_exits_zero(self, tmp_path):
            out = str(tmp_path / "verify")
            result = run("lightcone verify --out {}".format(out), hide=True)
            assert result.exited == 0
            assert _manifest(out)["status"] == "ok"

        def injected_fault_exits_one(self, tmp_path):
            out = str(tmp_path / "fault")
            result = run(
                "lightcone verify --inject curvature-sign --out {}".format(
                    out
                ),
                hide=True,
                warn=True,
            )
            assert result.exited == 1
            assert _manifest(out)["status"] == "failed"
            assert "FAILED" in result.stdout

        def bad_input_exits_two(self, tmp_path):
            out = str(tmp_path / "nope")
            result = run(
                "lightcone describe --spec builtin:nope --out {}".format(out),
                hide=True,
                warn=True,
            )
            assert result.exited == 2
            assert result.stderr
            assert not os.path.exists(out)

    class configuration:
        def env_vars_reach_the_run(self, tmp_path):
            out = str(tmp_path / "env")
            run(
                "lightcone describe --spec builtin:minkowski "
                "--point 0,0,0,0 --out {}".format(out),
                hide=True,
                env={"LIGHTCONE_SEED": "13"},
            )
            assert _manifest(out)["seed"] == 13
