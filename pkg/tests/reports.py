import os

import yaml
from pytest_relaxed import raises

from lightcone import __version__
from lightcone.reports import ReportBundle, csv_preamble


def _bundle(directory, **kwargs):
    return ReportBundle(command="describe", directory=directory, **kwargs)


class preamble:
    def names_version_and_seed(self):
        assert csv_preamble(4) == "# lightcone {} seed 4\n".format(
            __version__
        )


class summaries:
    def columns_are_the_union_in_first_seen_order(self, outdir):
        b = _bundle(outdir)
        b.add_row("one", a=1, b=2.5)
        b.add_row("two", c=None, a=True)
        lines = b.summary_csv().splitlines()
        assert lines[0].startswith("# lightcone")
        assert lines[1] == "analysis,a,b,c"
        assert lines[2] == "one,1,2.5,"
        assert lines[3] == "two,yes,,none"

    def floats_keep_ten_digits(self, outdir):
        b = _bundle(outdir)
        b.add_row("pi", value=3.14159265358979)
        assert b.summary_csv().splitlines()[2] == "pi,3.141592654"


class text_reports:
    def headline_and_sections(self, outdir):
        b = _bundle(outdir, seed=3)
        b.add_text("first\n")
        b.add_text("second")
        text = b.report_text()
        assert text.startswith(
            "lightcone {} describe (seed 3)\n".format(__version__)
        )
        assert "\n\nfirst\n\nsecond\n" in text
        assert "FAILED" not in text

    def failures_are_listed(self, outdir):
        b = _bundle(outdir)
        b.fail("annulus", "3 sample(s) outside")
        assert not b.ok
        assert "FAILED:\n\n  annulus: 3 sample(s) outside" in b.report_text()


class writing:
    def writes_every_file_and_the_manifest(self, outdir):
        b = _bundle(outdir, seed=2, settings={"rmax": 1.0})
        b.add_file("data.csv", "x\n1\n", "numbers")
        b.add_file("notes.txt", "plain\n", "notes", data=False)
        path = b.write()
        assert path == os.path.join(outdir, "manifest.yaml")
        with open(path) as fd:
            manifest = yaml.safe_load(fd)
        assert manifest["command"] == "describe"
        assert manifest["seed"] == 2
        assert manifest["status"] == "ok"
        assert manifest["settings"] == {"rmax": 1.0}
        assert list(manifest["files"]) == [
            "summary.csv",
            "report.txt",
            "data.csv",
            "notes.txt",
        ]
        with open(os.path.join(outdir, "data.csv")) as fd:
            assert fd.read() == csv_preamble(2) + "x\n1\n"
        with open(os.path.join(outdir, "notes.txt")) as fd:
            assert fd.read() == "plain\n"

    def failed_bundles_say_so(self, outdir):
        b = _bundle(outdir)
        b.fail("check", "broken")
        b.write()
        with open(os.path.join(outdir, "manifest.yaml")) as fd:
            assert yaml.safe_load(fd)["status"] == "failed"

    def manifest_timestamp_can_be_pinned(self, outdir):
        manifest = _bundle(outdir).manifest(timestamp="2020-01-01T00:00:00")
        assert manifest["timestamp"] == "2020-01-01T00:00:00"

    @raises(FileNotFoundError)
    def listed_files_must_exist(self, outdir):
        b = _bundle(outdir)
        b.files["ghost.csv"] = "never written"
        b.write()
