from unittest.mock import patch

import numpy as np
from pytest_relaxed import raises

from lightcone.frames import ConnectionGapReport, GapRow
from lightcone.verify import SUITE, CheckResult, run_suite


def _by_name(results):
    return {result.name: result for result in results}


def _broken_gap(spec, count=100, **kwargs):
    row = GapRow(np.zeros(spec.dim), lhs=1.0, rhs_quadratic=0.0, linear=0.5)
    return ConnectionGapReport(rows=[row], K0=0.0, K1=0.5 / np.sqrt(2))


class suite:
    def passes_on_the_builtin_models(self):
        results = run_suite()
        assert [r.name for r in results] == list(SUITE.keys())
        failed = [r for r in results if not r.passed]
        assert not failed, failed
        assert all(r.seconds >= 0 for r in results)

    def curvature_sign_fault_is_caught(self):
        results = _by_name(
            run_suite(
                ["flat-curvature", "jacobi-sinh", "sphere-conjugate"],
                fault="curvature-sign",
            )
        )
        # Flat space cannot see the sign
        assert results["flat-curvature"].passed
        assert not results["jacobi-sinh"].passed
        assert not results["sphere-conjugate"].passed

    def curvature_free_checks_ignore_the_sign_fault(self):
        names = ["connection-gap", "slow-light-cone", "convexity"]
        results = run_suite(names, fault="curvature-sign")
        assert [r.name for r in results] == names
        assert all(r.passed for r in results), results

    def aliases_resolve(self):
        (result,) = run_suite(["gap"])
        assert result.name == "connection-gap"
        assert result.passed
        (result,) = run_suite(["cone"])
        assert result.name == "slow-light-cone"

    def raising_checks_fail(self):
        def boom(fault, tol):
            raise ValueError("no chart here")

        SUITE["boom"] = boom
        try:
            (result,) = run_suite(["boom"])
        finally:
            del SUITE["boom"]
        assert not result.passed
        assert "no chart here" in result.detail

    def results_are_plain_records(self):
        result = CheckResult("x", True, "fine")
        assert result.seconds == 0.0

    @raises(ValueError)
    def unknown_faults(self):
        run_suite(["model-volume"], fault="torsion")

    class connection_gap:
        def covers_every_foliated_builtin(self):
            seen = []

            def record(spec, count=100, **kwargs):
                seen.append(spec.model.name)
                return _broken_gap(spec)

            with patch("lightcone.verify.connection_gap", side_effect=record):
                (result,) = run_suite(["connection-gap"])
            assert sorted(seen) == [
                "desitter_slicing",
                "flat_spatial_torus",
                "flrw",
                "minkowski",
                "schwarzschild",
                "static_sphere",
            ]
            assert not result.passed
            assert "schwarzschild" in result.detail

        def reports_quadratic_violations_on_schwarzschild(self):
            (result,) = run_suite(["connection-gap"])
            assert result.passed
            assert "schwarzschild" in result.detail

        def fails_when_the_linear_form_breaks(self):
            with patch(
                "lightcone.verify.connection_gap", side_effect=_broken_gap
            ):
                (result,) = run_suite(["connection-gap"])
            assert not result.passed
            assert result.detail.startswith("linear form fails on")

    class slow_light_cone:
        def fails_against_the_wrong_speed(self):
            with patch("lightcone.verify.cone_graph") as graph:
                graph.return_value.lipschitz = 2.0
                graph.return_value.holds = False
                graph.return_value.lipschitz_bound = 0.5
                (result,) = run_suite(["slow-light-cone"])
            assert not result.passed
            assert result.detail == "Lipschitz 2 against C1 0.5"

    class convexity:
        def reports_both_windows(self):
            (result,) = run_suite(["convexity"])
            assert result.passed
            assert result.detail.startswith("flat eps ")
            assert "de Sitter eps" in result.detail

        def fails_when_an_eigenvalue_leaves_the_window(self):
            with patch("lightcone.verify.convexity_check") as check:
                check.return_value.fraction_within.return_value = 0.5
                check.return_value.coverage = 1.0
                check.return_value.holds = True
                check.return_value.measured_eps = 0.3
                (result,) = run_suite(["convexity"])
            assert not result.passed
