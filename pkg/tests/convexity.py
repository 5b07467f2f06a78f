import math

import numpy as np
import pytest
from _util import minkowski, observer_at
from pytest_relaxed import raises

from lightcone.convexity import (
    ConvexityReport,
    build_synchronous_chart,
    convexity_check,
)
from lightcone.exceptions import ChartError
from lightcone.spacetime import builtin


class synchronous_charts:
    def minkowski_distance_is_the_proper_time(self):
        spec = minkowski(3)
        chart = build_synchronous_chart(spec, observer_at(spec), 1.0, grid=3)
        assert chart.coverage == 1.0
        assert chart.box == (-0.125, 0.125)
        np.testing.assert_allclose(chart.base, [-0.5, 0.0, 0.0], atol=1e-12)
        for x, tau in zip(chart.points, chart.tau):
            expected = math.sqrt((x[0] + 0.5) ** 2 - x[1] ** 2 - x[2] ** 2)
            assert tau == pytest.approx(expected, rel=1e-9)
        k = chart.center()
        np.testing.assert_allclose(chart.dtau[k], [1.0, 0.0, 0.0], atol=1e-9)
        np.testing.assert_allclose(chart.gN[k], np.eye(3), atol=1e-9)
        assert chart.max_residual < 1e-8
        assert chart.residual_fraction() == 1.0

    def curved_charts_keep_the_eikonal_equation(self):
        spec = builtin("desitter")
        chart = build_synchronous_chart(
            spec, observer_at(spec, (0.2, 0, 0, 0)), 0.8, grid=3
        )
        assert chart.coverage == 1.0
        assert chart.residual_fraction(1e-6) == 1.0

    @raises(ChartError)
    def past_geodesic_must_stay_in_the_chart(self):
        # de Sitter's chart starts at t = -10
        spec = builtin("desitter")
        build_synchronous_chart(spec, observer_at(spec, (-9.8, 0, 0, 0)), 1)

    @raises(ValueError)
    def grids_are_odd(self):
        spec = minkowski(3)
        build_synchronous_chart(spec, observer_at(spec), 1.0, grid=4)

    @raises(ValueError)
    def scale_must_be_positive(self):
        spec = minkowski(3)
        build_synchronous_chart(spec, observer_at(spec), 0.0)


class convexity:
    def hessian_is_twice_the_metric_at_p(self):
        spec = minkowski(3)
        obs = observer_at(spec)
        chart = build_synchronous_chart(spec, obs, 1.0, grid=3)
        report = convexity_check(spec, obs, chart, eps=0.1)
        assert report.interior == 1
        assert report.coverage == 1.0
        assert report.eigen_min == pytest.approx(2.0, abs=1e-5)
        assert report.eigen_max == pytest.approx(2.0, abs=1e-5)
        assert report.measured_eps < 1e-5
        assert report.holds
        assert report.fraction_within(1e-4) == 1.0

    def tau_hessian_sits_in_the_flat_band(self):
        spec = minkowski(3)
        obs = observer_at(spec)
        chart = build_synchronous_chart(spec, obs, 1.0, grid=3)
        report = convexity_check(spec, obs, chart, K=0.0)
        (row,) = report.rows
        assert row.band_lower == row.band_upper == pytest.approx(2.0)
        assert row.hess_min == pytest.approx(2.0, rel=1e-6)
        assert row.hess_max == pytest.approx(2.0, rel=1e-6)
        assert report.band_violations == 0

    def tables(self):
        spec = minkowski(3)
        obs = observer_at(spec)
        chart = build_synchronous_chart(spec, obs, 1.0, grid=3)
        lines = convexity_check(spec, obs, chart).to_csv().splitlines()
        assert lines[0].startswith("index,x0,x1,x2,tau,eig_min(Hess u;gT)")
        assert lines[0].endswith("eig_min(Hess u;gN),eig_max(Hess u;gN)")
        assert len(lines) == 2
        assert lines[1].startswith("13,")

    def empty_reports_do_not_hold(self):
        report = ConvexityReport(eps=0.1, K=0.0)
        assert not report.holds
        assert math.isnan(report.measured_eps)
        assert report.coverage == 0.0

    def flat_eigenvalues_are_two_across_the_grid(self):
        spec = minkowski(3)
        obs = observer_at(spec)
        chart = build_synchronous_chart(spec, obs, 1.0, grid=7)
        report = convexity_check(spec, obs, chart, K=0.0)
        assert report.interior == 125
        assert report.coverage == 1.0
        assert report.fraction_within(1e-6) == 1.0
        assert report.measured_eps < 1e-6
        # Against gN the same Hessian drifts away from p
        center = next(r for r in report.rows if r.index == chart.center())
        assert center.gn_min == pytest.approx(2.0, abs=1e-6)
        assert center.gn_max == pytest.approx(2.0, abs=1e-6)
        drift = max(
            max(abs(r.gn_min - 2.0), abs(r.gn_max - 2.0)) for r in report.rows
        )
        assert drift > 1e-3

    def de_sitter_eigenvalues_stay_in_the_window(self):
        spec = builtin("desitter", dim=3)
        obs = observer_at(spec)
        chart = build_synchronous_chart(spec, obs, 0.1, grid=5)
        assert chart.coverage == 1.0
        report = convexity_check(spec, obs, chart, eps=0.1)
        assert report.interior == 27
        assert report.coverage == 1.0
        assert report.holds
        assert report.fraction_within(0.1) == 1.0
        # Curvature moves the eigenvalues off 2
        assert 1e-4 < report.measured_eps < 0.1
