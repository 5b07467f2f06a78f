import math

import numpy as np
import pytest
from _util import assert_close, minkowski, observer_at
from pytest_relaxed import raises

from lightcone.frames import AssumptionBounds, complete_frame
from lightcone.geodesic import integrate_geodesic, transport_frame
from lightcone.jacobi import (
    boundary_term,
    conjugate_radius,
    exp_jacobian,
    first_conjugate,
    index_form,
    integrate_jacobi,
    jacobian_matrix,
    null_conjugate_radius,
    phi_from_fields,
    sandwich_check,
    sandwich_constants,
    screen_basis,
    screen_phi,
)
from lightcone.spacetime import builtin


def _sphere():
    # On the equator; the unit circle is a great circle inside the chart
    spec = builtin("static_sphere", K=1.0)
    return spec, observer_at(spec, (0.0, 1.0, 0.0, 0.0))


class jacobi_fields:
    def grow_like_sinh_in_de_sitter(self):
        spec = builtin("desitter", K=1.0)
        obs = observer_at(spec)
        E = complete_frame(spec, obs).vectors
        geo = integrate_geodesic(spec, obs.point, E[:, 0], 2.0)
        frame = transport_frame(spec, geo, E)
        sol = integrate_jacobi(spec, geo, frame, np.zeros(4), E[:, 1])
        for s, F in zip(sol.s[1:], sol.F[1:, 0]):
            assert F == pytest.approx(math.sinh(s), rel=1e-7)

    def oscillate_like_sin_on_the_sphere(self):
        spec, obs = _sphere()
        E = complete_frame(spec, obs).vectors
        geo = integrate_geodesic(spec, obs.point, E[:, 2], 2.5)
        frame = transport_frame(spec, geo, E)
        sol = integrate_jacobi(spec, geo, frame, np.zeros(4), E[:, 3])
        assert_close(sol.F[:, 0], np.abs(np.sin(sol.s)), rel=1e-6, abs=1e-8)
        assert sol.vectors().shape == (len(sol.s), 4, 1)

    def are_linear_in_minkowski(self):
        spec = minkowski()
        obs = observer_at(spec)
        E = complete_frame(spec, obs).vectors
        geo = integrate_geodesic(spec, obs.point, [1.0, 0.3, 0.0, 0.0], 1.0)
        frame = transport_frame(spec, geo, E)
        J0 = np.array([0.0, 0.0, 1.0, 0.0])
        dJ0 = np.array([0.0, 0.0, 0.0, 2.0])
        sol = integrate_jacobi(spec, geo, frame, J0, dJ0)
        expected = J0 + sol.s[-1] * dJ0
        assert_close(sol.vectors()[-1][:, 0], expected, abs=1e-12)

    @raises(ValueError)
    def initial_data_shapes_must_agree(self):
        spec = minkowski()
        obs = observer_at(spec)
        E = complete_frame(spec, obs).vectors
        geo = integrate_geodesic(spec, obs.point, E[:, 0], 1.0)
        frame = transport_frame(spec, geo, E)
        integrate_jacobi(spec, geo, frame, np.zeros(4), np.eye(4)[:, :2])

    def index_form_matches_the_boundary_term(self):
        spec, obs = _sphere()
        E = complete_frame(spec, obs).vectors
        geo = integrate_geodesic(spec, obs.point, E @ [0.5, 0, 1.0, 0], 1.0)
        frame = transport_frame(spec, geo, E)
        sol = integrate_jacobi(spec, geo, frame, np.zeros(4), E[:, 3])
        assert index_form(spec, sol) == pytest.approx(
            boundary_term(spec, sol), rel=1e-5
        )


class jacobians:
    def matrix_limit_at_zero(self):
        np.testing.assert_array_equal(
            jacobian_matrix(np.zeros((3, 3)), 0.0), np.eye(3)
        )
        assert phi_from_fields(np.zeros((3, 3)), 0.0) == 1.0

    def is_one_in_minkowski(self):
        spec = minkowski()
        obs = observer_at(spec)
        for u in ([1, 0, 0, 0], [0.3, 0.4, -0.2, 0.8]):
            assert exp_jacobian(spec, obs, u, 1.5) == pytest.approx(1.0)

    def sphere_focuses_spatial_rays(self):
        spec, obs = _sphere()
        for s in (0.5, 1.0, 2.0):
            expected = (math.sin(s) / s) ** 2
            assert exp_jacobian(
                spec, obs, [0.0, 0.0, 1.0, 0.0], s
            ) == pytest.approx(expected, rel=1e-6)

    def starts_at_one(self):
        spec, obs = _sphere()
        assert exp_jacobian(spec, obs, [0.0, 1.0, 0.0, 0.0], 0.0) == 1.0

    @raises(ValueError)
    def negative_parameter(self):
        spec, obs = _sphere()
        exp_jacobian(spec, obs, [0.0, 1.0, 0.0, 0.0], -1.0)

    def rays_that_stop_early_give_nan(self):
        spec = builtin("desitter")
        assert math.isnan(
            exp_jacobian(spec, observer_at(spec), [1, 0, 0, 0], 12.0)
        )

    def screen_basis_is_orthonormal_and_transverse(self):
        direction = np.array([-1.0, 0.6, 0.8, 0.0]) / math.sqrt(2.0)
        W = screen_basis(direction)
        assert W.shape == (4, 2)
        assert_close(W.T @ W, np.eye(2), abs=1e-12)
        assert_close(W[0], np.zeros(2), abs=1e-12)
        assert_close(direction @ W, np.zeros(2), abs=1e-12)

    def screen_phi_on_the_sphere(self):
        # Null rays see half the spatial curvature
        spec, obs = _sphere()
        direction = np.array([-1.0, 0.0, 1.0, 0.0]) / math.sqrt(2.0)
        s = 1.0
        w = math.sqrt(0.5)
        expected = (math.sin(w * s) / (w * s)) ** 2
        assert screen_phi(spec, obs, direction, s) == pytest.approx(
            expected, rel=1e-6
        )


class conjugate_points:
    def first_one_on_the_sphere_is_at_pi(self):
        spec, obs = _sphere()
        found = first_conjugate(spec, obs, [0.0, 0.0, 1.0, 0.0], 4.0)
        assert found.s_star == pytest.approx(math.pi, abs=1e-6)
        assert found.how in ("sign", "singular")

    def do_not_depend_on_the_direction_scale(self):
        spec, obs = _sphere()
        unit = first_conjugate(spec, obs, [0.0, 0.0, 0.0, 1.0], 4.0)
        long = first_conjugate(spec, obs, [0.0, 0.0, 0.0, 3.0], 4.0)
        assert long.s_star == pytest.approx(unit.s_star, abs=1e-6)
        assert_close(long.direction, unit.direction)

    def none_in_minkowski(self):
        spec = minkowski()
        search = conjugate_radius(spec, observer_at(spec), 2.0, n_dirs=8)
        assert search.none
        assert search.minimum is None
        assert search.describe() == "none <= 2"
        assert search.failures == 0
        assert len(search.directions) == 8

    def none_for_timelike_rays_in_de_sitter(self):
        spec = builtin("desitter")
        search = conjugate_radius(
            spec, observer_at(spec), 1.0, n_dirs=8, kind="timelike"
        )
        assert search.none

    def spatial_search_on_the_sphere(self):
        spec, obs = _sphere()
        search = conjugate_radius(spec, obs, 4.0, n_dirs=8, kind="spatial")
        assert search.minimum == pytest.approx(math.pi, abs=1e-6)
        assert search.found
        lines = search.to_csv().splitlines()
        assert lines[0].startswith("index,u0,u1,u2,u3,s_star")
        assert len(lines) == 9

    def null_search_on_the_sphere(self):
        spec, obs = _sphere()
        search = null_conjugate_radius(spec, obs, 5.0, n_dirs=8)
        assert search.kind == "null"
        assert search.minimum == pytest.approx(
            math.pi * math.sqrt(2.0), abs=1e-5
        )

    @raises(ValueError)
    def too_few_directions(self):
        spec = minkowski()
        conjugate_radius(spec, observer_at(spec), 1.0, n_dirs=4)

    @raises(ValueError)
    def zero_direction(self):
        spec = minkowski()
        first_conjugate(spec, observer_at(spec), np.zeros(4), 1.0)


class sandwich:
    def flat_limit_is_linear(self):
        bounds = AssumptionBounds(K0=0.0, K1=0.0, K2=0.5, v0=1.0, r0=1.0)
        constants = sandwich_constants(bounds, 0.2, eps=0.1)
        assert constants.G == pytest.approx(8 * 0.5 * 0.2)
        assert constants.ell == 0.0
        assert constants.c3 == pytest.approx(0.1)
        assert constants.admissible

    def grows_with_the_window(self):
        bounds = AssumptionBounds(K0=0.1, K1=0.5, K2=1.0, v0=1.0, r0=1.0)
        short = sandwich_constants(bounds, 0.05)
        long = sandwich_constants(bounds, 2.0)
        assert short.admissible
        assert not long.admissible
        assert long.c4 > short.c4
        assert set(long.as_dict()) >= {"G", "ell", "u", "c4", "c5"}

    def holds_in_minkowski(self):
        spec = minkowski()
        bounds = AssumptionBounds(K0=0.0, K1=0.0, K2=0.0, v0=1.0, r0=1.0)
        report = sandwich_check(
            spec, observer_at(spec), bounds, 1.0, n_dirs=8
        )
        assert report.holds
        assert report.checked > 0
        assert not report.flagged
        assert_close(report.F[1:, 1], report.s[1:], rel=1e-10)

    def flags_inadmissible_windows(self):
        spec, obs = _sphere()
        bounds = AssumptionBounds(K0=0.0, K1=0.0, K2=5.0, v0=1.0, r0=1.0)
        report = sandwich_check(spec, obs, bounds, 1.0, n_dirs=8)
        assert "smallness" in report.flagged
