import math

import numpy as np
import pytest
from _util import assert_close, minkowski, observer_at
from pytest_relaxed import raises

from lightcone.exceptions import ChartError
from lightcone.frames import complete_frame, eta
from lightcone.geodesic import (
    ExpFailure,
    GeodesicSystem,
    exp_map,
    exp_with_jacobian,
    frame_components,
    integrate_geodesic,
    parallel_transport,
    radial_norm_profile,
    ray_fan,
    transport_frame,
)
from lightcone.spacetime import builtin, metric_at


class geodesics:
    def are_straight_in_minkowski(self):
        p = np.array([0.0, 1.0, -1.0, 2.0])
        v = np.array([1.0, 0.3, 0.2, -0.4])
        geo = integrate_geodesic(minkowski(), p, v, 2.0)
        assert geo.ok
        assert geo.s_end == 2.0
        for s, x in zip(geo.s, geo.x):
            assert_close(x, p + s * v, abs=1e-12)
        assert_close(geo.point(1.5), p + 1.5 * v, abs=1e-10)

    def comoving_worldlines_in_de_sitter(self):
        geo = integrate_geodesic(
            builtin("desitter"), np.zeros(4), [1.0, 0.0, 0.0, 0.0], 1.5
        )
        assert_close(geo.x[-1], [1.5, 0.0, 0.0, 0.0], abs=1e-9)

    def null_rays_in_de_sitter(self):
        # t = log(1 + s), x1 = 1 - 1 / (1 + s)
        geo = integrate_geodesic(
            builtin("desitter"), np.zeros(4), [1.0, 1.0, 0.0, 0.0], 1.0
        )
        assert_close(
            geo.x[-1], [math.log(2.0), 0.5, 0.0, 0.0], rel=1e-8, abs=1e-9
        )
        assert max(geo.norm_drift) < 1e-9

    def norm_is_conserved_in_schwarzschild(self):
        spec = builtin("schwarzschild", M=1.0)
        obs = observer_at(spec, (0.0, 8.0, 0.0, 0.0))
        E = complete_frame(spec, obs).vectors
        geo = integrate_geodesic(
            spec, obs.point, E @ [1.2, 0.1, 0.6, 0.0], 5.0
        )
        assert geo.ok
        assert max(geo.norm_drift) < 1e-8

    def leaving_the_chart_is_reported(self):
        # de Sitter's chart ends at t = 10
        geo = integrate_geodesic(
            builtin("desitter"), np.zeros(4), [1.0, 0.0, 0.0, 0.0], 20.0
        )
        assert geo.termination == "left_chart"
        assert not geo.ok
        assert geo.s_end == pytest.approx(10.0 - 1e-3, abs=1e-6)

    def falling_into_the_excision(self):
        spec = builtin("schwarzschild", M=1.0)
        geo = integrate_geodesic(
            spec, (0.0, 3.0, 0.0, 0.0), [1.0, 0.0, 0.0, 0.0], 50.0
        )
        assert geo.termination == "left_chart"
        assert np.linalg.norm(geo.x[-1][1:]) == pytest.approx(
            2.2 + 1e-3, abs=1e-5
        )

    @raises(ChartError)
    def starting_outside_the_chart(self):
        integrate_geodesic(
            builtin("schwarzschild"), (0.0, 1.0, 0.0, 0.0), np.ones(4), 1.0
        )

    @raises(ValueError)
    def non_finite_initial_data(self):
        integrate_geodesic(minkowski(), np.zeros(4), [np.nan, 0, 0, 0], 1.0)

    def csv_has_one_row_per_sample(self):
        geo = integrate_geodesic(
            minkowski(2), np.zeros(2), [1.0, 0.5], 1.0
        )
        lines = geo.to_csv().splitlines()
        assert lines[0] == "s,x0,x1,v0,v1,drift_g(v,v)"
        assert len(lines) == len(geo.s) + 1
        assert lines[1].split(",")[0] == "0"


class systems:
    @raises(ValueError)
    def jacobi_fields_need_a_frame(self):
        GeodesicSystem(minkowski(), fields=2)

    def state_sizes(self):
        spec = minkowski()
        assert GeodesicSystem(spec).size == 8
        assert GeodesicSystem(spec, frame=True).size == 24
        assert GeodesicSystem(spec, frame=True, fields=2).size == 40

    def pack_and_unpack_agree(self):
        system = GeodesicSystem(minkowski(3), frame=True, fields=1)
        E = np.arange(9.0).reshape(3, 3)
        A = np.array([[1.0], [2.0], [3.0]])
        y = system.pack(np.ones(3), 2 * np.ones(3), E, A, -A)
        parts = system.unpack(y)
        np.testing.assert_array_equal(parts["E"], E)
        np.testing.assert_array_equal(parts["dA"], -A)


class transport:
    def keeps_frames_orthonormal_in_schwarzschild(self):
        spec = builtin("schwarzschild", M=1.0)
        obs = observer_at(spec, (0.0, 6.0, 0.0, 0.0))
        E = complete_frame(spec, obs).vectors
        geo = integrate_geodesic(spec, obs.point, E @ [1.0, 0.2, 0.5, 0], 1.0)
        frame = transport_frame(spec, geo, E)
        assert frame.max_residual < 1e-8
        assert len(frame.residuals) == len(frame.s)

    def velocity_transports_to_itself(self):
        spec = builtin("desitter")
        v0 = np.array([1.0, 0.4, 0.0, 0.0])
        geo = integrate_geodesic(spec, np.zeros(4), v0, 1.0)
        V = parallel_transport(spec, geo, v0)
        assert_close(V, geo.v, rel=1e-7, abs=1e-9)

    def frame_components_invert_the_frame(self):
        E = np.array([[2.0, 1.0], [0.0, 1.0]])
        assert_close(frame_components(E, E @ [0.5, -1.0]), [0.5, -1.0])


class exponential_map:
    def is_translation_in_minkowski(self):
        spec = minkowski()
        obs = observer_at(spec, (1.0, 2.0, 3.0, 4.0))
        y = np.array([0.5, -0.2, 0.1, 0.3])
        assert_close(exp_map(spec, obs, y), obs.point + y, abs=1e-12)
        assert_close(exp_map(spec, obs, np.zeros(4)), obs.point)

    def jacobian_is_the_frame_in_minkowski(self):
        spec = minkowski()
        obs = observer_at(spec)
        E = complete_frame(spec, obs).vectors
        point, D, geo = exp_with_jacobian(spec, obs.point, E, [0.3, 0.1, 0, 0])
        assert geo.ok
        assert_close(D, E, abs=1e-10)

    def jacobian_matches_differences(self):
        spec = builtin("static_sphere")
        obs = observer_at(spec, (0.0, 0.2, -0.1, 0.0))
        E = complete_frame(spec, obs).vectors
        y = np.array([0.4, 0.5, 0.2, -0.3])
        _, D, _ = exp_with_jacobian(spec, obs.point, E, y)
        h = 1e-4
        for k in range(4):
            step = np.zeros(4)
            step[k] = h
            plus = exp_map(spec, obs, y + step, frame=E)
            minus = exp_map(spec, obs, y - step, frame=E)
            assert_close(D[:, k], (plus - minus) / (2 * h), rel=1e-4, abs=1e-5)

    def failures_raise(self):
        spec = builtin("desitter")
        with pytest.raises(ExpFailure) as info:
            exp_map(spec, observer_at(spec), [12.0, 0.0, 0.0, 0.0])
        assert info.value.termination == "left_chart"
        assert isinstance(info.value, ChartError)


class radial_profiles:
    def constant_in_minkowski(self):
        spec = minkowski()
        profile = radial_norm_profile(
            spec, observer_at(spec), [1.0, 0.5, 0.0, 0.0], 2.0
        )
        assert_close(profile.transported, np.ones(len(profile.s)))
        assert profile.violations == 0
        assert profile.first_violation is None
        assert len(profile.rows()) == len(profile.s)

    def de_sitter_obeys_the_evolution_bound(self):
        spec = builtin("desitter")
        profile = radial_norm_profile(
            spec, observer_at(spec), [1.0, 0.8, 0.0, 0.0], 1.0
        )
        assert profile.foliation is not None
        assert profile.violations == 0
        # The transported norm only drifts by integration error
        assert np.ptp(profile.transported) < 1e-8


class fans:
    def keep_direction_order_with_workers(self):
        spec = minkowski(3)
        dirs = np.array([[1.0, 0.0, 0.0], [1.0, 0.5, 0.0], [1.0, 0.0, 0.7]])
        serial = ray_fan(spec, observer_at(spec), dirs, 1.0)
        threaded = ray_fan(spec, observer_at(spec), dirs, 1.0, workers=3)
        for one, other, u in zip(serial, threaded, dirs):
            assert_close(one.x[-1], u, abs=1e-12)
            np.testing.assert_array_equal(one.x[-1], other.x[-1])

    def jacobi_fields_on_request(self):
        spec = minkowski(3)
        (geo,) = ray_fan(
            spec, observer_at(spec), [[1.0, 0.2, 0.0]], 1.0, jacobi=True
        )
        assert geo.A is not None
        assert_close(geo.A[-1], np.eye(3), abs=1e-12)
        assert_close(geo.frames[-1].T @ eta(3) @ geo.frames[-1], eta(3))
        assert metric_at(spec, geo.x[-1]).signature() == (1, 2)
