import math

import numpy as np
import pytest
from _util import minkowski, observer_at
from pytest_relaxed import raises

from lightcone.lattices import cap_solid_angle, sphere_area
from lightcone.spacetime import builtin
from lightcone.volume import (
    ConeSpec,
    ball_exp_volume,
    comparison_ratio_curve,
    corollary_volume_bound,
    future_cone_volume,
    jacobian_volume_check,
    model_volume,
    trace_rays,
)


def _small_cap(orientation="future"):
    return ConeSpec.cap(4, math.pi / 8, orientation, n_theta=4, n_u=8)


class cone_specs:
    def caps_carry_their_exact_area(self):
        cone = _small_cap()
        assert cone.solid_angle == pytest.approx(
            cap_solid_angle(4, math.pi / 8)
        )
        assert len(cone.directions) == 32
        assert np.all(cone.directions[:, 0] > 0)
        assert cone.sections()["half_angle"] == math.pi / 8

    def past_caps_point_backwards(self):
        cone = _small_cap("past")
        assert np.all(cone.directions[:, 0] < 0)

    def the_ball_covers_the_sphere(self):
        cone = ConeSpec.ball(3, n_theta=8, n_u=16)
        assert cone.kind == "ball"
        assert cone.solid_angle == pytest.approx(4.0 * math.pi, rel=1e-8)

    def explicit_directions_are_normalized(self):
        cone = ConeSpec.explicit([[2.0, 0.0, 0.0, 0.0], [3.0, 1.0, 0, 0]], 1.0)
        assert np.linalg.norm(cone.directions, axis=1) == pytest.approx(1.0)
        assert list(cone.weights) == [0.5, 0.5]
        assert cone.half_angle is None

    def null_directions(self):
        cone = ConeSpec.explicit([[1.0, 1.0, 0.0, 0.0]], 1.0, kind="null")
        assert cone.kind == "null"

    @raises(ValueError)
    def caps_stop_at_the_null_cone(self):
        ConeSpec.cap(4, math.pi / 3)

    @raises(ValueError)
    def spacelike_directions_are_rejected(self):
        ConeSpec.explicit([[0.0, 1.0, 0.0, 0.0]], 1.0)

    @raises(ValueError)
    def orientation_must_match(self):
        ConeSpec.explicit([[1.0, 0.0, 0.0, 0.0]], 1.0, orientation="past")

    @raises(ValueError)
    def unknown_orientation(self):
        ConeSpec.explicit([[1.0, 0.0, 0.0, 0.0]], 1.0, orientation="up")

    @raises(ValueError)
    def unknown_kind(self):
        ConeSpec.explicit([[1.0, 0.0, 0.0, 0.0]], 1.0, kind="spacelike")


class model_volumes:
    def flat_is_a_power(self):
        assert model_volume(0.0, 2.0, 3) == pytest.approx(
            sphere_area(4) * 2.0**4 / 4
        )

    def hyperbolic_in_two_dimensions(self):
        r = 1.3
        assert model_volume(1.0, r, 1) == pytest.approx(
            2.0 * math.pi * (math.cosh(r) - 1.0), rel=1e-12
        )

    def solid_angle_scales_linearly(self):
        full = model_volume(0.5, 1.0, 3)
        part = model_volume(0.5, 1.0, 3, solid_angle=1.0)
        assert part * sphere_area(4) == pytest.approx(full)

    def grows_with_curvature(self):
        assert model_volume(1.0, 1.0, 3) > model_volume(0.0, 1.0, 3)

    @raises(ValueError)
    def negative_curvature(self):
        model_volume(-1.0, 1.0, 3)

    @raises(ValueError)
    def negative_radius(self):
        model_volume(0.0, -1.0, 3)


class cone_volumes:
    def minkowski_cap(self):
        spec = minkowski()
        cone = _small_cap()
        volume = future_cone_volume(spec, observer_at(spec), cone, 1.5)
        assert volume.value == pytest.approx(
            cone.solid_angle * 1.5**4 / 4, rel=1e-10
        )
        assert volume.coverage == 1.0
        assert volume.truncated == {}
        assert volume.convention == "multiplicity"

    def past_and_future_agree_in_minkowski(self):
        spec = minkowski()
        obs = observer_at(spec)
        future = future_cone_volume(spec, obs, _small_cap(), 1.0)
        past = future_cone_volume(spec, obs, _small_cap("past"), 1.0)
        assert past.value == pytest.approx(future.value, rel=1e-12)

    def zero_radius(self):
        spec = minkowski()
        volume = future_cone_volume(spec, observer_at(spec), _small_cap(), 0)
        assert volume.value == 0.0

    @raises(ValueError)
    def negative_radius(self):
        spec = minkowski()
        future_cone_volume(spec, observer_at(spec), _small_cap(), -1.0)

    @raises(ValueError)
    def dimension_must_match(self):
        spec = minkowski(3)
        trace_rays(spec, observer_at(spec), _small_cap(), 1.0)

    def ball_in_minkowski(self):
        spec = minkowski()
        volume = ball_exp_volume(
            spec, observer_at(spec), 0.5, n_theta=4, n_u=8
        )
        cone = ConeSpec.ball(4, n_theta=4, n_u=8)
        assert volume.value == pytest.approx(
            cone.solid_angle * 0.5**4 / 4, rel=1e-10
        )

    def rays_leaving_the_chart_lower_coverage(self):
        # de Sitter's chart ends at t = 10
        spec = builtin("desitter")
        volume = future_cone_volume(spec, observer_at(spec), _small_cap(), 12)
        assert volume.coverage < 1.0
        assert sum(volume.truncated.values()) == 32

    def radial_integral_of_a_flat_ray(self):
        spec = minkowski()
        (profile,) = trace_rays(
            spec, observer_at(spec), ConeSpec.explicit([[1, 0, 0, 0]], 1), 2
        )
        assert profile.limit == 2.0
        assert profile.reason == ""
        assert profile.radial_integral(1.0) == pytest.approx(0.25)
        assert profile.radial_integral(5.0) == pytest.approx(4.0)
        assert profile.radial_integral(0.0) == 0.0


class ratio_curves:
    def are_flat_in_minkowski(self):
        spec = minkowski()
        curve = comparison_ratio_curve(
            spec, observer_at(spec), _small_cap(), [0.25, 0.5, 1.0], 0.0
        )
        np.testing.assert_allclose(curve.ratios, 1.0, rtol=1e-9)
        assert curve.violations == 0
        assert curve.volume_violations == 0
        assert curve.ricci_checked > 0
        assert curve.ricci_violations == 0
        assert curve.coverage == 1.0

    def decrease_in_de_sitter(self):
        spec = builtin("desitter", K=1.0)
        curve = comparison_ratio_curve(
            spec, observer_at(spec), _small_cap(), [0.25, 0.5, 1.0], 1.5
        )
        assert curve.violations == 0
        assert curve.ricci_violations == 0
        assert np.all(np.diff(curve.ratios) < 0)
        assert np.all(curve.ratios <= 1.0)

    def report_a_broken_ricci_hypothesis(self):
        spec = builtin("desitter", K=1.0)
        curve = comparison_ratio_curve(
            spec, observer_at(spec), _small_cap(), [0.5, 1.0], 0.5
        )
        assert curve.ricci_violations > 0

    def tables(self):
        spec = minkowski()
        curve = comparison_ratio_curve(
            spec, observer_at(spec), _small_cap(), [0.5, 1.0], 0.0
        )
        lines = curve.to_csv().splitlines()
        assert lines[0] == "r,vol_FC,vol_K2,ratio"
        assert len(lines) == 3
        plot = curve.plot_data().splitlines()
        assert plot[0] == "# r ratio"
        assert plot[1].split()[0] == "0.5"

    @raises(ValueError)
    def radii_must_increase(self):
        spec = minkowski()
        comparison_ratio_curve(
            spec, observer_at(spec), _small_cap(), [0.5, 0.25], 0.0
        )

    @raises(ValueError)
    def radii_must_be_positive(self):
        spec = minkowski()
        comparison_ratio_curve(
            spec, observer_at(spec), _small_cap(), [0.0, 0.5], 0.0
        )


class corollary_bound:
    def minkowski_cap(self):
        spec = minkowski()
        cone = _small_cap()
        full = cone.solid_angle / 4
        bound = corollary_volume_bound(
            spec, observer_at(spec), cone, 1.0, full / 2
        )
        assert not bound.vacuous
        assert bound.c_sigma == pytest.approx(math.pi / 16)
        assert bound.volume == pytest.approx(full)
        assert bound.value == pytest.approx(math.pi / 16 * full / 2)

    def is_vacuous_above_the_measured_volume(self):
        spec = minkowski()
        cone = _small_cap()
        bound = corollary_volume_bound(
            spec, observer_at(spec), cone, 1.0, cone.solid_angle
        )
        assert bound.vacuous
        assert bound.value == 0.0

    @raises(ValueError)
    def needs_a_cap(self):
        spec = minkowski()
        cone = ConeSpec.explicit([[1.0, 0.0, 0.0, 0.0]], 1.0)
        corollary_volume_bound(spec, observer_at(spec), cone, 1.0, 0.1)


class jacobian_checks:
    def agree_on_the_sphere(self):
        spec = builtin("static_sphere", K=1.0)
        obs = observer_at(spec, (0.0, 1.0, 0.0, 0.0))
        jacobi, differences = jacobian_volume_check(
            spec, obs, [0.2, 0.0, 0.9, 0.3]
        )
        assert jacobi == pytest.approx(differences, rel=1e-5)
        assert jacobi < 1.0

    def are_one_in_minkowski(self):
        spec = minkowski()
        jacobi, differences = jacobian_volume_check(
            spec, observer_at(spec), [0.5, 0.1, 0.2, 0.0]
        )
        assert jacobi == pytest.approx(1.0)
        assert differences == pytest.approx(1.0)
