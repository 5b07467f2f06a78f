import math

import numpy as np
import pytest
from pytest_relaxed import raises

from lightcone.lattices import (
    ball_points,
    ball_volume,
    cap_quadrature,
    cap_solid_angle,
    directions,
    sphere_area,
    sphere_points,
)


class spheres:
    def areas(self):
        assert sphere_area(2) == pytest.approx(2 * math.pi)
        assert sphere_area(3) == pytest.approx(4 * math.pi)
        assert sphere_area(4) == pytest.approx(2 * math.pi**2)
        assert ball_volume(3) == pytest.approx(4 * math.pi / 3)

    def points_are_unit_and_deterministic(self):
        for dim in (2, 3, 4, 5):
            points = sphere_points(dim, 20)
            assert points.shape == (20, dim)
            np.testing.assert_allclose(np.linalg.norm(points, axis=1), 1.0)
            np.testing.assert_array_equal(points, sphere_points(dim, 20))

    def points_are_spread_out(self):
        points = sphere_points(3, 200)
        assert np.linalg.norm(points.mean(axis=0)) < 0.05

    def one_dimension_has_two_points(self):
        np.testing.assert_array_equal(sphere_points(1, 7), [[1.0], [-1.0]])

    @raises(ValueError)
    def need_a_direction(self):
        sphere_points(3, 0)


class direction_sets:
    def spatial_directions_are_orthogonal_to_T(self):
        dirs = directions("spatial", 4, 10)
        np.testing.assert_array_equal(dirs[:, 0], 0.0)
        np.testing.assert_allclose(np.linalg.norm(dirs, axis=1), 1.0)

    def null_directions_point_to_the_past(self):
        dirs = directions("null", 4, 10)
        np.testing.assert_allclose(dirs[:, 0], -1 / math.sqrt(2))
        norm2 = -dirs[:, 0] ** 2 + np.sum(dirs[:, 1:] ** 2, axis=1)
        np.testing.assert_allclose(norm2, 0.0, atol=1e-15)

    def timelike_directions_are_inside_the_cone(self):
        dirs = directions("timelike", 4, 10)
        assert np.all(dirs[:, 0] > np.linalg.norm(dirs[:, 1:], axis=1))

    @raises(ValueError)
    def unknown_kind(self):
        directions("spacelike", 4, 10)


class caps:
    def weights_sum_to_the_cap_area(self):
        _, weights = cap_quadrature(4, math.pi / 8, 8, 16)
        assert weights.sum() == pytest.approx(
            cap_solid_angle(4, math.pi / 8), rel=1e-10
        )

    def full_cap_is_the_sphere(self):
        assert cap_solid_angle(3, math.pi) == pytest.approx(4 * math.pi)

    def directions_stay_in_the_cap(self):
        dirs, _ = cap_quadrature(3, 0.3, 4, 8, axis=-1.0)
        assert np.all(dirs[:, 0] <= -math.cos(0.3))

    @raises(ValueError)
    def half_angle_range(self):
        cap_quadrature(4, 4.0, 4, 4)

    def ball_grids(self):
        dirs, radii = ball_points(3, 2.0, 10, 4)
        assert dirs.shape == (10, 3)
        np.testing.assert_allclose(radii, [0.5, 1.0, 1.5, 2.0])
