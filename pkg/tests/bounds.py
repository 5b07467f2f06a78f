import math

import pytest
from pytest_relaxed import raises

from lightcone.bounds import (
    BoundConstants,
    c_sigma,
    cap_gap,
    i1_surrogate,
    theorem_foliated_bound,
)
from lightcone.config import LightconeConfig
from lightcone.exceptions import BoundError
from lightcone.frames import AssumptionBounds, unit_ball_volume


def _flat(v0=None, **overrides):
    values = dict(K0=0.0, K1=0.0, K2=0.0, r0=1.0)
    values["v0"] = unit_ball_volume(3) if v0 is None else v0
    values.update(overrides)
    return AssumptionBounds(**values)


class constants:
    def defaults(self):
        c = BoundConstants()
        assert (c.c_n, c.kappa, c.eps, c.c_sigma_slope) == (
            0.125,
            0.25,
            0.1,
            0.5,
        )

    def from_config(self):
        config = LightconeConfig(overrides={"bounds": {"kappa": 0.5}})
        c = BoundConstants.from_config(config)
        assert c.kappa == 0.5
        assert c.c_n == 0.125

    @raises(ValueError)
    def must_be_positive(self):
        BoundConstants(eps=0.0)


class i1_surrogate_:
    def saturates_at_kappa(self):
        assert i1_surrogate(0.0, unit_ball_volume(3), 3) == 0.25
        assert i1_surrogate(1.0, 10.0, 3, kappa=0.5) == 0.5

    def shrinks_with_volume_and_curvature(self):
        half = unit_ball_volume(3) / 2
        assert i1_surrogate(0.0, half, 3) == pytest.approx(0.125)
        assert i1_surrogate(4.0, unit_ball_volume(3), 3) == pytest.approx(
            0.125
        )


class foliated_chain:
    def minkowski_numbers(self):
        chain = theorem_foliated_bound(_flat())
        assert chain.i1 == 0.25
        assert chain.K == 0.0
        assert chain.i2 == 0.25
        assert chain.c1 == pytest.approx(0.1)
        assert chain.c2 == pytest.approx(0.1)
        assert chain.binding == "geodesic window"
        assert chain.r2 == pytest.approx(0.25 * math.exp(-0.1) / 2)
        assert chain.i0 == chain.r3
        assert chain.r3 == pytest.approx(chain.r2 * math.exp(-0.1) / 4)
        assert set(chain.links()) == {
            "i1",
            "K",
            "i2",
            "c1",
            "c2",
            "r2",
            "r3",
            "c3",
            "c4",
            "c5",
        }

    def drift_cuts_the_time_range(self):
        chain = theorem_foliated_bound(_flat(K1=10.0))
        assert chain.K == 10.0
        assert chain.i2 == pytest.approx(math.exp(-0.1) / 20.0)
        assert chain.c1 == pytest.approx(0.1 + math.log(2.0))

    def lapse_variation_enters_c2(self):
        chain = theorem_foliated_bound(_flat(K0=1.0))
        assert chain.c2 == pytest.approx(2.0)

    def curvature_can_bind(self):
        chain = theorem_foliated_bound(_flat(K2=1000.0))
        assert chain.binding == "jacobi smallness"
        assert chain.r2 == pytest.approx(0.5 / 8000.0)

    def connection_bound_can_bind(self):
        chain = theorem_foliated_bound(_flat(K3=100.0))
        assert chain.binding == "jacobi growth"
        assert chain.r2 == pytest.approx(1.0 / 202.0)

    def shrinks_as_curvature_grows(self):
        values = [
            theorem_foliated_bound(_flat(K2=K2)).i0 for K2 in (0.0, 10.0, 1e3)
        ]
        assert values == sorted(values, reverse=True)

    def zero_volume_names_the_link(self):
        with pytest.raises(BoundError) as info:
            theorem_foliated_bound(_flat(v0=0.0))
        assert info.value.link == "i1"


class cone_constants:
    def gap_to_the_null_cone(self):
        assert cap_gap(math.pi / 8) == pytest.approx(math.pi / 8)
        assert cap_gap(math.pi / 4) == 0.0

    def c_sigma_is_linear_and_clipped(self):
        assert c_sigma(0.2) == pytest.approx(0.1)
        assert c_sigma(0.2, slope=2.0) == pytest.approx(0.4)
        assert c_sigma(-1.0) == 0.0
