"""
Constant chains behind the injectivity-radius lower bounds.

Nothing here integrates anything: these are closed-form evaluations of the
chains that turn measured `.AssumptionBounds` into radii. Every link is
recorded so reports can say which constraint was binding.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Any, Mapping

from .exceptions import BoundError
from .frames import AssumptionBounds, unit_ball_volume
from .jacobi import sandwich_constants
from .util import debug


@dataclass(frozen=True)
class BoundConstants:
    """
    Tunable constants of the bound evaluations.

    :param c_n: Dimension constant of the main volume bound.
    :param kappa: Scale of the surrogate slice injectivity radius ``i1``.
    :param eps: Slack in the slice comparability ``e^-eps <= h <= e^eps``.
    :param c_sigma_slope: Slope of ``c(Sigma)`` in the cap-to-cone gap.
    """

    c_n: float = 0.125
    kappa: float = 0.25
    eps: float = 0.1
    c_sigma_slope: float = 0.5

    def __post_init__(self) -> None:
        for name in ("c_n", "kappa", "eps", "c_sigma_slope"):
            if not getattr(self, name) > 0:
                raise ValueError("{} must be positive".format(name))

    @classmethod
    def from_config(cls, config: Mapping[str, Any]) -> "BoundConstants":
        section = config["bounds"]
        return cls(
            c_n=float(section["c_n"]),
            kappa=float(section["kappa"]),
            eps=float(section["eps"]),
            c_sigma_slope=float(section["c_sigma_slope"]),
        )


DEFAULT_CONSTANTS = BoundConstants()


def i1_surrogate(K2: float, v0: float, n: int, kappa: float = 0.25) -> float:
    """
    Stand-in for the slice injectivity radius under ``|Riem| <= K2`` and
    unit-ball volume ``>= v0``:
    ``kappa * min(1, v0 / omega_n) * min(1, 1 / sqrt(K2))``.
    """
    volume = min(1.0, v0 / unit_ball_volume(n))
    curvature = 1.0 if K2 <= 1.0 else 1.0 / math.sqrt(K2)
    return kappa * volume * curvature


@dataclass(frozen=True)
class BoundChain:
    """
    Every link of the foliated injectivity bound; ``i0 = r3``.

    ``binding`` names the constraint that fixed ``r2``.
    """

    i1: float
    K: float
    i2: float
    c1: float
    c2: float
    r2: float
    r3: float
    c3: float
    c4: float
    c5: float
    binding: str
    bounds: AssumptionBounds = field(repr=False)

    @property
    def i0(self) -> float:
        return self.r3

    def links(self) -> dict[str, float]:
        return {
            "i1": self.i1,
            "K": self.K,
            "i2": self.i2,
            "c1": self.c1,
            "c2": self.c2,
            "r2": self.r2,
            "r3": self.r3,
            "c3": self.c3,
            "c4": self.c4,
            "c5": self.c5,
        }


def _positive(link: str, value: float) -> float:
    if not (value > 0 and math.isfinite(value)):
        raise BoundError(link, value)
    return value


def _window_cap(K2: float, K3: float, threshold: float = 0.5) -> float:
    """
    Largest ``s`` with ``2 K2 / K3 (e^{4 K3 s} - 1) <= threshold``.
    """
    if K2 <= 0:
        return math.inf
    if K3 <= 0:
        return threshold / (8.0 * K2)
    return math.log1p(threshold * K3 / (2.0 * K2)) / (4.0 * K3)


def theorem_foliated_bound(
    bounds: AssumptionBounds,
    eps: float = 0.1,
    n: int = 3,
    kappa: float = 0.25,
) -> BoundChain:
    """
    Evaluate the foliated injectivity chain for measured ``bounds`` on an
    ``n + 1`` dimensional spacetime.

    The slice metric drifts at rate ``K = e^{K0} K1`` in ``t``; ``i2`` is
    ``i1`` cut down so ``e^-eps - K i2 >= e^-eps / 2``; ``c1`` brackets the
    slice metric on that range and ``c2 = max(c1, 2 K0)`` the reference
    metric. ``r2 = i2 e^-c2 / 2`` is further capped by the Jacobi-field
    smallness conditions, and ``r3 = r2 e^-c2 / 4``.

    :raises: `.BoundError` naming the first non-positive link.
    """
    i1 = _positive("i1", i1_surrogate(bounds.K2, bounds.v0, n, kappa))
    K = math.exp(bounds.K0) * bounds.K1
    i2 = i1
    if K > 0:
        i2 = min(i1, math.exp(-eps) / (2.0 * K))
    _positive("i2", math.exp(-eps) - K * i2)
    c1 = max(
        -math.log(math.exp(-eps) - K * i2),
        math.log(math.exp(eps) + K * i2),
    )
    c2 = max(c1, 2.0 * bounds.K0)
    candidates = {
        "geodesic window": i2 * math.exp(-c2) / 2.0,
        "jacobi growth": 1.0 / (2.0 + 2.0 * bounds.K3),
        "jacobi smallness": _window_cap(bounds.K2, bounds.K3),
    }
    binding = min(candidates, key=lambda name: candidates[name])
    r2 = _positive("r2", candidates[binding])
    r3 = _positive("r3", r2 * math.exp(-c2) / 4.0)
    sandwich = sandwich_constants(bounds, r2, eps)
    chain = BoundChain(
        i1=i1,
        K=K,
        i2=i2,
        c1=c1,
        c2=c2,
        r2=r2,
        r3=r3,
        c3=sandwich.c3,
        c4=sandwich.c4,
        c5=sandwich.c5,
        binding=binding,
        bounds=bounds,
    )
    debug("Foliated bound chain %s (binding: %s)", chain.links(), binding)
    return chain


def c_sigma(gap: float, slope: float = 0.5) -> float:
    """
    ``c(Sigma)`` as a function of the ``g_T`` angular gap between the
    direction cap and the null cone; zero once the cap touches the cone.
    """
    return slope * max(gap, 0.0)


def cap_gap(half_angle: float) -> float:
    """
    Gap between a cap of ``half_angle`` about ``T`` and the null cone, which
    sits at ``pi / 4`` from ``T`` in observer-frame components.
    """
    return math.pi / 4.0 - half_angle
