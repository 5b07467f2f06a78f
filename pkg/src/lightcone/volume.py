"""
Cone and ball volumes through the exponential map, and their comparison
with constant-curvature model volumes.

A volume is ``int_Sigma int_0^r phi(s; w) s^n ds dw`` over a direction set
``Sigma`` of ``g_T`` unit vectors: directions come with quadrature weights
(`ConeSpec`), the radial integral is Gauss-Legendre on the dense output of
each ray. ``g`` and ``g_T`` share their volume form, so no extra factor is
needed. Rays are cut at their first conjugate point and where they stop
(chart exit, step failure); volumes count multiplicity past cut points.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np
from scipy.integrate import quad

from .bounds import DEFAULT_CONSTANTS, BoundConstants, c_sigma, cap_gap
from .config import DEFAULT_TOLERANCES, Tolerances
from .frames import Observer, complete_frame
from .geodesic import GeodesicSolution, exp_map, exp_with_jacobian, ray_fan
from .jacobi import first_degeneracy, phi_from_fields
from .lattices import cap_quadrature, cap_solid_angle, sphere_area
from .spacetime import MetricSpec, connection_and_curvature, ricci_from
from .util import debug

ORIENTATIONS = ("future", "past")
#: Causal tolerance when checking that directions are timelike.
CAUSAL_TOL = 1e-12
#: Multiplicity convention of every volume computed here.
CONVENTION = "multiplicity"


@dataclass(frozen=True)
class ConeSpec:
    """
    A direction set ``Sigma`` on the unit ``g_T`` sphere with quadrature
    weights summing to its solid angle ``|Sigma|``.

    Build with `cap` (a polar cap about ``+-T``), `ball` (the whole sphere)
    or `explicit`.
    """

    directions: np.ndarray
    weights: np.ndarray
    orientation: str = "future"
    kind: str = "timelike"
    half_angle: Optional[float] = None

    def __post_init__(self) -> None:
        if self.orientation not in ORIENTATIONS:
            raise ValueError(
                "orientation must be one of {}".format(ORIENTATIONS)
            )
        if len(self.directions) != len(self.weights):
            raise ValueError("one weight per direction")
        if self.kind == "ball":
            return
        d = self.directions
        norm2 = -d[:, 0] ** 2 + np.sum(d[:, 1:] ** 2, axis=1)
        sign = 1.0 if self.orientation == "future" else -1.0
        if self.kind == "timelike":
            ok = (norm2 <= CAUSAL_TOL) & (sign * d[:, 0] > 0)
        elif self.kind == "null":
            ok = (np.abs(norm2) <= 1e-9) & (sign * d[:, 0] > 0)
        else:
            raise ValueError("unknown cone kind {!r}".format(self.kind))
        if not np.all(ok):
            raise ValueError(
                "{} of {} directions are not {} {}".format(
                    int(np.sum(~ok)),
                    len(d),
                    self.orientation,
                    self.kind,
                )
            )

    @property
    def dim(self) -> int:
        return self.directions.shape[1]

    @property
    def solid_angle(self) -> float:
        return float(np.sum(self.weights))

    @classmethod
    def cap(
        cls,
        dim: int,
        half_angle: float,
        orientation: str = "future",
        n_theta: int = 8,
        n_u: int = 32,
    ) -> "ConeSpec":
        """
        Cap of ``g_T`` half-angle ``half_angle <= pi/4`` about ``+T``
        (future) or ``-T`` (past); ``pi/4`` is the full causal cone.
        """
        if not 0 < half_angle <= math.pi / 4 + 1e-15:
            raise ValueError("a timelike cap needs 0 < half_angle <= pi/4")
        axis = 1.0 if orientation == "future" else -1.0
        dirs, weights = cap_quadrature(dim, half_angle, n_theta, n_u, axis)
        # Scale weights to the exact cap area.
        weights = weights * cap_solid_angle(dim, half_angle) / weights.sum()
        return cls(dirs, weights, orientation, "timelike", half_angle)

    @classmethod
    def ball(cls, dim: int, n_theta: int = 8, n_u: int = 32) -> "ConeSpec":
        """
        The whole unit sphere, for volumes of ``exp(B_T(0, r))``.
        """
        dirs, weights = cap_quadrature(dim, math.pi, n_theta, n_u)
        return cls(dirs, weights, "future", "ball", math.pi)

    @classmethod
    def explicit(
        cls,
        directions: Sequence[Sequence[float]],
        solid_angle: float,
        orientation: str = "future",
        kind: str = "timelike",
    ) -> "ConeSpec":
        """
        Explicit directions (normalized here) sharing ``solid_angle``
        equally.
        """
        dirs = np.asarray(directions, dtype=float)
        dirs = dirs / np.linalg.norm(dirs, axis=1)[:, None]
        weights = np.full(len(dirs), solid_angle / len(dirs))
        return cls(dirs, weights, orientation, kind)

    def sections(self) -> dict[str, object]:
        return {
            "orientation": self.orientation,
            "kind": self.kind,
            "half_angle": self.half_angle,
            "directions": len(self.directions),
            "solid_angle": self.solid_angle,
        }


@dataclass
class RayProfile:
    """
    One quadrature ray: where it is cut and why.
    """

    direction: np.ndarray
    weight: float
    geodesic: GeodesicSolution = field(repr=False)
    limit: float
    reason: str

    def radial_integral(self, r: float, nodes: int = 16) -> float:
        """
        ``int_0^min(r, limit) phi(s) s^n ds`` by Gauss-Legendre.
        """
        rho = min(r, self.limit)
        if rho <= 0:
            return 0.0
        x, w = np.polynomial.legendre.leggauss(nodes)
        s = 0.5 * rho * (x + 1.0)
        n = len(self.direction) - 1
        total = 0.0
        for node, weight in zip(s, w):
            A = self.geodesic.at(node)["A"]
            total += weight * phi_from_fields(A, node) * node**n
        return 0.5 * rho * total


def trace_rays(
    spec: MetricSpec,
    obs: Observer,
    cone: ConeSpec,
    r: float,
    tol: Tolerances = DEFAULT_TOLERANCES,
    workers: int = 1,
    truncate: bool = True,
) -> list[RayProfile]:
    """
    Integrate every ray of ``cone`` to radius ``r`` with the full Jacobi
    matrix and find where each one is cut.
    """
    if cone.dim != spec.dim:
        raise ValueError("cone directions do not match the spacetime")
    rays = ray_fan(spec, obs, cone.directions, r, tol, workers, jacobi=True)
    profiles = []
    for u, w, geo in zip(cone.directions, cone.weights, rays):
        limit, reason = geo.s_end, "" if geo.ok else geo.termination
        if truncate:
            found = first_degeneracy(geo, None, tol)
            if found.s is not None and found.s < limit:
                limit, reason = found.s, "conjugate"
        profiles.append(RayProfile(u, float(w), geo, limit, reason))
    return profiles


@dataclass
class ConeVolume:
    value: float
    radius: float
    coverage: float
    truncated: dict[str, int]
    convention: str = CONVENTION


def _coverage(profiles: list[RayProfile], r: float) -> float:
    total = sum(p.weight for p in profiles)
    reached = sum(
        p.weight
        for p in profiles
        if p.limit >= r * (1 - 1e-12) or p.reason == "conjugate"
    )
    return reached / total if total else 0.0


def _volume(
    profiles: list[RayProfile], r: float, nodes: int
) -> ConeVolume:
    value = sum(p.weight * p.radial_integral(r, nodes) for p in profiles)
    truncated: dict[str, int] = {}
    for p in profiles:
        if p.reason and p.limit < r:
            truncated[p.reason] = truncated.get(p.reason, 0) + 1
    return ConeVolume(
        value=float(value),
        radius=r,
        coverage=_coverage(profiles, r),
        truncated=truncated,
    )


def future_cone_volume(
    spec: MetricSpec,
    obs: Observer,
    cone: ConeSpec,
    r: float,
    nodes: int = 16,
    tol: Tolerances = DEFAULT_TOLERANCES,
    workers: int = 1,
) -> ConeVolume:
    """
    Volume of ``exp`` of the cone ``{s w : w in Sigma, 0 <= s <= r}``.

    Works for past cones and the whole ball alike. Rays that stop early
    contribute up to where they stopped and lower ``coverage``.
    """
    if r < 0:
        raise ValueError("radius must not be negative")
    if r == 0:
        return ConeVolume(0.0, 0.0, 1.0, {})
    profiles = trace_rays(spec, obs, cone, r, tol, workers)
    volume = _volume(profiles, r, nodes)
    debug(
        "Cone volume at r=%.4g: %.8g (coverage %.3f)",
        r,
        volume.value,
        volume.coverage,
    )
    return volume


def ball_exp_volume(
    spec: MetricSpec,
    obs: Observer,
    r: float,
    nodes: int = 16,
    n_theta: int = 8,
    n_u: int = 32,
    tol: Tolerances = DEFAULT_TOLERANCES,
    workers: int = 1,
) -> ConeVolume:
    """
    ``vol_g(exp(B_T(0, r)))`` counted with multiplicity.
    """
    cone = ConeSpec.ball(spec.dim, n_theta, n_u)
    return future_cone_volume(spec, obs, cone, r, nodes, tol, workers)


def _sn(K2: float, s: float) -> float:
    if K2 == 0:
        return s
    root = math.sqrt(K2)
    return math.sinh(root * s) / root


def model_volume(
    K2: float, r: float, n: int, solid_angle: Optional[float] = None
) -> float:
    """
    ``int_0^r sn_K2(s)^n ds`` times ``solid_angle`` (default the whole
    ``S^n``), with ``sn_K2(s) = sinh(sqrt(K2) s) / sqrt(K2)`` and
    ``sn_0(s) = s``.
    """
    if K2 < 0:
        raise ValueError("model curvature K2 must be >= 0")
    if r < 0:
        raise ValueError("radius must not be negative")
    angle = sphere_area(n + 1) if solid_angle is None else solid_angle
    if K2 == 0:
        return angle * r ** (n + 1) / (n + 1)
    radial, _ = quad(
        lambda s: _sn(K2, s) ** n, 0.0, r, epsabs=1e-14, epsrel=1e-13
    )
    return angle * radial


@dataclass
class VolumeCurve:
    """
    Cone volumes against model volumes over increasing radii.

    ``violations`` counts radii where the ratio grew by more than
    ``tolerance`` (relative); ``ricci_violations`` counts sampled points
    where ``Ric(g', g') >= -n K2 |g(g', g')|`` failed.
    """

    radii: np.ndarray
    volumes: np.ndarray
    model: np.ndarray
    K2: float
    tolerance: float
    coverage: float
    ricci_checked: int = 0
    ricci_violations: int = 0

    @property
    def ratios(self) -> np.ndarray:
        with np.errstate(divide="ignore", invalid="ignore"):
            return np.where(self.model > 0, self.volumes / self.model, np.nan)

    @property
    def violations(self) -> int:
        r = self.ratios
        grew = r[1:] > r[:-1] * (1 + self.tolerance) + self.tolerance
        return int(np.sum(grew))

    @property
    def volume_violations(self) -> int:
        """
        Radii where the cone volume itself decreased.
        """
        v = self.volumes
        return int(np.sum(v[1:] < v[:-1] * (1 - self.tolerance)))

    def rows(self) -> list[tuple[float, float, float, float]]:
        return list(zip(self.radii, self.volumes, self.model, self.ratios))

    def to_csv(self) -> str:
        out = io.StringIO()
        writer = csv.writer(out, lineterminator="\n")
        writer.writerow(["r", "vol_FC", "vol_K2", "ratio"])
        for row in self.rows():
            writer.writerow(["{:.12g}".format(v) for v in row])
        return out.getvalue()

    def plot_data(self) -> str:
        lines = ["# r ratio"]
        lines += [
            "{:.12g} {:.12g}".format(r, q)
            for r, q in zip(self.radii, self.ratios)
        ]
        return "\n".join(lines) + "\n"


def _ricci_samples(
    spec: MetricSpec,
    profiles: list[RayProfile],
    K2: float,
    per_ray: int = 4,
) -> tuple[int, int]:
    n = spec.n
    checked = violations = 0
    for p in profiles:
        if p.limit <= 0:
            continue
        for s in np.linspace(0.0, p.limit, per_ray + 1)[1:]:
            part = p.geodesic.at(s)
            x, v = part["x"], part["v"]
            try:
                _, riem = connection_and_curvature(spec, x)
            except (ValueError, ArithmeticError):
                continue
            g = spec.metric(x[None, :])[0]
            ric = ricci_from(g, riem)
            lhs = float(v @ ric @ v)
            rhs = -n * K2 * abs(float(v @ g @ v))
            checked += 1
            if lhs < rhs - 1e-6 * max(1.0, abs(rhs)):
                violations += 1
    return checked, violations


def comparison_ratio_curve(
    spec: MetricSpec,
    obs: Observer,
    cone: ConeSpec,
    radii: Sequence[float],
    K2: float,
    nodes: int = 16,
    tolerance: float = 1e-6,
    tol: Tolerances = DEFAULT_TOLERANCES,
    workers: int = 1,
) -> VolumeCurve:
    """
    ``vol(FC_Sigma(p, r)) / vol_K2(B(r))`` at each radius, with the model
    solid angle matched to ``|Sigma|`` so ratios tend to 1 as ``r -> 0``.

    Rays are traced once to the largest radius. The Ricci hypothesis is
    sampled along them and reported, never enforced.
    """
    radii = np.asarray(radii, dtype=float)
    if len(radii) == 0 or np.any(np.diff(radii) <= 0) or radii[0] <= 0:
        raise ValueError("radii must be positive and strictly increasing")
    profiles = trace_rays(spec, obs, cone, float(radii[-1]), tol, workers)
    volumes = np.array([_volume(profiles, r, nodes).value for r in radii])
    model = np.array(
        [model_volume(K2, r, spec.n, cone.solid_angle) for r in radii]
    )
    checked, bad = _ricci_samples(spec, profiles, K2)
    curve = VolumeCurve(
        radii=radii,
        volumes=volumes,
        model=model,
        K2=K2,
        tolerance=tolerance,
        coverage=_coverage(profiles, float(radii[-1])),
        ricci_checked=checked,
        ricci_violations=bad,
    )
    debug(
        "Ratio curve: %d monotonicity violations, %d/%d Ricci violations",
        curve.violations,
        bad,
        checked,
    )
    return curve


@dataclass
class CorollaryBound:
    value: float
    volume: float
    v0: float
    c_sigma: float
    vacuous: bool


def corollary_volume_bound(
    spec: MetricSpec,
    obs: Observer,
    cone: ConeSpec,
    r0: float,
    v0: float,
    constants: BoundConstants = DEFAULT_CONSTANTS,
    tol: Tolerances = DEFAULT_TOLERANCES,
    workers: int = 1,
) -> CorollaryBound:
    """
    Injectivity lower bound ``c(Sigma) v0 / r0^(n+1) * r0`` from a future
    cone of volume at least ``v0``.

    ``c(Sigma)`` is `.bounds.c_sigma` of the cap's gap to the null cone.
    If the measured cone volume is below ``v0`` the bound is vacuous and
    its value 0.
    """
    if cone.half_angle is None:
        raise ValueError("the volume bound needs a cap direction set")
    if r0 <= 0:
        raise ValueError("r0 must be positive")
    c = c_sigma(cap_gap(cone.half_angle), constants.c_sigma_slope)
    volume = future_cone_volume(spec, obs, cone, r0, tol=tol, workers=workers)
    vacuous = volume.value < v0
    value = 0.0 if vacuous else c * v0 / r0 ** (spec.dim) * r0
    return CorollaryBound(
        value=value,
        volume=volume.value,
        v0=v0,
        c_sigma=c,
        vacuous=vacuous,
    )


def jacobian_volume_check(
    spec: MetricSpec,
    obs: Observer,
    y: Sequence[float],
    step: float = 1e-4,
    tol: Tolerances = DEFAULT_TOLERANCES,
) -> tuple[float, float]:
    """
    ``phi`` at frame vector ``y`` two ways: from the Jacobi determinant and
    from central differences of ``exp`` (``|det D| sqrt|det g|`` at the
    image point).

    :returns: ``(from_jacobi, from_differences)``.
    """
    E = complete_frame(spec, obs).vectors
    y = np.asarray(y, dtype=float)
    x, D, _ = exp_with_jacobian(spec, obs.point, E, y, tol)
    g = spec.metric(x[None, :])[0]
    from_jacobi = abs(float(np.linalg.det(D))) * math.sqrt(
        abs(float(np.linalg.det(g)))
    )
    columns = []
    for k in range(len(y)):
        dy = np.zeros_like(y)
        dy[k] = step
        plus = exp_map(spec, obs, y + dy, tol, frame=E)
        minus = exp_map(spec, obs, y - dy, tol, frame=E)
        columns.append((plus - minus) / (2 * step))
    D_fd = np.column_stack(columns)
    from_differences = abs(float(np.linalg.det(D_fd))) * math.sqrt(
        abs(float(np.linalg.det(g)))
    )
    return from_jacobi, from_differences

