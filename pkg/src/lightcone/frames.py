"""
Observers, orthonormal frames and the reference Riemannian metric.

An observer ``(p, T)`` fixes the positive definite metric
``g_T = g + 2 T_flat (x) T_flat``; every norm and radius in lightcone is
measured with it. Frames are ``(N, N)`` arrays whose columns are the vectors
``E_0 = T, E_1 .. E_n`` in chart components.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np
from scipy.special import gamma as gamma_fn

from .differences import jet_from_values, stencil
from .exceptions import FrameError, SpecError
from .lattices import ball_points
from .spacetime import (
    MetricSpec,
    Point,
    christoffel_from_jet,
    connection_and_curvature,
    lie_derivative_T,
    metric_array,
    probe_points,
)
from .util import debug

#: Gram-Schmidt drops candidates whose residual norm falls below this.
PIVOT_TOL = 1e-8


def eta(dim: int) -> np.ndarray:
    return np.diag([-1.0] + [1.0] * (dim - 1))


@dataclass(frozen=True)
class Observer:
    """
    A base point and a future-pointing unit timelike vector there.
    """

    point: np.ndarray
    T: np.ndarray

    @property
    def dim(self) -> int:
        return len(self.point)


@dataclass(frozen=True)
class OrthoFrame:
    point: np.ndarray
    vectors: np.ndarray

    def residual(self, g: np.ndarray) -> float:
        """
        ``max |g(E_a, E_b) - eta_ab|``.
        """
        gram = self.vectors.T @ g @ self.vectors
        return float(np.max(np.abs(gram - eta(len(g)))))


@dataclass(frozen=True)
class ReferenceMetricAt:
    gT: np.ndarray
    point: np.ndarray


@dataclass(frozen=True)
class AssumptionBounds:
    """
    Geometric bounds on a region: ``K0 >= sup|log n|``,
    ``K1 >= sup|L_T g|_T``, ``K2 >= sup|Riem|_T``, ``v0`` a lower bound on
    slice unit-ball volume and ``r0`` the radius of the region.

    ``K3`` defaults to ``exp(2 K0) K1^2``.
    """

    K0: float
    K1: float
    K2: float
    v0: float
    r0: float
    K3: float = field(default=float("nan"))

    def __post_init__(self) -> None:
        for name in ("K0", "K1", "K2", "v0", "r0"):
            value = getattr(self, name)
            if not (value >= 0 and math.isfinite(value)):
                raise ValueError("{} must be finite and >= 0".format(name))
        if math.isnan(self.K3):
            object.__setattr__(
                self, "K3", math.exp(2.0 * self.K0) * self.K1**2
            )

    def as_dict(self) -> dict[str, float]:
        return {
            "K0": self.K0,
            "K1": self.K1,
            "K2": self.K2,
            "K3": self.K3,
            "v0": self.v0,
            "r0": self.r0,
        }


def inner(g: np.ndarray, u: np.ndarray, v: np.ndarray) -> float:
    return float(u @ g @ v)


def normal_vector(g: np.ndarray) -> np.ndarray:
    """
    Future unit normal to the level sets of ``t`` for metric ``g``.

    :raises: `.FrameError` if ``t`` is not a time function at this point.
    """
    ginv = np.linalg.inv(g)
    if not ginv[0, 0] < 0:
        raise FrameError("the slices t = const are not spacelike here")
    return -ginv[:, 0] / math.sqrt(-ginv[0, 0])


def normalize_timelike(g: np.ndarray, T: np.ndarray) -> np.ndarray:
    """
    Scale ``T`` to unit length and orient it to the future (``T^0 > 0``).
    """
    T = np.asarray(T, dtype=float)
    norm2 = inner(g, T, T)
    if not norm2 < 0:
        raise FrameError(
            "observer vector {} is not timelike (g(T, T) = {!r})".format(
                tuple(T), norm2
            )
        )
    T = T / math.sqrt(-norm2)
    return -T if T[0] < 0 else T


def observer(
    spec: MetricSpec, point: Point, T: Optional[Sequence[float]] = None
) -> Observer:
    """
    Build an observer at ``point``.

    With ``T=None`` the observer is the unit normal of the ``t`` slices (for
    a foliated metric, ``n^-1 d_t``). A given ``T`` is normalized and flipped
    to the future if needed.
    """
    x = np.asarray(point, dtype=float).reshape(-1)
    if len(x) != spec.dim:
        raise SpecError(
            "dimension mismatch: point has {} coordinates, spec {}".format(
                len(x), spec.dim
            )
        )
    g = metric_array(spec, x)
    vec = normal_vector(g) if T is None else normalize_timelike(g, T)
    if len(vec) != spec.dim:
        raise SpecError("observer vector has the wrong dimension")
    return Observer(point=x, T=vec)


def frame_for(g: np.ndarray, T: np.ndarray) -> np.ndarray:
    """
    Gram-Schmidt completion of ``T`` against the chart basis.

    Two orthogonalization passes; candidates whose residual norm is below
    `PIVOT_TOL` are skipped. Returns an ``(N, N)`` array of column vectors.
    """
    dim = len(g)
    signs = [-1.0]
    vectors = [np.asarray(T, dtype=float)]
    for axis in range(dim):
        if len(vectors) == dim:
            break
        w = np.zeros(dim)
        w[axis] = 1.0
        for _ in range(2):
            for sign, e in zip(signs, vectors):
                w = w - sign * inner(g, w, e) * e
        norm2 = inner(g, w, w)
        size = math.sqrt(abs(norm2))
        if size < PIVOT_TOL:
            continue
        if norm2 < 0:
            raise FrameError("metric has more than one timelike direction")
        vectors.append(w / size)
        signs.append(1.0)
    if len(vectors) != dim:
        raise FrameError("degenerate metric: frame could not be completed")
    return np.column_stack(vectors)


def complete_frame(spec: MetricSpec, obs: Observer) -> OrthoFrame:
    """
    Orthonormal frame at the observer's point with ``E_0 = T``.

    :raises: `.FrameError` if ``T`` is not timelike or the metric is
        degenerate.
    """
    g = metric_array(spec, obs.point)
    normalize_timelike(g, obs.T)
    return OrthoFrame(point=obs.point, vectors=frame_for(g, obs.T))


def reference_metric(g: np.ndarray, T: np.ndarray) -> np.ndarray:
    flat = g @ T
    return g + 2.0 * np.outer(flat, flat)


def reference_metric_at(spec: MetricSpec, obs: Observer) -> ReferenceMetricAt:
    """
    ``g_T = g + 2 T_flat (x) T_flat`` at the observer's point.
    """
    g = metric_array(spec, obs.point)
    normalize_timelike(g, obs.T)
    return ReferenceMetricAt(gT=reference_metric(g, obs.T), point=obs.point)


def frame_norm(
    tensor: np.ndarray, frame: np.ndarray, variance: str = ""
) -> float:
    """
    ``g_T`` norm of ``tensor`` given the frame of ``T``.

    ``variance`` has one letter per slot: ``u`` for an upper (contravariant)
    index, ``l`` for a lower one; it defaults to all lower.
    """
    tensor = np.asarray(tensor, dtype=float)
    rank = tensor.ndim
    variance = variance or "l" * rank
    dim = len(frame)
    if len(variance) != rank or set(variance) - {"u", "l"}:
        raise ValueError(
            "variance {!r} does not describe a rank-{} tensor".format(
                variance, rank
            )
        )
    if any(size != dim for size in tensor.shape):
        raise ValueError(
            "tensor shape {} does not match dimension {}".format(
                tensor.shape, dim
            )
        )
    inverse = np.linalg.inv(frame)
    out = tensor
    for slot, kind in enumerate(variance):
        matrix = frame if kind == "l" else inverse.T
        out = np.tensordot(out, matrix, axes=([slot], [0]))
        out = np.moveaxis(out, -1, slot)
    return float(np.sqrt(np.sum(out * out)))


def tensor_norm_T(
    tensor: np.ndarray, obs: Observer, spec: MetricSpec, variance: str = ""
) -> float:
    """
    Norm of a tensor at the observer's point in the reference metric.

    :param variance: One letter per slot, ``u`` (upper) or ``l`` (lower).
    :raises: ``ValueError`` on rank or dimension mismatch.
    """
    tensor = np.asarray(tensor, dtype=float)
    if tensor.ndim and tensor.shape[0] != spec.dim:
        raise ValueError(
            "tensor of shape {} at a {}-dimensional point".format(
                tensor.shape, spec.dim
            )
        )
    if tensor.ndim == 0:
        return abs(float(tensor))
    return frame_norm(tensor, complete_frame(spec, obs).vectors, variance)


@dataclass(frozen=True)
class GapRow:
    point: np.ndarray
    lhs: float
    rhs_quadratic: float
    linear: float


@dataclass
class ConnectionGapReport:
    """
    Both sides of the connection comparison at each probe point.

    ``lhs = |Gamma_gT - Gamma_g|_T``, ``rhs_quadratic = n^2 |L_T g|_T^2``,
    ``linear = sqrt(2) |L_T g|_T``; ``bound = exp(2 K0) K1^2`` with ``K0``,
    ``K1`` the maxima over the probe set.
    """

    rows: list[GapRow]
    K0: float
    K1: float

    @property
    def bound(self) -> float:
        return math.exp(2.0 * self.K0) * self.K1**2

    @property
    def lhs(self) -> float:
        return max((r.lhs for r in self.rows), default=0.0)

    @property
    def holds(self) -> bool:
        return self.lhs <= self.bound * (1 + 1e-9) + 1e-12

    @property
    def linear_holds(self) -> bool:
        return all(r.lhs <= r.linear * (1 + 1e-6) + 1e-9 for r in self.rows)

    def violations(self) -> int:
        return sum(r.lhs > self.bound * (1 + 1e-9) + 1e-12 for r in self.rows)


def _gap_at(spec: MetricSpec, x: np.ndarray) -> GapRow:
    spec.domain.check(x)
    pts = stencil(x, order=1)
    spec.domain.check(pts, "finite-difference stencil point")
    g_values = spec.metric(pts)
    gT_values = g_values.copy()
    gT_values[:, 0, 0] = -gT_values[:, 0, 0]
    gj = jet_from_values(x, g_values, order=1)
    tj = jet_from_values(x, gT_values, order=1)
    difference = christoffel_from_jet(tj.value, tj.d1) - christoffel_from_jet(
        gj.value, gj.d1
    )
    frame = frame_for(gj.value, normal_vector(gj.value))
    lhs = frame_norm(difference, frame, "ull")
    lie = frame_norm(lie_derivative_T(spec, x, basis="coordinate"), frame)
    lapse = float(spec.lapse(x[None, :])[0])
    return GapRow(
        point=x,
        lhs=lhs,
        rhs_quadratic=lapse**2 * lie**2,
        linear=math.sqrt(2) * lie,
    )


def connection_gap(
    spec: MetricSpec,
    points: Optional[np.ndarray] = None,
    count: int = 100,
    seed: int = 0,
) -> ConnectionGapReport:
    """
    Compare the Levi-Civita connections of ``g`` and ``g_T`` for the
    foliation normal ``T`` over a probe set.

    Both Christoffel symbols come from finite differences on one stencil;
    ``g_T = n^2 dt^2 + h``.

    :raises: `.SpecError` if ``spec`` is not foliated.
    """
    if not spec.foliated:
        raise SpecError("connection comparison needs a foliated spec")
    if points is None:
        points = probe_points(spec, count, seed)
    rows = [_gap_at(spec, np.asarray(x, dtype=float)) for x in points]
    lapses = spec.lapse(np.asarray(points, dtype=float))
    K0 = float(np.max(np.abs(np.log(lapses))))
    K1 = max((r.linear / math.sqrt(2) for r in rows), default=0.0)
    report = ConnectionGapReport(rows=rows, K0=K0, K1=K1)
    debug(
        "Connection gap: max lhs %.3g, bound %.3g, linear ok %s",
        report.lhs,
        report.bound,
        report.linear_holds,
    )
    return report


def unit_ball_volume(n: int) -> float:
    return math.pi ** (n / 2.0) / gamma_fn(n / 2.0 + 1.0)


def measure_bounds(
    spec: MetricSpec,
    obs: Observer,
    radius: float,
    samples: int = 64,
    shells: int = 3,
) -> AssumptionBounds:
    """
    Measure `AssumptionBounds` on the linearized ball ``p + E y``,
    ``|y| <= radius``, where ``E`` is the observer's frame.

    ``T`` at each sample is the local slice normal. Samples outside the chart
    are skipped.
    """
    E = complete_frame(spec, obs).vectors
    dirs, radii = ball_points(spec.dim, radius, samples, shells)
    points = [obs.point] + [
        obs.point + E @ (r * u) for u in dirs for r in radii
    ]
    K0 = K1 = K2 = 0.0
    v0 = math.inf
    n = spec.n
    for x in points:
        if not spec.domain.contains(x, guard=1e-6)[0]:
            continue
        try:
            _, riem = connection_and_curvature(spec, x)
        except (ValueError, ArithmeticError):
            continue
        g = metric_array(spec, x)
        T = normal_vector(g)
        frame = frame_for(g, T)
        K2 = max(K2, frame_norm(riem, frame))
        if spec.foliated:
            lapse = float(spec.lapse(x[None, :])[0])
            h = spec.spatial(x[None, :])[0]
            lie = lie_derivative_T(spec, x, basis="coordinate")
            K1 = max(K1, frame_norm(lie, frame))
        else:
            lapse = 1.0 / math.sqrt(-np.linalg.inv(g)[0, 0])
            h = g[1:, 1:]
        K0 = max(K0, abs(math.log(lapse)))
        eig = np.linalg.eigvalsh(h)
        v0 = min(
            v0,
            unit_ball_volume(n)
            * math.sqrt(float(np.prod(eig)))
            / float(eig[-1]) ** (n / 2.0),
        )
    if not math.isfinite(v0):
        raise SpecError("no sample of the ball lies inside the chart")
    bounds = AssumptionBounds(K0=K0, K1=K1, K2=K2, v0=v0, r0=radius)
    debug("Measured bounds %s", bounds.as_dict())
    return bounds
