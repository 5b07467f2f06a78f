"""
Geodesics, parallel transport and the exponential map.

All integrations share one state layout: position ``x``, velocity ``v``,
optionally a parallel frame ``E`` (``N x N``, columns) and optionally ``m``
Jacobi fields in frame components ``A`` (``N x m``) with derivatives ``A'``.
Jacobi fields obey ``A'' = K A`` with
``K[a, c] = -eta_a riem(E_c, v, v, E_a)``.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .config import DEFAULT_TOLERANCES, Tolerances
from .exceptions import ChartError
from .flow import REACHED, Trajectory, integrate
from .frames import (
    AssumptionBounds,
    Observer,
    complete_frame,
    eta,
    measure_bounds,
    normal_vector,
    reference_metric,
)
from .spacetime import (
    MetricSpec,
    christoffel,
    connection_and_curvature,
    metric_array,
)
from .util import debug, run_batch


class GeodesicSystem:
    """
    Right-hand side and state packing for the joint geodesic system.

    :param frame: Carry a parallel frame (``N`` columns).
    :param fields: Number of Jacobi fields carried (needs ``frame``).
    """

    def __init__(
        self, spec: MetricSpec, frame: bool = False, fields: int = 0
    ) -> None:
        if fields and not frame:
            raise ValueError("Jacobi fields need a transported frame")
        self.spec = spec
        self.dim = spec.dim
        self.frame = frame
        self.fields = fields
        self.signs = np.diag(eta(self.dim))
        self.evaluations = 0

    @property
    def size(self) -> int:
        n = self.dim
        return 2 * n + (n * n if self.frame else 0) + 2 * n * self.fields

    def pack(
        self,
        x: np.ndarray,
        v: np.ndarray,
        E: Optional[np.ndarray] = None,
        A: Optional[np.ndarray] = None,
        dA: Optional[np.ndarray] = None,
    ) -> np.ndarray:
        parts = [np.asarray(x, float), np.asarray(v, float)]
        if self.frame:
            assert E is not None
            parts.append(np.asarray(E, float).ravel())
        if self.fields:
            assert A is not None and dA is not None
            parts.append(np.asarray(A, float).ravel())
            parts.append(np.asarray(dA, float).ravel())
        return np.concatenate(parts)

    def unpack(self, y: np.ndarray) -> dict[str, np.ndarray]:
        n, m = self.dim, self.fields
        out = {"x": y[:n], "v": y[n : 2 * n]}
        k = 2 * n
        if self.frame:
            out["E"] = y[k : k + n * n].reshape(n, n)
            k += n * n
        if m:
            out["A"] = y[k : k + n * m].reshape(n, m)
            out["dA"] = y[k + n * m : k + 2 * n * m].reshape(n, m)
        return out

    def __call__(self, s: float, y: np.ndarray) -> np.ndarray:
        self.evaluations += 1
        parts = self.unpack(y)
        x, v = parts["x"], parts["v"]
        if self.fields:
            gamma, riem = connection_and_curvature(self.spec, x)
        else:
            gamma = christoffel(self.spec, x)
        out = [v, -np.einsum("cab,a,b->c", gamma, v, v)]
        if self.frame:
            E = parts["E"]
            out.append(-np.einsum("cab,a,bk->ck", gamma, v, E).ravel())
        if self.fields:
            E = parts["E"]
            q = np.einsum("abcd,ag,b,c,dk->gk", riem, E, v, v, E)
            K = -self.signs[:, None] * q.T
            out.append(parts["dA"].ravel())
            out.append((K @ parts["A"]).ravel())
        return np.concatenate(out)

    def margin(self, guard: float):
        domain = self.spec.domain
        n = self.dim

        def margin(y: np.ndarray) -> float:
            return float(domain.margin(y[:n])[0]) - guard

        return margin


@dataclass
class GeodesicSolution:
    """
    A sampled geodesic ``x(s)`` with velocity, optionally a transported frame
    and Jacobi fields, plus the continuous `.Trajectory` behind it.
    """

    s: np.ndarray
    x: np.ndarray
    v: np.ndarray
    start: np.ndarray
    velocity: np.ndarray
    termination: str
    trajectory: Trajectory = field(repr=False)
    system: GeodesicSystem = field(repr=False)
    frames: Optional[np.ndarray] = field(default=None, repr=False)
    A: Optional[np.ndarray] = field(default=None, repr=False)
    dA: Optional[np.ndarray] = field(default=None, repr=False)
    norm_drift: Optional[np.ndarray] = field(default=None, repr=False)

    @property
    def ok(self) -> bool:
        return self.termination == REACHED

    @property
    def s_end(self) -> float:
        return float(self.s[-1])

    @property
    def step(self) -> float:
        """
        Mean accepted step size.
        """
        return self.s_end / max(len(self.s) - 1, 1)

    def at(self, s: float) -> dict[str, np.ndarray]:
        """
        Interpolated state parts (``x``, ``v`` and, when carried, ``E``,
        ``A``, ``dA``) at parameter ``s``.
        """
        return self.system.unpack(self.trajectory.state(s))

    def point(self, s: float) -> np.ndarray:
        return self.at(s)["x"].copy()

    def to_rows(self) -> list[list[float]]:
        drift = (
            self.norm_drift
            if self.norm_drift is not None
            else np.zeros(len(self.s))
        )
        return [
            [float(s)] + list(map(float, x)) + list(map(float, v)) + [float(d)]
            for s, x, v, d in zip(self.s, self.x, self.v, drift)
        ]

    def header(self) -> list[str]:
        n = len(self.start)
        return (
            ["s"]
            + ["x{}".format(i) for i in range(n)]
            + ["v{}".format(i) for i in range(n)]
            + ["drift_g(v,v)"]
        )

    def to_csv(self) -> str:
        out = io.StringIO()
        writer = csv.writer(out, lineterminator="\n")
        writer.writerow(self.header())
        for row in self.to_rows():
            writer.writerow(["{:.12g}".format(value) for value in row])
        return out.getvalue()


def _solution(
    system: GeodesicSystem,
    trajectory: Trajectory,
    x0: np.ndarray,
    v0: np.ndarray,
) -> GeodesicSolution:
    n = system.dim
    y = trajectory.y
    frames = A = dA = None
    if system.frame:
        frames = y[:, 2 * n : 2 * n + n * n].reshape(-1, n, n)
    if system.fields:
        parts = [system.unpack(row) for row in y]
        A = np.array([p["A"] for p in parts])
        dA = np.array([p["dA"] for p in parts])
    xs, vs = y[:, :n], y[:, n : 2 * n]
    drift = None
    try:
        norms = np.array(
            [v @ metric_array(system.spec, x) @ v for x, v in zip(xs, vs)]
        )
        drift = np.abs(norms - norms[0])
    except (ChartError, ArithmeticError):
        pass
    return GeodesicSolution(
        s=trajectory.s,
        x=xs,
        v=vs,
        start=np.asarray(x0, float),
        velocity=np.asarray(v0, float),
        termination=trajectory.termination,
        trajectory=trajectory,
        system=system,
        frames=frames,
        A=A,
        dA=dA,
        norm_drift=drift,
    )


def _run(
    system: GeodesicSystem,
    y0: np.ndarray,
    s_max: float,
    tol: Tolerances,
) -> Trajectory:
    return integrate(system, y0, s_max, system.margin(tol.guard), tol)


def integrate_geodesic(
    spec: MetricSpec,
    p: Sequence[float],
    v0: Sequence[float],
    s_max: float,
    tol: Tolerances = DEFAULT_TOLERANCES,
    frame: Optional[np.ndarray] = None,
    jacobi: Optional[tuple[np.ndarray, np.ndarray]] = None,
) -> GeodesicSolution:
    """
    Solve ``x'' = -Gamma(x)(x', x')`` from ``(p, v0)`` over ``[0, s_max]``.

    :param frame: Optional initial frame (columns) to transport jointly.
    :param jacobi: Optional ``(A0, dA0)`` initial Jacobi data in frame
        components, each ``N x m``; needs ``frame``.
    :returns: a `GeodesicSolution`; failures show up in ``termination``
        (``reached_smax``, ``left_chart`` or ``step_failure``).
    """
    x0 = np.asarray(p, dtype=float)
    v = np.asarray(v0, dtype=float)
    if not (np.all(np.isfinite(x0)) and np.all(np.isfinite(v))):
        raise ValueError("initial data must be finite")
    spec.domain.check(x0)
    fields = 0 if jacobi is None else np.asarray(jacobi[0]).shape[1]
    system = GeodesicSystem(spec, frame=frame is not None, fields=fields)
    A0, dA0 = (None, None) if jacobi is None else jacobi
    y0 = system.pack(x0, v, frame, A0, dA0)
    trajectory = _run(system, y0, s_max, tol)
    return _solution(system, trajectory, x0, v)


def parallel_transport(
    spec: MetricSpec,
    geo: GeodesicSolution,
    V0: Sequence[float],
    tol: Optional[Tolerances] = None,
) -> np.ndarray:
    """
    Transport ``V0`` along ``geo``; returns ``V`` at every sample of ``geo``.

    The geodesic is integrated again jointly with ``V`` (as a one-column
    frame block) so both share step control.
    """
    V0 = np.asarray(V0, dtype=float)
    frame = np.zeros((spec.dim, spec.dim))
    frame[:, 0] = V0
    joint = integrate_geodesic(
        spec,
        geo.start,
        geo.velocity,
        geo.s_end,
        tol or DEFAULT_TOLERANCES,
        frame=frame,
    )
    assert joint.frames is not None
    return np.array(
        [joint.at(s)["E"][:, 0] for s in geo.s if s <= joint.s_end]
    )


@dataclass
class TransportedFrame:
    s: np.ndarray
    frames: np.ndarray
    residuals: np.ndarray

    @property
    def max_residual(self) -> float:
        return float(np.max(self.residuals)) if len(self.residuals) else 0.0


def transport_frame(
    spec: MetricSpec,
    geo: GeodesicSolution,
    frame0: np.ndarray,
    tol: Optional[Tolerances] = None,
) -> TransportedFrame:
    """
    Parallel frame along ``geo`` and its eta-orthonormality residuals.
    """
    joint = integrate_geodesic(
        spec,
        geo.start,
        geo.velocity,
        geo.s_end,
        tol or DEFAULT_TOLERANCES,
        frame=np.asarray(frame0, dtype=float),
    )
    assert joint.frames is not None
    target = eta(spec.dim)
    residuals = []
    for x, E in zip(joint.x, joint.frames):
        g = metric_array(spec, x)
        residuals.append(float(np.max(np.abs(E.T @ g @ E - target))))
    return TransportedFrame(
        s=joint.s, frames=joint.frames, residuals=np.array(residuals)
    )


class ExpFailure(ChartError):
    """
    The geodesic for an exponential map did not reach ``s = 1``.
    """

    def __init__(self, termination: str, s_end: float, point=None):
        self.termination = termination
        self.s_end = s_end
        super().__init__(
            "exp undefined: {} at s = {:.6g}".format(termination, s_end), point
        )


def exp_map(
    spec: MetricSpec,
    obs: Observer,
    y: Sequence[float],
    tol: Tolerances = DEFAULT_TOLERANCES,
    frame: Optional[np.ndarray] = None,
) -> np.ndarray:
    """
    ``exp_p(y)`` for ``y`` given in frame components of the observer.

    :raises: `ExpFailure` (a `.ChartError`) if the geodesic leaves the chart
        or the integration fails before ``s = 1``.
    """
    E = complete_frame(spec, obs).vectors if frame is None else frame
    y = np.asarray(y, dtype=float)
    if not np.any(y):
        return obs.point.copy()
    geo = integrate_geodesic(spec, obs.point, E @ y, 1.0, tol)
    if not geo.ok:
        raise ExpFailure(geo.termination, geo.s_end, geo.x[-1])
    return geo.x[-1].copy()


def exp_with_jacobian(
    spec: MetricSpec,
    base: np.ndarray,
    E: np.ndarray,
    y: Sequence[float],
    tol: Tolerances = DEFAULT_TOLERANCES,
) -> tuple[np.ndarray, np.ndarray, GeodesicSolution]:
    """
    ``exp`` at ``base`` of the vector with ``E``-components ``y``, plus its
    derivative.

    The derivative comes from ``N`` Jacobi fields with ``J(0) = 0`` and
    ``J'(0) = E_k``: ``D = E(1) A(1)`` in chart components per unit change of
    ``y``.

    :returns: ``(point, D, solution)``.
    :raises: `ExpFailure` if the geodesic does not reach ``s = 1``.
    """
    n = len(base)
    y = np.asarray(y, dtype=float)
    geo = integrate_geodesic(
        spec,
        base,
        E @ y,
        1.0,
        tol,
        frame=E,
        jacobi=(np.zeros((n, n)), np.eye(n)),
    )
    if not geo.ok:
        raise ExpFailure(geo.termination, geo.s_end, geo.x[-1])
    assert geo.frames is not None and geo.A is not None
    D = geo.frames[-1] @ geo.A[-1]
    return geo.x[-1].copy(), D, geo


@dataclass
class RadialProfile:
    """
    ``|gamma'|`` along a ray measured two ways, with the sampled evolution
    bound ``|d/ds (1/|gamma'|_T)| <= K3``.
    """

    s: np.ndarray
    transported: np.ndarray
    foliation: Optional[np.ndarray]
    K3: float
    violations: int
    first_violation: Optional[float]
    termination: str

    def rows(self) -> list[tuple[float, float, float]]:
        fol = (
            self.foliation
            if self.foliation is not None
            else np.full(len(self.s), np.nan)
        )
        return list(zip(self.s, self.transported, fol))


def radial_norm_profile(
    spec: MetricSpec,
    obs: Observer,
    direction: Sequence[float],
    s_max: float,
    bounds: Optional[AssumptionBounds] = None,
    tol: Tolerances = DEFAULT_TOLERANCES,
) -> RadialProfile:
    """
    Follow the ray with unit frame direction ``direction`` and record
    ``|gamma'|`` in the transported observer metric and in the foliation
    observer's metric at each sample.

    The transported column uses the constant frame components of
    ``gamma'``, so it only drifts by transport error. The foliation column
    is checked against the evolution bound with ``K3`` from ``bounds``
    (measured on the ray's ball if not given), counting violations.
    """
    frame = complete_frame(spec, obs).vectors
    u = np.asarray(direction, dtype=float)
    u = u / np.linalg.norm(u)
    geo = integrate_geodesic(
        spec, obs.point, frame @ u, s_max, tol, frame=frame
    )
    assert geo.frames is not None
    transported = np.array(
        [
            np.linalg.norm(frame_components(E, v))
            for E, v in zip(geo.frames, geo.v)
        ]
    )
    foliation = None
    violations = 0
    first = None
    K3 = float("nan")
    if spec.foliated:
        if bounds is None:
            bounds = measure_bounds(spec, obs, max(s_max, 1e-6))
        K3 = bounds.K3
        values = []
        for x, v in zip(geo.x, geo.v):
            g = metric_array(spec, x)
            gT = reference_metric(g, normal_vector(g))
            values.append(math.sqrt(float(v @ gT @ v)))
        foliation = np.array(values)
        inverse = 1.0 / foliation
        ds = np.diff(geo.s)
        rate = np.abs(np.diff(inverse)) / np.where(ds > 0, ds, np.inf)
        bad = rate > K3 * (1 + 1e-6) + 1e-9
        violations = int(np.sum(bad))
        if violations:
            first = float(geo.s[1:][bad][0])
    return RadialProfile(
        s=geo.s,
        transported=transported,
        foliation=foliation,
        K3=K3,
        violations=violations,
        first_violation=first,
        termination=geo.termination,
    )


def ray_fan(
    spec: MetricSpec,
    obs: Observer,
    directions: np.ndarray,
    s_max: float,
    tol: Tolerances = DEFAULT_TOLERANCES,
    workers: int = 1,
    jacobi: bool = False,
) -> list[GeodesicSolution]:
    """
    Integrate one ray per frame direction (rows of ``directions``),
    optionally in worker threads. Results keep direction order.

    With ``jacobi=True`` every ray also carries the ``N`` Jacobi fields with
    ``J(0) = 0``, ``J'(0) = E_k``.
    """
    frame = complete_frame(spec, obs).vectors
    n = spec.dim

    def shoot(u: np.ndarray) -> GeodesicSolution:
        data = (np.zeros((n, n)), np.eye(n)) if jacobi else None
        return integrate_geodesic(
            spec,
            obs.point,
            frame @ u,
            s_max,
            tol,
            frame=frame,
            jacobi=data,
        )

    results = run_batch(shoot, list(np.asarray(directions, float)), workers)
    failed = sum(not r.ok for r in results)
    if failed:
        debug("%d of %d rays did not reach s=%g", failed, len(results), s_max)
    return results


def frame_components(E: np.ndarray, v: np.ndarray) -> np.ndarray:
    """
    Components of ``v`` in the frame ``E``.
    """
    return np.linalg.solve(E, v)


