"""
Synchronous charts and the convexity of squared distance.

A synchronous chart hangs off a point ``q = gamma(r0 / 2)`` on the past
``T``-geodesic of ``p``: ``tau`` is the Lorentzian distance from ``q``,
found by shooting future timelike geodesics from ``q`` to every grid point.
Along the shot geodesic the gradient of ``rho = g(Y, Y)`` is twice the
endpoint velocity and the Hessian of ``rho / 2`` is ``g(J'(1), .)`` for
Jacobi fields with ``J(0) = 0``, so ``tau``'s derivatives come from the
same integration.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field
from itertools import product
from typing import Callable, Optional

import numpy as np
from scipy.linalg import eigh, null_space

from .config import DEFAULT_TOLERANCES, Tolerances
from .exceptions import ChartError
from .frames import (
    Observer,
    complete_frame,
    measure_bounds,
    normal_vector,
    normalize_timelike,
    reference_metric,
)
from .geodesic import exp_with_jacobian, integrate_geodesic
from .spacetime import MetricSpec, christoffel, metric_array
from .util import debug, run_batch

MAX_NEWTON = 20


@dataclass
class SynchronousChart:
    """
    ``tau`` and its derivatives on a cube grid about ``p``.

    The grid is ``p + E z`` with ``z`` on a ``grid``-point lattice of
    ``[-radius, radius]^N`` in observer-frame components. Arrays are indexed
    by grid point; entries of invalid points (boundary solve diverged, or
    the point is not in the timelike future of ``q``) are NaN.
    """

    base: np.ndarray
    observer: Observer
    r0: float
    radius: float
    grid: int
    z: np.ndarray
    points: np.ndarray
    tau: np.ndarray
    dtau: np.ndarray
    hess_tau: np.ndarray
    gN: np.ndarray
    residual: np.ndarray
    valid: np.ndarray

    @property
    def box(self) -> tuple[float, float]:
        return (-self.radius, self.radius)

    @property
    def coverage(self) -> float:
        return float(np.mean(self.valid))

    @property
    def max_residual(self) -> float:
        values = self.residual[self.valid]
        return float(np.max(values)) if len(values) else math.nan

    def residual_fraction(self, limit: float = 1e-6) -> float:
        """
        Fraction of valid points with ``| |grad tau|^2 + 1 | < limit``.
        """
        values = self.residual[self.valid]
        return float(np.mean(values < limit)) if len(values) else 0.0

    def center(self) -> int:
        return len(self.points) // 2


def _lattice(dim: int, grid: int, radius: float) -> np.ndarray:
    axis = np.linspace(-radius, radius, grid)
    mesh = np.meshgrid(*([axis] * dim), indexing="ij")
    return np.stack([m.ravel() for m in mesh], axis=1)


def _shoot_to(
    spec: MetricSpec,
    base: np.ndarray,
    frame: np.ndarray,
    target: np.ndarray,
    guess: np.ndarray,
    tol: Tolerances,
):
    """
    Newton solve of ``exp_base(frame y) = target`` from ``guess``.

    :returns: ``(y, D, solution)`` at convergence, ``None`` otherwise.
    """
    scale = max(1.0, float(np.linalg.norm(target)))
    limit = max(tol.newton, 1e2 * tol.rtol) * scale
    y = np.array(guess, dtype=float)
    try:
        for _ in range(MAX_NEWTON):
            x, D, geo = exp_with_jacobian(spec, base, frame, y, tol)
            F = x - target
            if np.linalg.norm(F) < limit:
                return y, D, geo
            y = y - np.linalg.solve(D, F)
    except (ChartError, np.linalg.LinAlgError, ArithmeticError) as exc:
        debug("Boundary solve to %s failed: %s", target, exc)
    return None


def build_synchronous_chart(
    spec: MetricSpec,
    obs: Observer,
    r0: float,
    radius: Optional[float] = None,
    grid: int = 5,
    tol: Tolerances = DEFAULT_TOLERANCES,
    workers: int = 1,
) -> SynchronousChart:
    """
    Build the synchronous chart of ``q = exp_p(-(r0 / 2) T)`` on a grid
    about ``p``.

    :param radius: Half-width of the grid cube (frame components);
        defaults to ``r0 / 8``, which keeps the cube inside the future of
        ``q``.
    :param grid: Points per axis; odd so that ``p`` is a grid point.
    :raises: `.ChartError` if the past geodesic leaves the chart first.
    """
    if not r0 > 0:
        raise ValueError("r0 must be positive")
    if grid < 3 or grid % 2 == 0:
        raise ValueError("grid needs an odd number (>= 3) of points per axis")
    radius = r0 / 8.0 if radius is None else float(radius)
    dim = spec.dim
    E_p = complete_frame(spec, obs).vectors
    past = integrate_geodesic(spec, obs.point, -obs.T, r0 / 2.0, tol)
    if not past.ok:
        raise ChartError(
            "past T-geodesic stops at s = {:.6g} before r0/2".format(
                past.s_end
            ),
            past.x[-1],
        )
    q = past.x[-1].copy()
    E_q = complete_frame(spec, Observer(q, -past.v[-1])).vectors
    y_p = np.zeros(dim)
    y_p[0] = r0 / 2.0
    anchor = _shoot_to(spec, q, E_q, obs.point, y_p, tol)
    if anchor is None:
        raise ChartError("could not shoot from q back to p", obs.point)
    y_p, D_p, _ = anchor
    D_p_inv = np.linalg.inv(D_p)

    z = _lattice(dim, grid, radius)
    points = obs.point + z @ E_p.T

    blank = np.full((dim, dim), math.nan)
    missing = (math.nan, np.full(dim, math.nan), blank, blank, math.nan)

    def solve(x: np.ndarray):
        guess = y_p + D_p_inv @ (x - obs.point)
        found = _shoot_to(spec, q, E_q, x, guess, tol)
        if found is None:
            return missing
        y, D, geo = found
        norm2 = -y[0] ** 2 + float(np.sum(y[1:] ** 2))
        if not norm2 < 0:
            return missing
        tau = math.sqrt(-norm2)
        assert geo.frames is not None and geo.dA is not None
        g = metric_array(spec, x)
        v = geo.v[-1]
        dtau = -(g @ v) / tau
        M = geo.frames[-1] @ geo.dA[-1] @ np.linalg.inv(D)
        half = M.T @ g
        half = 0.5 * (half + half.T)
        hess = -(half + np.outer(dtau, dtau)) / tau
        gN = g + 2.0 * np.outer(dtau, dtau)
        residual = abs(float(v @ g @ v) / tau**2 + 1.0)
        return tau, dtau, hess, gN, residual

    rows = run_batch(solve, list(points), workers)
    tau = np.array([row[0] for row in rows])
    chart = SynchronousChart(
        base=q,
        observer=obs,
        r0=r0,
        radius=radius,
        grid=grid,
        z=z,
        points=points,
        tau=tau,
        dtau=np.array([row[1] for row in rows]),
        hess_tau=np.array([row[2] for row in rows]),
        gN=np.array([row[3] for row in rows]),
        residual=np.array([row[4] for row in rows]),
        valid=np.isfinite(tau),
    )
    debug(
        "Synchronous chart: %d points, coverage %.3f, max residual %.3g",
        len(points),
        chart.coverage,
        chart.max_residual,
    )
    return chart


def _band(K: float, tau: float) -> tuple[float, float]:
    """
    Hessian-comparison coefficients ``(sqrt(K) cot(sqrt(K) tau),
    sqrt(K) coth(sqrt(K) tau))``; both ``1 / tau`` for ``K = 0``.
    """
    if K <= 0:
        return 1.0 / tau, 1.0 / tau
    root = math.sqrt(K)
    lower = root / math.tan(root * tau) if root * tau < math.pi else -math.inf
    return lower, root / math.tanh(root * tau)


@dataclass
class ConvexityRow:
    index: int
    point: np.ndarray
    tau: float
    eigen_min: float
    eigen_max: float
    band_lower: float
    band_upper: float
    hess_min: float
    hess_max: float
    gn_min: float = math.nan
    gn_max: float = math.nan


@dataclass
class ConvexityReport:
    """
    Generalized eigenvalues of ``(Hess_g u, g_T)`` at the interior grid
    points, against the window ``[2 - eps, 2 + eps]``, and the
    ``-Hess tau`` comparison band on ``grad(tau)``'s orthogonal complement.
    The eigenvalues against the synchronous ``gN`` ride along in
    ``gn_min``/``gn_max``; they drift from 2 at first order in the distance
    to ``p`` even in flat space, since ``grad(tau)`` is not parallel.
    """

    eps: float
    K: float
    rows: list[ConvexityRow] = field(default_factory=list)
    interior: int = 0

    @property
    def coverage(self) -> float:
        return len(self.rows) / self.interior if self.interior else 0.0

    @property
    def eigen_min(self) -> float:
        return min((r.eigen_min for r in self.rows), default=math.nan)

    @property
    def eigen_max(self) -> float:
        return max((r.eigen_max for r in self.rows), default=math.nan)

    @property
    def measured_eps(self) -> float:
        """
        Smallest ``eps`` whose window holds every eigenvalue.
        """
        if not self.rows:
            return math.nan
        return max(abs(self.eigen_min - 2.0), abs(self.eigen_max - 2.0))

    def fraction_within(self, eps: float) -> float:
        if not self.rows:
            return 0.0
        inside = [
            abs(r.eigen_min - 2.0) <= eps and abs(r.eigen_max - 2.0) <= eps
            for r in self.rows
        ]
        return float(np.mean(inside))

    @property
    def holds(self) -> bool:
        return bool(self.rows) and self.measured_eps <= self.eps

    @property
    def band_violations(self) -> int:
        count = 0
        for r in self.rows:
            low = r.band_lower - 1e-6 * abs(r.band_lower) - 1e-9
            high = r.band_upper + 1e-6 * abs(r.band_upper) + 1e-9
            if r.hess_min < low or r.hess_max > high:
                count += 1
        return count

    def to_csv(self) -> str:
        out = io.StringIO()
        writer = csv.writer(out, lineterminator="\n")
        dim = len(self.rows[0].point) if self.rows else 0
        writer.writerow(
            ["index"]
            + ["x{}".format(i) for i in range(dim)]
            + [
                "tau",
                "eig_min(Hess u;gT)",
                "eig_max(Hess u;gT)",
                "band_lower",
                "band_upper",
                "eig_min(-Hess tau)",
                "eig_max(-Hess tau)",
                "eig_min(Hess u;gN)",
                "eig_max(Hess u;gN)",
            ]
        )
        for r in self.rows:
            writer.writerow(
                [r.index]
                + ["{:.10g}".format(c) for c in r.point]
                + [
                    "{:.10g}".format(value)
                    for value in (
                        r.tau,
                        r.eigen_min,
                        r.eigen_max,
                        r.band_lower,
                        r.band_upper,
                        r.hess_min,
                        r.hess_max,
                        r.gn_min,
                        r.gn_max,
                    )
                ]
            )
        return out.getvalue()


def _interior(grid: int, dim: int) -> list[tuple[int, ...]]:
    return list(product(range(1, grid - 1), repeat=dim))


def reference_field(
    spec: MetricSpec, obs: Observer
) -> Callable[[np.ndarray], np.ndarray]:
    """
    ``g_T`` along the observer's vector field.

    The field is the slice normal when ``obs.T`` is the normal at ``p``;
    any other ``T`` is extended with constant chart components.
    """
    g0 = metric_array(spec, obs.point)
    along_normal = bool(np.allclose(normal_vector(g0), obs.T, atol=1e-12))

    def at(x: np.ndarray) -> np.ndarray:
        g = metric_array(spec, x)
        T = normal_vector(g) if along_normal else normalize_timelike(g, obs.T)
        return reference_metric(g, T)

    return at


def convexity_check(
    spec: MetricSpec,
    obs: Observer,
    chart: SynchronousChart,
    eps: float = 0.1,
    K: Optional[float] = None,
    tol: Tolerances = DEFAULT_TOLERANCES,
    workers: int = 1,
) -> ConvexityReport:
    """
    Check ``(2 - eps) g_T <= Hess_g u <= (2 + eps) g_T`` on the chart's
    interior grid points.

    ``u`` is ``|exp_p^{-1}(x)|^2`` measured by ``g_T`` at ``p`` (where
    ``gN = g_T``): the squared radius of Lorentzian normal coordinates,
    equivalent to the squared ``g_T`` distance up to ``1 +- eps``. In flat
    space it is exactly quadratic, so every eigenvalue is 2. Its covariant
    Hessian uses central differences on the chart grid with the
    Christoffel correction. ``K`` for the ``tau`` comparison band defaults
    to the curvature bound measured on the grid's ball.
    """
    dim = spec.dim
    grid = chart.grid
    h = 2.0 * chart.radius / (grid - 1)
    E = complete_frame(spec, obs).vectors
    E_inv = np.linalg.inv(E)
    gT_at = reference_field(spec, obs)

    def invert(k: int) -> float:
        if not chart.valid[k]:
            return math.nan
        x, guess = chart.points[k], chart.z[k]
        found = _shoot_to(spec, obs.point, E, x, guess, tol)
        return math.nan if found is None else float(np.sum(found[0] ** 2))

    u = np.array(run_batch(invert, list(range(len(chart.points))), workers))
    u = u.reshape((grid,) * dim)
    if K is None:
        K = measure_bounds(spec, obs, chart.radius * math.sqrt(dim)).K2
    report = ConvexityReport(eps=eps, K=K)
    unit = np.eye(dim, dtype=int)
    centers = _interior(grid, dim)
    report.interior = len(centers)
    for idx in centers:
        k = int(np.ravel_multi_index(idx, (grid,) * dim))

        def at(offset: np.ndarray) -> float:
            return float(u[tuple(np.array(idx) + offset)])

        middle = float(u[idx])
        grad = np.empty(dim)
        H = np.empty((dim, dim))
        for a in range(dim):
            grad[a] = (at(unit[a]) - at(-unit[a])) / (2 * h)
            H[a, a] = (at(unit[a]) - 2 * middle + at(-unit[a])) / h**2
            for b in range(a):
                H[a, b] = H[b, a] = (
                    at(unit[a] + unit[b])
                    - at(unit[a] - unit[b])
                    - at(unit[b] - unit[a])
                    + at(-unit[a] - unit[b])
                ) / (4 * h**2)
        if not (np.all(np.isfinite(H)) and chart.valid[k]):
            continue
        x = chart.points[k]
        du = E_inv.T @ grad
        hess = E_inv.T @ H @ E_inv - np.einsum(
            "cab,c->ab", christoffel(spec, x), du
        )
        hess = 0.5 * (hess + hess.T)
        eig = eigh(hess, gT_at(x), eigvals_only=True)
        eig_n = eigh(hess, chart.gN[k], eigvals_only=True)
        W = null_space(chart.dtau[k][None, :])
        g = metric_array(spec, x)
        band_eig = eigh(
            -W.T @ chart.hess_tau[k] @ W, W.T @ g @ W, eigvals_only=True
        )
        lower, upper = _band(K, float(chart.tau[k]))
        report.rows.append(
            ConvexityRow(
                index=k,
                point=x,
                tau=float(chart.tau[k]),
                eigen_min=float(eig[0]),
                eigen_max=float(eig[-1]),
                band_lower=lower,
                band_upper=upper,
                hess_min=float(band_eig[0]),
                hess_max=float(band_eig[-1]),
                gn_min=float(eig_n[0]),
                gn_max=float(eig_n[-1]),
            )
        )
    debug(
        "Convexity: eigenvalues in [%.8g, %.8g] over %d points",
        report.eigen_min,
        report.eigen_max,
        len(report.rows),
    )
    return report
