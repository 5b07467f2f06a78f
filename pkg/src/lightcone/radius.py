"""
Injectivity radius estimates.

`injectivity_radius` combines the conjugate search of `.jacobi` with a
geodesic-loop search: two distinct geodesics from ``p`` meeting again bound
the injectivity radius by half their combined length. The lower bounds
(`theorem_main_bound` here, the foliated chain in `.bounds`) are reported
next to the estimate so their direction can be checked.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Any, Optional

import numpy as np
from scipy.optimize import minimize
from scipy.spatial import cKDTree

from .bounds import DEFAULT_CONSTANTS, BoundConstants, theorem_foliated_bound
from .config import DEFAULT_TOLERANCES, Tolerances
from .exceptions import BoundError, ChartError, SpecError
from .flow import REACHED
from .frames import (
    Observer,
    complete_frame,
    frame_norm,
    measure_bounds,
    reference_metric_at,
)
from .geodesic import exp_with_jacobian, ray_fan
from .jacobi import conjugate_radius
from .lattices import directions as direction_set
from .spacetime import MetricSpec, connection_and_curvature
from .util import debug, run_batch
from .volume import ConeVolume, ball_exp_volume

#: Coordinate residual below which two shot endpoints count as one point.
LOOP_RESIDUAL = 1e-7
MAX_NEWTON = 25
SQRT2 = math.sqrt(2.0)


@dataclass(frozen=True)
class _Rays:
    """
    Parameters ``q`` of tangent vectors ``y`` for the loop search.

    On the whole tangent space ``q = y``. On the past null cone
    ``q = (s, w)`` and ``y = s (-1, w / |w|) / sqrt(2)``, so ``s`` is the
    ``g_T`` length and every solve stays on the cone.
    """

    dim: int
    null: bool = False

    def start(self, u: np.ndarray, s: float) -> np.ndarray:
        if self.null:
            return np.concatenate([[s], u[1:] * SQRT2])
        return s * u

    def vector(self, q: np.ndarray) -> np.ndarray:
        if not self.null:
            return np.asarray(q, dtype=float)
        w = q[1:] / np.linalg.norm(q[1:])
        return q[0] * np.concatenate([[-1.0], w]) / SQRT2

    def jacobian(self, q: np.ndarray) -> np.ndarray:
        if not self.null:
            return np.eye(self.dim)
        size = float(np.linalg.norm(q[1:]))
        w = q[1:] / size
        out = np.zeros((self.dim, self.dim))
        out[:, 0] = np.concatenate([[-1.0], w]) / SQRT2
        out[1:, 1:] = (
            q[0] * (np.eye(self.dim - 1) - np.outer(w, w)) / (size * SQRT2)
        )
        return out

    def length(self, q: np.ndarray) -> float:
        return abs(float(q[0])) if self.null else float(np.linalg.norm(q))

    def length_gradient(self, q: np.ndarray) -> np.ndarray:
        out = np.zeros(self.dim)
        if self.null:
            out[0] = 1.0 if q[0] >= 0 else -1.0
            return out
        size = float(np.linalg.norm(q))
        return q / size if size > 0 else out


@dataclass(frozen=True)
class Loop:
    """
    Two distinct geodesics from ``p`` with ``exp(y_i) = exp(y_j)``.

    ``y_i`` and ``y_j`` are observer-frame components.
    """

    y_i: np.ndarray
    y_j: np.ndarray
    residual: float

    @property
    def length(self) -> float:
        return float(np.linalg.norm(self.y_i) + np.linalg.norm(self.y_j))


@dataclass
class LoopSearch:
    """
    Outcome of one `detect_short_loops` run.

    ``candidates`` counts grid pairs with close images and separated
    preimages; ``refined`` how many of them went through a confirmation
    solve, ``diverged`` how many of those failed.
    """

    radius: float
    delta: float
    separation: float
    points: int
    candidates: int
    refined: int
    diverged: int
    loops: list[Loop] = field(default_factory=list)
    null: bool = False

    @property
    def shortest(self) -> Optional[float]:
        return min((loop.length for loop in self.loops), default=None)

    @property
    def coarse(self) -> bool:
        """
        Candidates existed but no confirmation solve converged: the grid is
        probably too coarse to bracket a loop.
        """
        return self.diverged > 0 and not self.loops

    def diagnostics(self) -> dict[str, Any]:
        return {
            "loop_delta": self.delta,
            "loop_points": self.points,
            "loop_candidates": self.candidates,
            "loop_refined": self.refined,
            "loop_diverged": self.diverged,
            "loop_grid_too_coarse": self.coarse,
        }


def _difference(spec: MetricSpec, a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """
    ``a - b`` with periodic coordinates reduced to the nearest image.
    """
    d = np.asarray(a, float) - np.asarray(b, float)
    for axis in range(spec.dim):
        period = spec.domain.period(axis)
        if period is not None:
            d[axis] -= period * np.round(d[axis] / period)
    return d


def _close_pairs(
    spec: MetricSpec, images: np.ndarray, radius: float
) -> np.ndarray:
    """
    Index pairs of images closer than ``radius`` in chart coordinates,
    periodic axes included (k-d tree on a torus-shaped box).
    """
    data = np.array(spec.identify(images), dtype=float)
    sizes = np.empty(spec.dim)
    for axis in range(spec.dim):
        period = spec.domain.period(axis)
        column = data[:, axis]
        if period is None:
            column -= column.min()
            sizes[axis] = 2.0 * (column.max() + radius) + 1.0
            continue
        start = spec.domain.box[axis][0]
        start = start if np.isfinite(start) else 0.0
        column[:] = np.mod(column - start, period)
        column[column >= period] = 0.0
        sizes[axis] = period
    tree = cKDTree(data, boxsize=sizes)
    return tree.query_pairs(r=radius, output_type="ndarray")


def _damped_step(residual, jacobian, z, F):
    """
    One minimum-norm Gauss-Newton step with step halving; ``None`` when
    no halving decreases the residual.
    """
    step = np.linalg.lstsq(jacobian(z), -F, rcond=None)[0]
    size = float(np.linalg.norm(F))
    t = 1.0
    while t >= 1.0 / 64:
        trial = z + t * step
        F_trial = residual(trial)
        if np.linalg.norm(F_trial) < size:
            return trial, F_trial
        t /= 2
    return None


class _Shooting:
    """
    The two-ray system ``exp(y(q_i)) - exp(y(q_j)) = 0`` for one candidate.
    """

    def __init__(
        self,
        spec: MetricSpec,
        base: np.ndarray,
        frame: np.ndarray,
        rays: _Rays,
        tol: Tolerances,
    ) -> None:
        self.spec = spec
        self.base = base
        self.frame = frame
        self.rays = rays
        self.tol = tol
        self.cache: dict[bytes, tuple[np.ndarray, np.ndarray]] = {}

    def endpoint(self, q: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        key = np.asarray(q, float).tobytes()
        if key not in self.cache:
            x, D, _ = exp_with_jacobian(
                self.spec, self.base, self.frame, self.rays.vector(q), self.tol
            )
            self.cache[key] = (x, D @ self.rays.jacobian(q))
        return self.cache[key]

    def residual(self, z: np.ndarray) -> np.ndarray:
        n = self.rays.dim
        return _difference(
            self.spec, self.endpoint(z[:n])[0], self.endpoint(z[n:])[0]
        )

    def jacobian(self, z: np.ndarray) -> np.ndarray:
        n = self.rays.dim
        return np.hstack([self.endpoint(z[:n])[1], -self.endpoint(z[n:])[1]])

    def length(self, z: np.ndarray) -> float:
        n = self.rays.dim
        return self.rays.length(z[:n]) + self.rays.length(z[n:])

    def length_gradient(self, z: np.ndarray) -> np.ndarray:
        n = self.rays.dim
        head = self.rays.length_gradient(z[:n])
        return np.concatenate([head, self.rays.length_gradient(z[n:])])


def _newton(system: _Shooting, z: np.ndarray) -> Optional[np.ndarray]:
    F = system.residual(z)
    for _ in range(MAX_NEWTON):
        if np.linalg.norm(F) < LOOP_RESIDUAL:
            return z
        stepped = _damped_step(system.residual, system.jacobian, z, F)
        if stepped is None:
            return None
        z, F = stepped
    return z if np.linalg.norm(F) < LOOP_RESIDUAL else None


def _polish(system: _Shooting, z: np.ndarray) -> np.ndarray:
    """
    Shorten a confirmed pair along the solution set with SLSQP; keeps ``z``
    unless the result is feasible and strictly shorter.
    """
    n = system.rays.dim
    bounds = None
    if system.rays.null:
        bounds = ([(0.0, None)] + [(None, None)] * (n - 1)) * 2
    try:
        result = minimize(
            system.length,
            z,
            jac=system.length_gradient,
            method="SLSQP",
            bounds=bounds,
            constraints=[
                {
                    "type": "eq",
                    "fun": system.residual,
                    "jac": system.jacobian,
                }
            ],
            options={"maxiter": 50, "ftol": system.tol.newton},
        )
        better = result.x
        if (
            np.linalg.norm(system.residual(better)) < LOOP_RESIDUAL
            and system.length(better) < system.length(z)
        ):
            return better
    except (ChartError, ArithmeticError, ValueError) as exc:
        debug("Loop polish abandoned: %s", exc)
    return z


def detect_short_loops(
    spec: MetricSpec,
    obs: Observer,
    r: float,
    grid_density: int = 256,
    shells: int = 12,
    delta: Optional[float] = None,
    null: bool = False,
    max_candidates: int = 8,
    polish: bool = True,
    tol: Tolerances = DEFAULT_TOLERANCES,
    workers: int = 1,
) -> LoopSearch:
    """
    Search ``B_T(0, r)`` (or its past null cone with ``null=True``) for
    pairs of distinct geodesics from ``p`` that meet again.

    ``exp`` is evaluated on ``grid_density`` low-discrepancy directions,
    augmented with the frame axes, times ``shells`` radii plus the origin.
    Image pairs closer than ``2 delta`` (``g_T`` units at ``p``) whose
    preimages are more than ``4 delta`` apart, scaled by the distortion of
    ``g_T`` against the chart, are candidates; the shortest few are
    confirmed by a damped two-ray Newton solve and then shortened along the
    solution set.

    :param delta: Cell size; defaults to half the radial grid step.
    """
    if r <= 0:
        raise ValueError("search radius must be positive")
    dim = spec.dim
    rays = _Rays(dim, null)
    frame = complete_frame(spec, obs).vectors
    delta = r / (2.0 * shells) if delta is None else float(delta)
    axes = np.vstack([np.eye(dim - 1), -np.eye(dim - 1)])
    if null:
        dirs = direction_set("null", dim, grid_density)
        extra = np.hstack([-np.ones((len(axes), 1)), axes]) / SQRT2
    else:
        dirs = direction_set("all", dim, grid_density)
        extra = np.vstack([np.eye(dim), -np.eye(dim)])
    dirs = np.vstack([dirs, extra])
    fan = ray_fan(spec, obs, dirs, r, tol, workers)
    radii = r * np.arange(1, shells + 1) / shells
    params = [rays.start(dirs[0], 0.0)]
    images = [obs.point.copy()]
    for u, geo in zip(dirs, fan):
        for s in radii:
            if s > geo.s_end:
                break
            params.append(rays.start(u, s))
            images.append(geo.point(s))
    params_arr = np.array(params)
    vectors = np.array([rays.vector(q) for q in params_arr])

    eig = np.linalg.eigvalsh(reference_metric_at(spec, obs).gT)
    distortion = math.sqrt(eig[-1] / eig[0])
    separation = 4.0 * delta * distortion
    reach = 2.0 * delta / math.sqrt(eig[0])
    pairs = _close_pairs(spec, np.array(images), reach)
    pairs = np.asarray(pairs, dtype=int).reshape(-1, 2)
    gaps = np.linalg.norm(vectors[pairs[:, 0]] - vectors[pairs[:, 1]], axis=1)
    pairs = pairs[gaps > separation]
    estimate = np.array(
        [
            rays.length(params_arr[i]) + rays.length(params_arr[j])
            for i, j in pairs
        ]
    )
    chosen: list[tuple[int, int]] = []
    for index in np.argsort(estimate, kind="stable"):
        i, j = (int(k) for k in pairs[index])
        duplicate = any(
            min(
                max(
                    np.linalg.norm(vectors[i] - vectors[a]),
                    np.linalg.norm(vectors[j] - vectors[b]),
                ),
                max(
                    np.linalg.norm(vectors[i] - vectors[b]),
                    np.linalg.norm(vectors[j] - vectors[a]),
                ),
            )
            < separation
            for a, b in chosen
        )
        if not duplicate:
            chosen.append((i, j))
        if len(chosen) >= max_candidates:
            break

    def confirm(pair: tuple[int, int]) -> Optional[Loop]:
        system = _Shooting(spec, obs.point, frame, rays, tol)
        z = np.concatenate([params_arr[pair[0]], params_arr[pair[1]]])
        try:
            solved = _newton(system, z)
        except ChartError as exc:
            debug("Loop candidate %s left the chart: %s", pair, exc)
            return None
        if solved is None:
            debug("Loop candidate %s did not converge", pair)
            return None
        if polish:
            solved = _polish(system, solved)
        y_i = rays.vector(solved[:dim])
        y_j = rays.vector(solved[dim:])
        if np.linalg.norm(y_i - y_j) <= separation:
            debug("Loop candidate %s collapsed onto one geodesic", pair)
            return None
        residual = float(np.linalg.norm(system.residual(solved)))
        return Loop(y_i, y_j, residual)

    confirmed = run_batch(confirm, chosen, workers)
    loops = [loop for loop in confirmed if loop is not None]
    search = LoopSearch(
        radius=r,
        delta=delta,
        separation=separation,
        points=len(images),
        candidates=len(pairs),
        refined=len(chosen),
        diverged=len(chosen) - len(loops),
        loops=loops,
        null=null,
    )
    debug(
        "Loop search r=%g: %d points, %d candidates, %d confirmed, "
        "shortest %s",
        r,
        search.points,
        search.candidates,
        len(loops),
        search.shortest,
    )
    return search


def chart_radius(spec: MetricSpec, obs: Observer) -> float:
    """
    ``g_T`` radius around ``p`` on which the chart coordinates are a true
    chart: the distance to the chart edge, and half the shortest period
    on lattice quotients.
    """
    eig = np.linalg.eigvalsh(reference_metric_at(spec, obs).gT)
    reach = float(spec.domain.margin(obs.point)[0])
    for axis in range(spec.dim):
        period = spec.domain.period(axis)
        if period is not None:
            reach = min(reach, period / 2.0)
    return reach * math.sqrt(float(eig[0]))


@dataclass
class MainBound:
    """
    The volume lower bound ``c_n vol(B_T(p, c_n r0)) / r0^{n+1} * r0``
    and its curvature hypothesis ``|Riem|_{T_gamma} <= 1 / r0^2``, sampled
    along rays.
    """

    value: float
    r0: float
    c_n: float
    volume: ConeVolume
    curvature: float
    curvature_violations: int
    samples: int

    @property
    def ratio(self) -> float:
        return self.value / self.r0

    @property
    def hypothesis_holds(self) -> bool:
        return self.curvature_violations == 0


def _curvature_along_rays(
    spec: MetricSpec,
    obs: Observer,
    r0: float,
    rays: int,
    per_ray: int,
    tol: Tolerances,
    workers: int,
) -> tuple[float, int, int]:
    dirs = direction_set("all", spec.dim, rays)
    fan = ray_fan(spec, obs, dirs, r0, tol, workers)
    limit = 1.0 / r0**2
    largest = 0.0
    violations = samples = 0
    for geo in fan:
        for s in np.linspace(0.0, geo.s_end, per_ray):
            state = geo.at(s)
            try:
                _, riem = connection_and_curvature(spec, state["x"])
            except (ChartError, ArithmeticError):
                continue
            size = frame_norm(riem, state["E"])
            samples += 1
            largest = max(largest, size)
            if size > limit * (1 + 1e-9):
                violations += 1
    return largest, violations, samples


def theorem_main_bound(
    spec: MetricSpec,
    obs: Observer,
    r0: float,
    constants: BoundConstants = DEFAULT_CONSTANTS,
    nodes: int = 16,
    rays: int = 16,
    per_ray: int = 5,
    tol: Tolerances = DEFAULT_TOLERANCES,
    workers: int = 1,
) -> MainBound:
    """
    Evaluate the volume lower bound on the injectivity radius at scale
    ``r0``.

    The ball volume is the exp-image volume of `.volume.ball_exp_volume`
    (with multiplicity). Curvature-hypothesis violations are counted, not
    raised.
    """
    if not r0 > 0:
        raise ValueError("r0 must be positive")
    c_n = constants.c_n
    volume = ball_exp_volume(
        spec, obs, c_n * r0, nodes=nodes, tol=tol, workers=workers
    )
    value = c_n * volume.value / r0**spec.dim * r0
    largest, violations, samples = _curvature_along_rays(
        spec, obs, r0, rays, per_ray, tol, workers
    )
    bound = MainBound(
        value=value,
        r0=r0,
        c_n=c_n,
        volume=volume,
        curvature=largest,
        curvature_violations=violations,
        samples=samples,
    )
    debug(
        "Main bound at r0=%g: %.8g (curvature %.4g, %d violations)",
        r0,
        value,
        largest,
        violations,
    )
    return bound


def _text(value: Optional[float]) -> str:
    return "none" if value is None else "{:.10g}".format(value)


@dataclass
class RadiusReport:
    """
    Injectivity radius estimate with the bounds evaluated next to it.

    ``inj_estimate`` is the smallest of the conjugate radius, half the
    shortest loop, ``r_max`` and the radius where ``exp`` stopped being
    defined.
    """

    kind: str
    r_max: float
    conj_radius: Optional[float]
    shortest_loop: Optional[float]
    exp_radius: float
    thm_foliated_bound: Optional[float] = None
    thm_main_bound: Optional[float] = None
    thm_null_bound: Optional[float] = None
    diagnostics: dict[str, Any] = field(default_factory=dict)

    HEADER = (
        "kind",
        "r_max",
        "conj_radius",
        "shortest_loop",
        "inj_estimate",
        "thm_foliated_bound",
        "thm_main_bound",
        "thm_null_bound",
        "bounds_hold",
    )

    @property
    def inj_estimate(self) -> float:
        candidates = [self.r_max, self.exp_radius]
        if self.conj_radius is not None:
            candidates.append(self.conj_radius)
        if self.shortest_loop is not None:
            candidates.append(self.shortest_loop / 2.0)
        return min(candidates)

    def bounds(self) -> dict[str, Optional[float]]:
        return {
            "thm_foliated_bound": self.thm_foliated_bound,
            "thm_main_bound": self.thm_main_bound,
            "thm_null_bound": self.thm_null_bound,
        }

    @property
    def violations(self) -> list[str]:
        """
        Names of evaluated bounds exceeding the estimate.
        """
        estimate = self.inj_estimate
        return [
            name
            for name, value in self.bounds().items()
            if value is not None
            and math.isfinite(value)
            and value > estimate * (1 + 1e-9)
        ]

    @property
    def bounds_hold(self) -> bool:
        return not self.violations

    def to_row(self) -> list[str]:
        return [
            self.kind,
            "{:.10g}".format(self.r_max),
            _text(self.conj_radius),
            _text(self.shortest_loop),
            "{:.10g}".format(self.inj_estimate),
            _text(self.thm_foliated_bound),
            _text(self.thm_main_bound),
            _text(self.thm_null_bound),
            "yes" if self.bounds_hold else "no",
        ]

    def to_text(self) -> str:
        conj = (
            "none <= {:g}".format(self.r_max)
            if self.conj_radius is None
            else _text(self.conj_radius)
        )
        lines = [
            "{} injectivity radius".format(self.kind),
            "  conjugate radius:   {}".format(conj),
            "  shortest loop:      {}".format(_text(self.shortest_loop)),
            "  exp defined up to:  {:.10g}".format(self.exp_radius),
            "  estimate:           {:.10g}".format(self.inj_estimate),
        ]
        for name, value in self.bounds().items():
            if value is not None:
                lines.append("  {}: {}".format(name, _text(value)))
        lines.append(
            "  bounds below estimate: {}".format(
                "yes" if self.bounds_hold else ", ".join(self.violations)
            )
        )
        if self.diagnostics:
            lines.append("  diagnostics:")
            for key in sorted(self.diagnostics):
                lines.append("    {}: {}".format(key, self.diagnostics[key]))
        return "\n".join(lines) + "\n"


def injectivity_radius(
    spec: MetricSpec,
    obs: Observer,
    r_max: float,
    n_dirs: int = 64,
    grid_density: int = 256,
    shells: int = 12,
    r0: Optional[float] = None,
    constants: BoundConstants = DEFAULT_CONSTANTS,
    loops: bool = True,
    bounds: bool = True,
    tol: Tolerances = DEFAULT_TOLERANCES,
    workers: int = 1,
) -> RadiusReport:
    """
    Estimate the injectivity radius at ``obs`` within ``B_T(0, r_max)``.

    :param r0: Scale of the bounds; defaults to ``r_max`` capped by
        `chart_radius`.
    :param loops: Run the loop search (otherwise only conjugate points
        limit the estimate).
    :param bounds: Evaluate the foliated and the volume lower bounds.

    Component failures are recorded in ``diagnostics``.
    """
    diagnostics: dict[str, Any] = {"n_dirs": n_dirs, "rtol": tol.rtol}
    conj = None
    exp_radius = r_max
    try:
        search = conjugate_radius(
            spec, obs, r_max, n_dirs, "all", tol, workers
        )
        conj = search.minimum
        stopped = [
            r.searched for r in search.results if r.termination != REACHED
        ]
        exp_radius = min(stopped, default=r_max)
        diagnostics["conjugate_failures"] = search.failures
    except (ValueError, ArithmeticError) as exc:
        diagnostics["conjugate_error"] = str(exc)
    shortest = None
    if loops:
        try:
            found = detect_short_loops(
                spec,
                obs,
                r_max,
                grid_density,
                shells,
                tol=tol,
                workers=workers,
            )
            shortest = found.shortest
            diagnostics.update(found.diagnostics())
        except (ValueError, ArithmeticError) as exc:
            diagnostics["loop_error"] = str(exc)
    report = RadiusReport(
        kind="timelike-ball",
        r_max=r_max,
        conj_radius=conj,
        shortest_loop=shortest,
        exp_radius=exp_radius,
        diagnostics=diagnostics,
    )
    if bounds:
        scale = min(r_max, chart_radius(spec, obs)) if r0 is None else r0
        diagnostics["r0"] = scale
        if spec.foliated:
            try:
                measured = measure_bounds(spec, obs, scale)
                chain = theorem_foliated_bound(
                    measured, constants.eps, spec.n, constants.kappa
                )
                report.thm_foliated_bound = chain.i0
                diagnostics["foliated_binding"] = chain.binding
            except (BoundError, SpecError, ValueError) as exc:
                diagnostics["thm_foliated_error"] = str(exc)
        try:
            main = theorem_main_bound(
                spec, obs, scale, constants, tol=tol, workers=workers
            )
            report.thm_main_bound = main.value
            diagnostics["main_coverage"] = main.volume.coverage
            diagnostics["curvature_violations"] = main.curvature_violations
        except (ValueError, ArithmeticError) as exc:
            diagnostics["thm_main_error"] = str(exc)
    debug("Injectivity estimate %.8g", report.inj_estimate)
    return report
