"""
Past null cones: localization between flat cones, the graph over a slice,
and the null injectivity radius.

Coordinates are the chart's, shifted so that ``p`` sits at the origin; the
flat-cone slopes are the extreme coordinate speeds ``n / sqrt(lambda(h))``
of light over the sampled region, so a null curve through the region moves
between ``c1 |t|`` and ``C1 |t|`` in the Euclidean norm of the spatial
coordinates.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field
from itertools import product
from typing import Any, Optional

import numpy as np

from .config import DEFAULT_TOLERANCES, Tolerances
from .exceptions import ChartError, SpecError
from .flow import REACHED
from .frames import Observer, complete_frame
from .geodesic import exp_with_jacobian, ray_fan
from .jacobi import null_conjugate_radius
from .lattices import directions as direction_set
from .radius import (
    SQRT2,
    RadiusReport,
    _difference,
    _Rays,
    chart_radius,
    detect_short_loops,
)
from .spacetime import MetricSpec
from .util import debug, run_batch

#: Relative slack on annulus and Lipschitz comparisons.
SLACK = 1e-6


@dataclass
class AnnulusSample:
    ray: int
    s: float
    t: float
    rho: float
    inside: bool


@dataclass
class NullLocalization:
    """
    Flat cones bracketing the past null cone of ``p``.

    ``c0 <= n^2 <= C0`` over the sampled region; ``c1`` and ``C1`` are the
    slowest and fastest coordinate light speeds there. ``metric_C1`` is the
    plain metric comparability ``max(lambda_max(h), 1 / lambda_min(h))``
    for reference. ``samples`` holds the shot null-ray points checked
    against the annulus ``c1 |t| <= |x| <= C1 |t|``.
    """

    c0: float
    C0: float
    c1: float
    C1: float
    metric_C1: float
    t_range: float
    window: float
    metric_samples: int
    samples: list[AnnulusSample] = field(default_factory=list)

    @property
    def checked(self) -> int:
        return len(self.samples)

    @property
    def violations(self) -> int:
        return sum(not sample.inside for sample in self.samples)

    @property
    def fraction_inside(self) -> float:
        if not self.samples:
            return 1.0
        return 1.0 - self.violations / len(self.samples)

    def annulus(self, t: float) -> tuple[float, float]:
        return self.c1 * abs(t), self.C1 * abs(t)

    def as_dict(self) -> dict[str, float]:
        return {
            "c0": self.c0,
            "C0": self.C0,
            "c1": self.c1,
            "C1": self.C1,
            "metric_C1": self.metric_C1,
            "t_range": self.t_range,
            "checked": self.checked,
            "violations": self.violations,
        }

    def to_csv(self) -> str:
        out = io.StringIO()
        writer = csv.writer(out, lineterminator="\n")
        writer.writerow(["ray", "s", "t", "|x|", "c1|t|", "C1|t|", "inside"])
        for sample in self.samples:
            low, high = self.annulus(sample.t)
            writer.writerow(
                [sample.ray]
                + [
                    "{:.10g}".format(value)
                    for value in (sample.s, sample.t, sample.rho, low, high)
                ]
                + ["yes" if sample.inside else "no"]
            )
        return out.getvalue()


def _inside(rho: float, low: float, high: float) -> bool:
    return low * (1 - SLACK) - 1e-9 <= rho <= high * (1 + SLACK) + 1e-9


def _spatial_offset(spec: MetricSpec, x: np.ndarray, p: np.ndarray):
    d = _difference(spec, x, p)
    return float(d[0]), d[1:]


def localize_null_cone(
    spec: MetricSpec,
    obs: Observer,
    t_range: float,
    grid: int = 9,
    n_rays: int = 64,
    per_ray: int = 16,
    tol: Tolerances = DEFAULT_TOLERANCES,
    workers: int = 1,
) -> NullLocalization:
    """
    Measure the flat-cone constants on ``{-t_range <= t - t(p) <= 0,
    |x - x(p)| <= t_range}`` and check shot past null rays against the
    annulus they predict.

    Rays are checked while ``|t| <= window = t_range min(1, 1 / C1)``, so
    they stay inside the measured region.

    :raises: `.SpecError` for a metric without a foliation,
        `.ChartError` when the region does not fit in the chart.
    """
    if not spec.foliated:
        raise SpecError("null-cone localization needs a foliated metric")
    if not t_range > 0:
        raise ValueError("t_range must be positive")
    p = obs.point
    n = spec.n
    times = -t_range * np.linspace(0.0, 1.0, grid)
    axis = np.linspace(-t_range, t_range, grid)
    offsets = np.array(
        [
            (t,) + tuple(x)
            for t in times
            for x in product(axis, repeat=n)
            if math.fsum(c * c for c in x) <= t_range**2 * (1 + 1e-12)
        ]
    )
    region = p + offsets
    if not np.all(spec.domain.contains(region)):
        raise ChartError(
            "chart too small for t_range = {:g} around {}".format(
                t_range, tuple(p)
            ),
            p,
        )
    lapse = spec.lapse(region)
    eig = np.linalg.eigvalsh(spec.spatial(region))
    speeds_low = lapse / np.sqrt(eig[:, -1])
    speeds_high = lapse / np.sqrt(eig[:, 0])
    C0 = float(max(np.max(lapse**2), 1.0 / np.min(lapse**2)))
    loc = NullLocalization(
        c0=1.0 / C0,
        C0=C0,
        c1=float(np.min(speeds_low)),
        C1=float(np.max(speeds_high)),
        metric_C1=float(max(np.max(eig), 1.0 / np.min(eig))),
        t_range=t_range,
        window=t_range * min(1.0, 1.0 / float(np.max(speeds_high))),
        metric_samples=len(region),
    )
    s_max = 1.05 * SQRT2 * math.sqrt(C0) * loc.window
    dirs = direction_set("null", spec.dim, n_rays)
    fan = ray_fan(spec, obs, dirs, s_max, tol, workers)
    for index, geo in enumerate(fan):
        for s in np.linspace(0.0, geo.s_end, per_ray + 1)[1:]:
            t, spatial = _spatial_offset(spec, geo.point(s), p)
            if not 0 < -t <= loc.window:
                continue
            rho = float(np.linalg.norm(spatial))
            low, high = loc.annulus(t)
            loc.samples.append(
                AnnulusSample(index, float(s), t, rho, _inside(rho, low, high))
            )
    debug("Null cone localization: %s", loc.as_dict())
    return loc


@dataclass
class ConeGraph:
    """
    The past null cone as a graph ``t = tau(q)`` over the spatial grid
    ``q`` (offsets from ``p``).

    ``lipschitz`` is the empirical Lipschitz constant of the slice radius
    ``|x|`` against the depth ``|t|`` over grid-neighbor pairs, bounded by
    the fastest light speed ``C1``. ``slope`` is the steepest ``|dt| / |dq|``
    of the graph itself, bounded by ``1 / c1``.
    """

    q: np.ndarray
    tau: np.ndarray
    valid: np.ndarray
    lipschitz: float
    localization: NullLocalization
    slope: float = 0.0
    excluded: dict[str, int] = field(default_factory=dict)
    annulus_violations: int = 0

    @property
    def c1(self) -> float:
        return self.localization.c1

    @property
    def C1(self) -> float:
        return self.localization.C1

    @property
    def lipschitz_bound(self) -> float:
        return self.C1

    @property
    def slope_bound(self) -> float:
        return 1.0 / self.c1

    @property
    def holds(self) -> bool:
        return self.lipschitz <= self.lipschitz_bound * (1 + 1e-3)

    def samples(self, base: np.ndarray) -> np.ndarray:
        """
        Graph points ``F(q)`` in chart coordinates.
        """
        pts = np.column_stack([self.tau, self.q])[self.valid]
        return base + pts

    def to_csv(self) -> str:
        out = io.StringIO()
        writer = csv.writer(out, lineterminator="\n")
        n = self.q.shape[1]
        writer.writerow(
            ["q{}".format(i + 1) for i in range(n)] + ["|x|", "tau"]
        )
        for q, tau in zip(self.q[self.valid], self.tau[self.valid]):
            writer.writerow(
                ["{:.10g}".format(c) for c in q]
                + [
                    "{:.10g}".format(np.linalg.norm(q)),
                    "{:.10g}".format(tau),
                ]
            )
        return out.getvalue()

    def plot_data(self) -> str:
        """
        Two-column ``|x| tau`` text, sorted by ``|x|``.
        """
        radii = np.linalg.norm(self.q[self.valid], axis=1)
        taus = self.tau[self.valid]
        order = np.argsort(radii, kind="stable")
        lines = ["# |x| tau"] + [
            "{:.10g} {:.10g}".format(radii[k], taus[k]) for k in order
        ]
        return "\n".join(lines) + "\n"


def _crossing(
    spec: MetricSpec,
    obs: Observer,
    frame: np.ndarray,
    q: np.ndarray,
    tol: Tolerances,
) -> Optional[float]:
    """
    Time offset where the vertical line over ``q`` meets the past null
    cone, by Newton shooting of a past null geodesic onto the line.
    """
    rays = _Rays(spec.dim, null=True)
    v = np.linalg.solve(frame, np.concatenate([[0.0], q]))
    size = float(np.linalg.norm(v[1:]))
    z = np.concatenate([[SQRT2 * size], v[1:] / size])
    limit = max(tol.newton, 1e2 * tol.rtol) * max(1.0, size)

    def evaluate(z: np.ndarray):
        x, D, _ = exp_with_jacobian(
            spec, obs.point, frame, rays.vector(z), tol
        )
        t, offset = _spatial_offset(spec, x, obs.point)
        return t, offset - q, (D @ rays.jacobian(z))[1:]

    try:
        t, F, J = evaluate(z)
        for _ in range(25):
            if np.linalg.norm(F) < limit:
                return t
            step = np.linalg.lstsq(J, -F, rcond=None)[0]
            scale = 1.0
            while scale >= 1.0 / 64:
                trial = evaluate(z + scale * step)
                if np.linalg.norm(trial[1]) < np.linalg.norm(F):
                    break
                scale /= 2
            else:
                return None
            z = z + scale * step
            t, F, J = trial
    except (ChartError, np.linalg.LinAlgError, ArithmeticError) as exc:
        debug("Cone crossing over %s failed: %s", q, exc)
        return None
    return t if np.linalg.norm(F) < limit else None


def cone_graph(
    spec: MetricSpec,
    obs: Observer,
    radius: float,
    grid: int = 9,
    localization: Optional[NullLocalization] = None,
    tol: Tolerances = DEFAULT_TOLERANCES,
    workers: int = 1,
) -> ConeGraph:
    """
    Graph the past null cone over the spatial disk of ``radius`` about
    ``p`` (chart coordinates).

    Each crossing is bracketed by the localization annulus
    ``|q| / C1 <= |t| <= |q| / c1``; crossings outside it, or deeper than
    the localized window, are excluded and counted.
    """
    if not radius > 0:
        raise ValueError("radius must be positive")
    loc = localization
    if loc is None:
        loc = localize_null_cone(spec, obs, 2.0 * radius, tol=tol)
        if radius / loc.c1 >= loc.window:
            depth = 1.5 * radius / loc.c1
            loc = localize_null_cone(
                spec, obs, depth * max(1.0, loc.C1), tol=tol
            )
    frame = complete_frame(spec, obs).vectors
    n = spec.n
    axis = np.linspace(-radius, radius, grid)
    index = [
        idx
        for idx in product(range(grid), repeat=n)
        if np.linalg.norm(axis[list(idx)]) <= radius * (1 + 1e-12)
    ]
    q = np.array([axis[list(idx)] for idx in index])

    def solve(point: np.ndarray) -> Optional[float]:
        if not np.any(point):
            return 0.0
        return _crossing(spec, obs, frame, point, tol)

    crossings = run_batch(solve, list(q), workers)
    tau = np.full(len(q), math.nan)
    excluded = {"diverged": 0, "unbracketed": 0}
    violations = 0
    for k, t in enumerate(crossings):
        if t is None:
            excluded["diverged"] += 1
            continue
        rho = float(np.linalg.norm(q[k]))
        if rho > 0 and (
            -t > loc.window or not _inside(rho, loc.c1 * -t, loc.C1 * -t)
        ):
            excluded["unbracketed"] += 1
            violations += 1
            continue
        tau[k] = t
    valid = np.isfinite(tau)
    position = {idx: k for k, idx in enumerate(index)}
    radii = np.linalg.norm(q, axis=1)
    slope = spread = 0.0
    for idx, k in position.items():
        for a in range(n):
            step = list(idx)
            step[a] += 1
            j = position.get(tuple(step))
            if j is None or not (valid[k] and valid[j]):
                continue
            gap = float(np.linalg.norm(q[k] - q[j]))
            depth = abs(tau[k] - tau[j])
            slope = max(slope, depth / gap)
            # Pairs on nearly one slice carry no radial information
            radial = abs(radii[k] - radii[j])
            if radial >= 0.1 * gap and depth > 0:
                spread = max(spread, radial / depth)
    graph = ConeGraph(
        q=q,
        tau=tau,
        valid=valid,
        lipschitz=spread,
        localization=loc,
        slope=slope,
        excluded=excluded,
        annulus_violations=violations,
    )
    debug(
        "Cone graph over %d points: Lipschitz %.10g (bound %.10g)",
        int(np.sum(valid)),
        spread,
        graph.lipschitz_bound,
    )
    return graph


def null_injectivity_radius(
    spec: MetricSpec,
    obs: Observer,
    r_max: float,
    n_dirs: int = 64,
    grid_density: int = 256,
    shells: int = 12,
    r0: Optional[float] = None,
    loops: bool = True,
    tol: Tolerances = DEFAULT_TOLERANCES,
    workers: int = 1,
) -> RadiusReport:
    """
    Null variant of `.injectivity_radius`: null conjugate points, pairs of
    past null geodesics from ``p`` meeting again, and the bound
    ``c1^6 r0`` from the localization of the cone at scale ``r0``.
    """
    diagnostics: dict[str, Any] = {"n_dirs": n_dirs, "rtol": tol.rtol}
    conj = None
    exp_radius = r_max
    try:
        search = null_conjugate_radius(spec, obs, r_max, n_dirs, tol, workers)
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
                null=True,
                tol=tol,
                workers=workers,
            )
            shortest = found.shortest
            diagnostics.update(found.diagnostics())
        except (ValueError, ArithmeticError) as exc:
            diagnostics["loop_error"] = str(exc)
    report = RadiusReport(
        kind="null",
        r_max=r_max,
        conj_radius=conj,
        shortest_loop=shortest,
        exp_radius=exp_radius,
        diagnostics=diagnostics,
    )
    if spec.foliated:
        scale = min(r_max, chart_radius(spec, obs)) if r0 is None else r0
        diagnostics["r0"] = scale
        try:
            loc = localize_null_cone(spec, obs, scale, tol=tol)
            report.thm_null_bound = loc.c1**6 * scale
            diagnostics["c1"] = loc.c1
            diagnostics["annulus_violations"] = loc.violations
        except (ValueError, ArithmeticError) as exc:
            diagnostics["thm_null_error"] = str(exc)
    debug("Null injectivity estimate %.8g", report.inj_estimate)
    return report
