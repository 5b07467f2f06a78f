"""
The ``lightcone`` commands.

Every task resolves a `.RunConfig` from its flags and the config hierarchy,
runs one analysis, and writes a `.ReportBundle`. Exit codes: 0 on success,
1 when an analysis fails a check, 2 for bad input (flags, metric documents,
observers).
"""

from __future__ import annotations

import csv
import io
import math
from contextlib import contextmanager
from typing import TYPE_CHECKING, Any, Iterator, Optional

import numpy as np
from invoke import Exit, task

from .bounds import BoundConstants
from .cone import cone_graph, localize_null_cone, null_injectivity_radius
from .config import RunConfig
from .convexity import build_synchronous_chart, convexity_check
from .exceptions import (
    BoundError,
    ChartError,
    FrameError,
    NonFiniteError,
    ParseError,
    SpecError,
    ThreadException,
)
from .frames import Observer, complete_frame, measure_bounds, observer
from .geodesic import integrate_geodesic, transport_frame
from .radius import RadiusReport, injectivity_radius
from .reports import ReportBundle
from .spacetime import (
    METHODS,
    MetricSpec,
    builtin,
    christoffel_at,
    metric_at,
    parse_metric_spec,
    probe_points,
    riemann_at,
)
from .verify import SUITE, run_suite
from .volume import ConeSpec, comparison_ratio_curve, future_cone_volume

if TYPE_CHECKING:
    from invoke import Context

#: Exit code for analysis failures.
FAILED = 1
#: Exit code for configuration and parse errors.
BAD_INPUT = 2

COMMON_HELP = {
    "spec": "Metric-spec document path, or builtin:NAME[,key=value...].",
    "point": "Base point as comma-separated chart coordinates.",
    "T": "Observer vector (chart components) or 'foliation-normal'.",
    "rmax": "Largest g_T radius searched.",
    "grid": "Grid size of the command's sampling.",
    "tol": "Relative integrator tolerance.",
    "out": "Output directory (default: output.directory/COMMAND).",
    "seed": "Seed recorded in every report.",
    "format": "Data file format: csv or plotdata.",
}


def _help(**extra: str) -> dict[str, str]:
    return dict(COMMON_HELP, **extra)


def _without(help: dict[str, str], *names: str) -> dict[str, str]:
    return {k: v for k, v in help.items() if k not in names}


def load_spec(source: str) -> MetricSpec:
    """
    Load ``builtin:NAME[,key=value...]`` or a metric-spec document file.
    """
    if source.startswith("builtin:"):
        name, *pairs = source[len("builtin:") :].split(",")
        params: dict[str, Any] = {}
        for pair in pairs:
            key, sep, value = pair.partition("=")
            if not sep:
                raise SpecError("expected key=value, got {!r}".format(pair))
            params[key.strip()] = value.strip()
        dim = int(params.pop("dim", 4))
        for key, value in params.items():
            try:
                params[key] = float(value)
            except ValueError:
                pass
        return builtin(name.strip(), dim=dim, **params)
    try:
        with open(source, encoding="utf-8") as fd:
            text = fd.read()
    except OSError as exc:
        raise SpecError("cannot read metric spec {!r}: {}".format(source, exc))
    return parse_metric_spec(text)


@contextmanager
def bad_input() -> Iterator[None]:
    """
    Turn input errors raised inside the block into exit code 2.
    """
    try:
        yield
    except (ParseError, SpecError, FrameError, ChartError, ValueError) as exc:
        raise Exit("error: {}".format(exc), code=BAD_INPUT)


@contextmanager
def analysis() -> Iterator[None]:
    """
    Turn unrecoverable numeric errors into exit code 1.
    """
    try:
        yield
    except (
        ChartError,
        NonFiniteError,
        BoundError,
        ThreadException,
    ) as exc:
        raise Exit("analysis failed: {}".format(exc), code=FAILED)


def _setup(
    c: Context, command: str, **flags: Any
) -> tuple[RunConfig, MetricSpec, Observer, ReportBundle]:
    with bad_input():
        run = RunConfig.from_flags(c.config, command, **flags)
        spec = load_spec(run.spec)
        point = run.point if run.point is not None else (0.0,) * spec.dim
        obs = observer(spec, point, run.T)
        complete_frame(spec, obs)
    bundle = ReportBundle(
        command=command,
        directory=run.out,
        seed=run.seed,
        settings=run.settings(),
    )
    bundle.add_text(
        "metric: {}\nobserver at {}\nT = {}".format(
            spec.label, _vector(obs.point), _vector(obs.T)
        )
    )
    return run, spec, obs, bundle


def _vector(values: np.ndarray) -> str:
    return "(" + ", ".join("{:.10g}".format(v) for v in values) + ")"


def _table(header: list[str], rows: list[list[Any]]) -> str:
    out = io.StringIO()
    writer = csv.writer(out, lineterminator="\n")
    writer.writerow(header)
    for row in rows:
        writer.writerow(
            [
                "{:.12g}".format(v) if isinstance(v, float) else v
                for v in row
            ]
        )
    return out.getvalue()


def _finish(bundle: ReportBundle) -> None:
    path = bundle.write()
    print(bundle.report_text(), end="")
    print("Wrote {}".format(path))
    if not bundle.ok:
        names = ", ".join(name for name, _ in bundle.failures)
        raise Exit("failed: {}".format(names), code=FAILED)


@task(
    help=_without(
        _help(
            grid="Number of probe points when --point is not given.",
            method="Curvature evaluation: auto, analytic or fd.",
        ),
        "rmax",
    )
)
def describe(
    c: Context,
    spec: str,
    point: Optional[str] = None,
    T: Optional[str] = None,
    grid: int = 4,
    method: str = "auto",
    tol: Optional[float] = None,
    out: Optional[str] = None,
    seed: Optional[int] = None,
    format: Optional[str] = None,
) -> None:
    """
    Tabulate metric, Christoffel symbols and curvature at probe points.
    """
    run, metric, obs, bundle = _setup(
        c,
        "describe",
        spec=spec,
        point=point,
        T=T,
        grid=grid,
        tol=tol,
        out=out,
        seed=seed,
        format=format,
    )
    with bad_input():
        if method not in METHODS:
            raise SpecError("unknown --method {!r}".format(method))
        if method == "analytic" and not metric.foliated:
            raise SpecError("--method analytic needs a foliated metric")
        if run.point is None:
            points = probe_points(metric, run.grid, run.seed)
        else:
            points = np.array([obs.point])
    g_rows: list[list[Any]] = []
    gamma_rows: list[list[Any]] = []
    riem_rows: list[list[Any]] = []
    N = metric.dim
    with analysis():
        for k, x in enumerate(points):
            g = metric_at(metric, x)
            gamma = christoffel_at(metric, x, method).gamma
            curvature = riemann_at(metric, x, method)
            for a in range(N):
                for b in range(N):
                    g_rows.append([k, a, b, float(g.g[a, b])])
                    for d in range(N):
                        value = float(gamma[d, a, b])
                        gamma_rows.append([k, d, a, b, value])
            for index in np.ndindex(*curvature.riem.shape):
                value = float(curvature.riem[index])
                if value != 0.0:
                    riem_rows.append([k, *index, value])
            residuals = curvature.symmetry_residuals()
            bundle.add_row(
                "describe",
                probe=k,
                point=_vector(x),
                signature="{}/{}".format(*g.signature()),
                max_riem=float(np.max(np.abs(curvature.riem))),
                max_symmetry_residual=max(residuals.values()),
            )
    head = ["probe"]
    bundle.add_file(
        "metric.csv", _table(head + ["a", "b", "g_ab"], g_rows), "g_ab"
    )
    bundle.add_file(
        "christoffel.csv",
        _table(head + ["c", "a", "b", "Gamma^c_ab"], gamma_rows),
        "Gamma^c_ab",
    )
    bundle.add_file(
        "riemann.csv",
        _table(head + ["a", "b", "c", "d", "R_abcd"], riem_rows),
        "nonzero R_abcd = g(R(d_a, d_b) d_c, d_d)",
    )
    bundle.add_text(
        "{} probe point(s), {} nonzero curvature component(s)".format(
            len(points), len(riem_rows)
        )
    )
    _finish(bundle)


@task(
    help=_without(
        _help(
            direction="Initial velocity in observer-frame components.",
            smax="Affine parameter range.",
        ),
        "rmax",
        "grid",
    )
)
def geodesic(
    c: Context,
    spec: str,
    point: Optional[str] = None,
    T: Optional[str] = None,
    direction: str = "1,0,0,0",
    smax: float = 1.0,
    tol: Optional[float] = None,
    out: Optional[str] = None,
    seed: Optional[int] = None,
    format: Optional[str] = None,
) -> None:
    """
    Integrate one geodesic with its parallel frame.

    Writes the trajectory with its g(v, v) drift column and the frame's
    orthonormality residual along it.
    """
    run, metric, obs, bundle = _setup(
        c,
        "geodesic",
        spec=spec,
        point=point,
        T=T,
        rmax=smax,
        tol=tol,
        out=out,
        seed=seed,
        format=format,
    )
    with bad_input():
        u = np.array([float(v) for v in direction.split(",")])
        if len(u) != metric.dim:
            raise SpecError(
                "--direction needs {} components".format(metric.dim)
            )
    E = complete_frame(metric, obs).vectors
    with analysis():
        geo = integrate_geodesic(
            metric, obs.point, E @ u, run.r_max, run.tol, frame=E
        )
        frame = transport_frame(metric, geo, E, run.tol)
    drift = 0.0 if geo.norm_drift is None else float(max(geo.norm_drift))
    bundle.add_file("geodesic.csv", geo.to_csv(), "x(s), v(s), drift")
    bundle.add_file(
        "frame.csv",
        _table(
            ["s", "eta_residual"],
            [[float(s), float(r)] for s, r in zip(frame.s, frame.residuals)],
        ),
        "max |g(E_a, E_b) - eta_ab| along the ray",
    )
    bundle.add_row(
        "geodesic",
        termination=geo.termination,
        s_end=geo.s_end,
        max_norm_drift=drift,
        max_frame_residual=frame.max_residual,
    )
    bundle.add_text(
        "termination {} at s = {:.10g}\nmax drift {:.3g}, max frame "
        "residual {:.3g}".format(
            geo.termination, geo.s_end, drift, frame.max_residual
        )
    )
    if geo.termination == "step_failure":
        bundle.fail("integration", "step size underflow")
    _finish(bundle)


def _radius_table(report: RadiusReport) -> str:
    return _table(list(RadiusReport.HEADER), [report.to_row()])


@task(
    help=_help(
        grid="Loop-search grid density.",
        dirs="Conjugate-search direction count.",
        r0="Scale of the lower bounds (default: rmax capped by the chart).",
        convexity="Also check convexity in a synchronous chart.",
        eps="Convexity band half-width.",
    )
)
def radius(
    c: Context,
    spec: str,
    point: Optional[str] = None,
    T: Optional[str] = None,
    rmax: float = 10.0,
    grid: int = 256,
    dirs: int = 64,
    r0: Optional[float] = None,
    convexity: bool = False,
    eps: float = 0.1,
    tol: Optional[float] = None,
    out: Optional[str] = None,
    seed: Optional[int] = None,
    format: Optional[str] = None,
) -> None:
    """
    Estimate the injectivity radius and evaluate the lower bounds.
    """
    run, metric, obs, bundle = _setup(
        c,
        "radius",
        spec=spec,
        point=point,
        T=T,
        rmax=rmax,
        grid=grid,
        tol=tol,
        out=out,
        seed=seed,
        format=format,
    )
    constants = BoundConstants.from_config(c.config)
    with analysis():
        report = injectivity_radius(
            metric,
            obs,
            run.r_max,
            n_dirs=dirs,
            grid_density=run.grid,
            r0=r0,
            constants=constants,
            tol=run.tol,
            workers=run.threads,
        )
    bundle.add_row("radius", **dict(zip(RadiusReport.HEADER, report.to_row())))
    bundle.add_file("radius.csv", _radius_table(report), "RadiusReport")
    bundle.add_text(report.to_text())
    if not report.bounds_hold:
        bundle.fail(
            "theorem-bounds",
            "bound(s) above the estimate: {}".format(
                ", ".join(report.violations)
            ),
        )
    if convexity:
        scale = report.diagnostics.get("r0", min(run.r_max, 1.0))
        with analysis():
            chart = build_synchronous_chart(
                metric, obs, scale, tol=run.tol, workers=run.threads
            )
            check = convexity_check(
                metric, obs, chart, eps, tol=run.tol, workers=run.threads
            )
        bundle.add_file(
            "convexity.csv", check.to_csv(), "Hessian eigenvalues of u"
        )
        bundle.add_row(
            "convexity",
            eps=eps,
            eigen_min=check.eigen_min,
            eigen_max=check.eigen_max,
            measured_eps=check.measured_eps,
            chart_residual=chart.max_residual,
            holds=check.holds,
        )
        bundle.add_text(
            "convexity: eigenvalues in [{:.8g}, {:.8g}], eps {:g}".format(
                check.eigen_min, check.eigen_max, eps
            )
        )
        if not check.holds:
            bundle.fail("convexity", "eigenvalues outside [2-eps, 2+eps]")
    _finish(bundle)


@task(
    help=_help(
        grid="Cone-graph grid points per axis (odd).",
        radius="Spatial radius of the cone graph.",
        dirs="Direction count of null searches.",
        loops="Grid density of the null loop search.",
    )
)
def nullcone(
    c: Context,
    spec: str,
    point: Optional[str] = None,
    T: Optional[str] = None,
    rmax: float = 2.0,
    grid: int = 9,
    radius: float = 0.5,
    dirs: int = 64,
    loops: int = 256,
    tol: Optional[float] = None,
    out: Optional[str] = None,
    seed: Optional[int] = None,
    format: Optional[str] = None,
) -> None:
    """
    Localize the past null cone, graph it, and estimate the null
    injectivity radius.
    """
    run, metric, obs, bundle = _setup(
        c,
        "nullcone",
        spec=spec,
        point=point,
        T=T,
        rmax=rmax,
        grid=grid,
        tol=tol,
        out=out,
        seed=seed,
        format=format,
    )
    with bad_input():
        if not metric.foliated:
            raise SpecError("nullcone needs a foliated metric")
    with analysis():
        loc = localize_null_cone(
            metric, obs, 2.0 * radius, tol=run.tol, workers=run.threads
        )
        graph = cone_graph(
            metric, obs, radius, run.grid, tol=run.tol, workers=run.threads
        )
        report = null_injectivity_radius(
            metric,
            obs,
            run.r_max,
            n_dirs=dirs,
            grid_density=loops,
            tol=run.tol,
            workers=run.threads,
        )
    bundle.add_file(
        "annulus.csv", loc.to_csv(), "null rays against c1|t| <= |x| <= C1|t|"
    )
    if run.format == "plotdata":
        bundle.add_file("cone.dat", graph.plot_data(), "|x| tau")
    else:
        bundle.add_file("cone.csv", graph.to_csv(), "cone graph tau(q)")
    bundle.add_file("null-radius.csv", _radius_table(report), "RadiusReport")
    bundle.add_row("localization", **loc.as_dict())
    bundle.add_row(
        "cone-graph",
        lipschitz=graph.lipschitz,
        lipschitz_bound=graph.lipschitz_bound,
        slope=graph.slope,
        excluded=sum(graph.excluded.values()),
        annulus_violations=graph.annulus_violations,
    )
    bundle.add_row(
        "null-radius", **dict(zip(RadiusReport.HEADER, report.to_row()))
    )
    bundle.add_text(
        "flat cones: c1 = {:.8g}, C1 = {:.8g} ({} of {} samples inside)\n"
        "cone graph Lipschitz {:.8g} (bound {:.8g})".format(
            loc.c1,
            loc.C1,
            loc.checked - loc.violations,
            loc.checked,
            graph.lipschitz,
            graph.lipschitz_bound,
        )
    )
    bundle.add_text(report.to_text())
    if loc.violations:
        bundle.fail("annulus", "{} sample(s) outside".format(loc.violations))
    if not graph.holds:
        bundle.fail("cone-lipschitz", "cone spreads faster than C1")
    if not report.bounds_hold:
        bundle.fail("null-bound", "c1^6 r0 above the estimate")
    _finish(bundle)


@task(
    help=_help(
        rmax="Largest cone radius.",
        grid="Number of radii.",
        K2="Model curvature (default: measured |Riem| bound).",
        angle="Cap half-angle about T; pi/4 is the whole causal cone.",
        past="Use the past cone.",
    )
)
def volume(
    c: Context,
    spec: str,
    point: Optional[str] = None,
    T: Optional[str] = None,
    rmax: float = 1.0,
    grid: int = 20,
    K2: Optional[float] = None,
    angle: float = math.pi / 8,
    past: bool = False,
    tol: Optional[float] = None,
    out: Optional[str] = None,
    seed: Optional[int] = None,
    format: Optional[str] = None,
) -> None:
    """
    Cone volume against the constant-curvature model over increasing radii.
    """
    run, metric, obs, bundle = _setup(
        c,
        "volume",
        spec=spec,
        point=point,
        T=T,
        rmax=rmax,
        grid=grid,
        tol=tol,
        out=out,
        seed=seed,
        format=format,
    )
    with bad_input():
        orientation = "past" if past else "future"
        cone = ConeSpec.cap(metric.dim, angle, orientation)
    radii = np.linspace(run.r_max / run.grid, run.r_max, run.grid)
    with analysis():
        if K2 is None:
            K2 = measure_bounds(metric, obs, run.r_max).K2
        curve = comparison_ratio_curve(
            metric,
            obs,
            cone,
            radii,
            K2,
            tol=run.tol,
            workers=run.threads,
        )
        coarse = future_cone_volume(
            metric, obs, cone, run.r_max, 8, run.tol, run.threads
        )
    if run.format == "plotdata":
        bundle.add_file("volume.dat", curve.plot_data(), "r ratio")
    else:
        bundle.add_file("volume.csv", curve.to_csv(), "volume ratio curve")
    fine = float(curve.volumes[-1])
    bundle.add_row(
        "volume",
        K2=K2,
        radii=len(radii),
        ratio_first=float(curve.ratios[0]),
        ratio_last=float(curve.ratios[-1]),
        violations=curve.violations,
        ricci_checked=curve.ricci_checked,
        ricci_violations=curve.ricci_violations,
        coverage=curve.coverage,
    )
    bundle.add_row(
        "refinement",
        nodes_8=coarse.value,
        nodes_16=fine,
        relative_change=abs(coarse.value - fine) / max(abs(fine), 1e-300),
    )
    bundle.add_text(
        "{} cone, half-angle {:.6g}, K2 = {:.6g}\nratio {:.8g} -> {:.8g}, "
        "{} monotonicity violation(s), Ricci hypothesis failed at {} of {} "
        "sample(s)".format(
            orientation,
            angle,
            K2,
            curve.ratios[0],
            curve.ratios[-1],
            curve.violations,
            curve.ricci_violations,
            curve.ricci_checked,
        )
    )
    if curve.violations and not curve.ricci_violations:
        bundle.fail(
            "volume-monotonicity",
            "ratio grew at {} radius step(s)".format(curve.violations),
        )
    _finish(bundle)


@task(
    iterable=["check"],
    help={
        "check": "Run only this check (repeatable).",
        "inject": "Fault to inject, e.g. curvature-sign.",
        "available": "List the checks and exit.",
        "out": COMMON_HELP["out"],
        "seed": COMMON_HELP["seed"],
    },
)
def verify(
    c: Context,
    check: Optional[list[str]] = None,
    inject: Optional[str] = None,
    available: bool = False,
    out: Optional[str] = None,
    seed: Optional[int] = None,
) -> None:
    """
    Run the invariant suite over the builtin models.
    """
    if available:
        for name in SUITE.keys():
            print(name)
        return
    with bad_input():
        run = RunConfig.from_flags(
            c.config, "verify", spec="builtin", out=out, seed=seed
        )
        names = check or None
        if names is not None:
            unknown = [n for n in names if n not in SUITE]
            if unknown:
                raise ValueError(
                    "unknown check(s): {}".format(", ".join(unknown))
                )
        results = run_suite(names, fault=inject, tol=run.tol)
    bundle = ReportBundle(
        command="verify",
        directory=run.out,
        seed=run.seed,
        settings=dict(run.settings(), inject=inject),
    )
    lines = []
    for result in results:
        bundle.add_row(
            "verify",
            check=result.name,
            passed=result.passed,
            detail=result.detail,
        )
        lines.append(
            "{:<20} {:<6} {}".format(
                result.name, "ok" if result.passed else "FAIL", result.detail
            )
        )
        lines[-1] += " [{:.2f}s]".format(result.seconds)
        if not result.passed:
            bundle.fail(result.name, result.detail)
    if inject:
        lines.insert(0, "injected fault: {}".format(inject))
    bundle.add_text("\n".join(lines))
    _finish(bundle)
