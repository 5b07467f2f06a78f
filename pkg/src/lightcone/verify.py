"""
The invariant suite run by ``lightcone verify``.

Each check is a small function taking the fault to inject (or ``None``) and
returning a `CheckResult`. Checks build their own builtin models, so the
suite needs no input besides the fault name.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass
from typing import Callable, Optional, Sequence

import numpy as np
from lexicon import Lexicon

from .cone import cone_graph
from .config import DEFAULT_TOLERANCES, Tolerances
from .convexity import build_synchronous_chart, convexity_check
from .frames import complete_frame, connection_gap, observer
from .geodesic import integrate_geodesic, transport_frame
from .jacobi import first_conjugate
from .lattices import sphere_area
from .models import MODELS
from .radius import detect_short_loops
from .spacetime import (
    FAULTS,
    MetricSpec,
    builtin,
    parse_metric_spec,
    riemann_at,
)
from .util import debug
from .volume import ConeSpec, comparison_ratio_curve, model_volume


@dataclass(frozen=True)
class CheckResult:
    name: str
    passed: bool
    detail: str
    seconds: float = 0.0


Check = Callable[[Optional[str], Tolerances], CheckResult]


def _model(name: str, fault: Optional[str], **params: float) -> MetricSpec:
    spec = builtin(name, **params)
    return spec if fault is None else spec.with_fault(fault)


def _result(name: str, passed: bool, detail: str, *args: float):
    return CheckResult(name, bool(passed), detail.format(*args))


def flat_curvature(fault: Optional[str], tol: Tolerances) -> CheckResult:
    spec = _model("minkowski", fault)
    worst = max(
        float(np.max(np.abs(riemann_at(spec, (0.3, 1, -2, 0.5), m).riem)))
        for m in ("analytic", "fd")
    )
    return _result(
        "flat-curvature", worst < 1e-8, "max |Riem| = {:.3g}", worst
    )


def jacobi_sinh(fault: Optional[str], tol: Tolerances) -> CheckResult:
    """
    Orthogonal Jacobi field along the observer's worldline in de Sitter
    slicing grows like ``sinh(s)``.
    """
    spec = _model("desitter_slicing", fault, K=1.0)
    obs = observer(spec, np.zeros(spec.dim))
    E = complete_frame(spec, obs).vectors
    initial = np.zeros((spec.dim, 1))
    initial[1, 0] = 1.0
    geo = integrate_geodesic(
        spec,
        obs.point,
        E[:, 0],
        2.0,
        tol,
        frame=E,
        jacobi=(np.zeros((spec.dim, 1)), initial),
    )
    assert geo.A is not None
    F = float(np.linalg.norm(geo.A[-1][:, 0]))
    error = abs(F / math.sinh(geo.s_end) - 1.0)
    return _result(
        "jacobi-sinh",
        geo.ok and error < 1e-6,
        "F(2) / sinh(2) - 1 = {:.3g}",
        error,
    )


def sphere_conjugate(fault: Optional[str], tol: Tolerances) -> CheckResult:
    spec = _model("static_sphere", fault, K=1.0)
    # The unit circle is a great circle that stays inside the stereographic
    # chart; rays through the origin reach the antipode only at infinity.
    obs = observer(spec, (0.0, 1.0, 0.0, 0.0))
    found = first_conjugate(spec, obs, (0.0, 0.0, 1.0, 0.0), 4.0, tol)
    if found.s_star is None:
        return CheckResult(
            "sphere-conjugate", False, "no conjugate point before 4"
        )
    error = abs(found.s_star - math.pi)
    return _result(
        "sphere-conjugate",
        error < 1e-3,
        "first conjugate at {:.8g} (pi off by {:.3g})",
        found.s_star,
        error,
    )


def _schwarzschild_ray(fault: Optional[str], tol: Tolerances):
    spec = _model("schwarzschild", fault, M=1.0)
    obs = observer(spec, (0.0, 6.0, 0.0, 0.0))
    E = complete_frame(spec, obs).vectors
    u = np.array([1.0, 0.2, 0.5, -0.1])
    geo = integrate_geodesic(spec, obs.point, E @ u, 1.0, tol, frame=E)
    return spec, E, geo


def geodesic_drift(fault: Optional[str], tol: Tolerances) -> CheckResult:
    _, _, geo = _schwarzschild_ray(fault, tol)
    drift = math.inf if geo.norm_drift is None else max(geo.norm_drift)
    return _result(
        "geodesic-drift",
        geo.ok and drift < 1e-8,
        "max |g(v,v) drift| = {:.3g}",
        drift,
    )


def frame_transport(fault: Optional[str], tol: Tolerances) -> CheckResult:
    spec, E, geo = _schwarzschild_ray(fault, tol)
    residual = transport_frame(spec, geo, E, tol).max_residual
    return _result(
        "frame-transport",
        residual < 1e-8,
        "max eta residual = {:.3g}",
        residual,
    )


def connection_comparison(
    fault: Optional[str], tol: Tolerances
) -> CheckResult:
    """
    ``|Gamma_gT - Gamma_g|_T <= sqrt(2) |L_T g|_T`` at 100 points of every
    foliated builtin model. The quadratic ``exp(2 K0) K1^2`` form is
    reported alongside; Schwarzschild breaks it.
    """
    failed: list[str] = []
    quadratic: list[str] = []
    for name in MODELS.keys():
        spec = _model(name, fault)
        if not spec.foliated:
            continue
        report = connection_gap(spec, count=100)
        if not report.linear_holds:
            failed.append(name)
        if report.violations():
            quadratic.append("{} {:d}".format(name, report.violations()))
    detail = "linear form fails on {}".format(", ".join(failed))
    if not failed:
        detail = "linear form holds; quadratic violations: {}".format(
            ", ".join(quadratic) or "none"
        )
    return CheckResult("connection-gap", not failed, detail)


def torus_loop(fault: Optional[str], tol: Tolerances) -> CheckResult:
    spec = _model("flat_spatial_torus", fault, L=2.0)
    obs = observer(spec, np.zeros(spec.dim))
    found = detect_short_loops(
        spec, obs, 1.5, grid_density=64, shells=6, tol=tol
    )
    if found.shortest is None:
        return CheckResult("torus-loop", False, "no loop below 3")
    length = found.shortest
    return _result(
        "torus-loop",
        abs(length - 2.0) <= 0.04,
        "shortest loop {:.8g} (expected 2)",
        length,
    )


def flat_volume_ratio(fault: Optional[str], tol: Tolerances) -> CheckResult:
    spec = _model("minkowski", fault)
    obs = observer(spec, np.zeros(spec.dim))
    curve = comparison_ratio_curve(
        spec,
        obs,
        ConeSpec.ball(spec.dim, 4, 8),
        [0.25, 0.5, 1.0],
        K2=0.0,
        tol=tol,
    )
    spread = float(np.max(np.abs(curve.ratios - 1.0)))
    return _result(
        "flat-volume-ratio",
        spread < 1e-6 and curve.violations == 0,
        "max |ratio - 1| = {:.3g}",
        spread,
    )


def model_antiderivative(
    fault: Optional[str], tol: Tolerances
) -> CheckResult:
    r = 1.3
    c = math.cosh(r)
    exact = sphere_area(4) * (c**3 / 3.0 - c + 2.0 / 3.0)
    error = abs(model_volume(1.0, r, 3) / exact - 1.0)
    return _result(
        "model-volume",
        error < 1e-9,
        "relative error {:.3g} against the antiderivative",
        error,
    )


def minkowski_cone(fault: Optional[str], tol: Tolerances) -> CheckResult:
    spec = _model("minkowski", fault)
    obs = observer(spec, np.zeros(spec.dim))
    graph = cone_graph(spec, obs, 1.0, grid=5, tol=tol)
    error = abs(graph.lipschitz - 1.0)
    excluded = sum(graph.excluded.values())
    return _result(
        "minkowski-cone",
        error < 1e-6 and not excluded,
        "Lipschitz {:.10g}, {:d} point(s) excluded",
        graph.lipschitz,
        excluded,
    )


def convexity_window(fault: Optional[str], tol: Tolerances) -> CheckResult:
    """
    ``Hess u`` against ``g_T``: exactly 2 in flat space, and inside the
    ``eps = 0.1`` window on a small de Sitter slicing ball.
    """
    flat = _model("minkowski", fault, dim=3)
    obs = observer(flat, np.zeros(flat.dim))
    chart = build_synchronous_chart(flat, obs, 1.0, grid=5, tol=tol)
    report = convexity_check(flat, obs, chart, eps=0.1, tol=tol)
    curved = _model("desitter_slicing", fault, dim=3, K=1.0)
    cobs = observer(curved, np.zeros(curved.dim))
    cchart = build_synchronous_chart(curved, cobs, 0.1, grid=5, tol=tol)
    creport = convexity_check(curved, cobs, cchart, eps=0.1, tol=tol)
    return _result(
        "convexity",
        report.fraction_within(1e-6) == 1.0
        and report.coverage == 1.0
        and creport.holds
        and creport.coverage == 1.0,
        "flat eps {:.3g}, de Sitter eps {:.3g}",
        report.measured_eps,
        creport.measured_eps,
    )


# Flat space with light at half speed: g_ij = 4 delta_ij
_SLOW_LIGHT = """
[model]
dim = 4
[lapse]
lapse = "1"
[spatial]
g11 = 4; g22 = 4; g33 = 4
"""


def slow_light_cone(fault: Optional[str], tol: Tolerances) -> CheckResult:
    spec = parse_metric_spec(_SLOW_LIGHT)
    if fault is not None:
        spec = spec.with_fault(fault)
    obs = observer(spec, np.zeros(spec.dim))
    graph = cone_graph(spec, obs, 0.5, grid=3, tol=tol)
    error = abs(graph.lipschitz - 0.5)
    return _result(
        "slow-light-cone",
        error < 1e-6 and graph.holds,
        "Lipschitz {:.10g} against C1 {:.10g}",
        graph.lipschitz,
        graph.lipschitz_bound,
    )


SUITE = Lexicon()
for _name, _check in (
    ("flat-curvature", flat_curvature),
    ("jacobi-sinh", jacobi_sinh),
    ("sphere-conjugate", sphere_conjugate),
    ("geodesic-drift", geodesic_drift),
    ("frame-transport", frame_transport),
    ("connection-gap", connection_comparison),
    ("torus-loop", torus_loop),
    ("flat-volume-ratio", flat_volume_ratio),
    ("model-volume", model_antiderivative),
    ("minkowski-cone", minkowski_cone),
    ("slow-light-cone", slow_light_cone),
    ("convexity", convexity_window),
):
    SUITE[_name] = _check
SUITE.alias("gap", to="connection-gap")
SUITE.alias("loops", to="torus-loop")
SUITE.alias("cone", to="slow-light-cone")


def run_suite(
    names: Optional[Sequence[str]] = None,
    fault: Optional[str] = None,
    tol: Tolerances = DEFAULT_TOLERANCES,
) -> list[CheckResult]:
    """
    Run the named checks (all of them by default) with ``fault`` injected.

    A check that raises counts as failed, with the exception as its detail.
    """
    if fault is not None and fault not in FAULTS:
        raise ValueError(
            "unknown fault {!r}; expected one of {}".format(fault, FAULTS)
        )
    selected = list(SUITE.keys()) if names is None else list(names)
    results = []
    for name in selected:
        check: Check = SUITE[name]
        start = time.perf_counter()
        try:
            result = check(fault, tol)
        except (ValueError, ArithmeticError) as exc:
            result = CheckResult(name, False, "raised {!r}".format(exc))
        elapsed = time.perf_counter() - start
        result = CheckResult(
            result.name, result.passed, result.detail, elapsed
        )
        debug(
            "Check %s: %s (%s)",
            result.name,
            "ok" if result.passed else "FAILED",
            result.detail,
        )
        results.append(result)
    return results
