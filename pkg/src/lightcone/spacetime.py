"""
Spacetime metrics and their connection and curvature.

A `MetricSpec` is either a builtin model (see `lightcone.models`), a foliated
expression metric ``-n^2 dt^2 + h_ij dx^i dx^j`` or a general expression
metric giving every ``g_ab``. All evaluation functions are pure functions of
``(spec, point)``.

Curvature convention: ``riem[a, b, c, d] = g(R(d_a, d_b) d_c, d_d)`` with
``R(X, Y) = [nabla_X, nabla_Y] - nabla_[X,Y]``, so a space of constant
curvature ``K`` has ``riem = -K (g_ac g_bd - g_ad g_bc)`` and
``Ric = n K g``. Indices run over ``t, x1 .. xn`` in that order.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field, replace
from typing import Any, Callable, Mapping, Optional, Sequence, Union

import numpy as np
from scipy.stats import qmc

from .differences import Jet, jet_from_values, stencil
from .domain import ChartDomain
from .exceptions import NonFiniteError, ParseError, SpecError
from .models import Model, lookup
from .parser.document import Document, Value, parse_document, render_document
from .parser.expression import Expression, coordinate_names, parse_expression
from .util import debug

PointFunction = Callable[[np.ndarray], np.ndarray]
Point = Union[Sequence[float], np.ndarray]

KINDS = ("builtin", "foliated", "general")
METHODS = ("auto", "analytic", "fd")
FAULTS = ("curvature-sign",)

#: Residual tolerances for curvature index symmetries.
ANALYTIC_SYMMETRY_TOL = 1e-9
FD_SYMMETRY_TOL = 1e-5


@dataclass(frozen=True)
class MetricSpec:
    """
    An immutable, validated spacetime metric on a chart.

    Use `parse_metric_spec` or `builtin` rather than building these by hand.

    :param dim: Spacetime dimension ``n + 1``.
    :param kind: One of ``builtin``, ``foliated``, ``general``.
    :param domain: The chart's `.ChartDomain`.
    :param scale: Constant factor ``lam`` realizing ``g -> lam^2 g``.
    :param curvature_sign:
        ``1`` normally; ``-1`` flips the curvature tensor, a fault-injection
        hook for exercising the invariant suite.
    """

    dim: int
    kind: str
    domain: ChartDomain
    lapse_fn: Optional[PointFunction] = field(
        default=None, compare=False, repr=False
    )
    spatial_fn: Optional[PointFunction] = field(
        default=None, compare=False, repr=False
    )
    metric_fn: Optional[PointFunction] = field(
        default=None, compare=False, repr=False
    )
    model: Optional[Model] = field(default=None, compare=False)
    source: dict = field(default_factory=dict, compare=False, repr=False)
    scale: float = 1.0
    curvature_sign: float = 1.0

    def __post_init__(self) -> None:
        if self.kind not in KINDS:
            raise SpecError("unknown metric kind {!r}".format(self.kind))
        if self.domain.dim != self.dim:
            raise SpecError(
                "dimension mismatch: chart has {} coordinates, "
                "metric {}".format(
                    self.domain.dim, self.dim
                )
            )

    @property
    def n(self) -> int:
        return self.dim - 1

    @property
    def foliated(self) -> bool:
        return self.lapse_fn is not None

    @property
    def names(self) -> list[str]:
        return coordinate_names(self.dim)

    @property
    def label(self) -> str:
        if self.model is not None:
            text = self.model.name
        else:
            text = "{} expression metric".format(self.kind)
        if self.scale != 1.0:
            text += " scaled by {:g}".format(self.scale)
        return text

    def lapse(self, x: np.ndarray) -> np.ndarray:
        if self.lapse_fn is None:
            raise SpecError("spec is not foliated; it has no lapse")
        return self.scale * self.lapse_fn(np.atleast_2d(x))

    def spatial(self, x: np.ndarray) -> np.ndarray:
        if self.spatial_fn is None:
            raise SpecError("spec is not foliated; it has no spatial metric")
        return self.scale**2 * self.spatial_fn(np.atleast_2d(x))

    def metric(self, x: np.ndarray) -> np.ndarray:
        """
        Metric matrices at points ``x`` of shape ``(P, N)``, shape
        ``(P, N, N)``. No chart or finiteness checks.
        """
        x = np.atleast_2d(x)
        if self.metric_fn is not None:
            return self.scale**2 * self.metric_fn(x)
        lapse = self.lapse(x)
        out = np.zeros((len(x), self.dim, self.dim))
        out[:, 0, 0] = -(lapse**2)
        out[:, 1:, 1:] = self.spatial(x)
        return out

    def scaled(self, lam: float) -> "MetricSpec":
        """
        The metric ``lam^2 g`` on the same chart.
        """
        if not lam > 0:
            raise ValueError("scale factor must be positive")
        return replace(self, scale=self.scale * lam)

    def with_fault(self, name: str) -> "MetricSpec":
        """
        Copy of this spec with a deliberate defect, for testing checks.
        """
        if name != "curvature-sign":
            raise ValueError(
                "unknown fault {!r}; expected one of {}".format(name, FAULTS)
            )
        return replace(self, curvature_sign=-self.curvature_sign)

    def identify(self, points: np.ndarray) -> np.ndarray:
        return self.domain.identify(points)

    def to_document(self, expressions: bool = False) -> str:
        """
        Render this spec as a metric-spec document.

        Builtin models render in their short form unless ``expressions`` is
        set, in which case the equivalent foliated expression document is
        produced.
        """
        if self.model is not None:
            sections = self.model.sections(expressions=expressions)
        else:
            sections = {k: dict(v) for k, v in self.source.items()}
        if self.scale != 1.0:
            sections.setdefault("model", {})["scale"] = self.scale
        return render_document(sections)


@dataclass(frozen=True)
class MetricAt:
    g: np.ndarray
    point: np.ndarray

    def signature(self) -> tuple[int, int]:
        """
        ``(negative, positive)`` eigenvalue counts.
        """
        eig = np.linalg.eigvalsh(self.g)
        return int(np.sum(eig < 0)), int(np.sum(eig > 0))


@dataclass(frozen=True)
class ChristoffelAt:
    """
    ``gamma[c, a, b] = Gamma^c_ab``.
    """

    gamma: np.ndarray
    point: np.ndarray

    def symmetry_residual(self) -> float:
        return float(np.max(np.abs(self.gamma - self.gamma.swapaxes(1, 2))))


@dataclass(frozen=True)
class RiemannAt:
    riem: np.ndarray
    ricci: np.ndarray
    point: np.ndarray

    def symmetry_residuals(self) -> dict[str, float]:
        """
        Largest absolute violation of each curvature index symmetry.
        """
        r = self.riem
        bianchi = (
            r
            + np.einsum("acdb->abcd", r)
            + np.einsum("adbc->abcd", r)
        )
        return {
            "antisymmetry_ab": float(np.max(np.abs(r + r.swapaxes(0, 1)))),
            "antisymmetry_cd": float(np.max(np.abs(r + r.swapaxes(2, 3)))),
            "pair_symmetry": float(
                np.max(np.abs(r - np.einsum("cdab->abcd", r)))
            ),
            "bianchi": float(np.max(np.abs(bianchi))),
        }


# Evaluation core


def _as_point(spec: MetricSpec, p: Point) -> np.ndarray:
    x = np.asarray(p, dtype=float).reshape(-1)
    if len(x) != spec.dim:
        raise SpecError(
            "dimension mismatch: point has {} coordinates, spec {}".format(
                len(x), spec.dim
            )
        )
    return x


def _finite(values: np.ndarray, quantity: str, x: np.ndarray) -> np.ndarray:
    if not np.all(np.isfinite(values)):
        raise NonFiniteError(quantity, x)
    return values


def metric_array(spec: MetricSpec, x: np.ndarray) -> np.ndarray:
    """
    Checked metric matrix at one point.
    """
    spec.domain.check(x)
    g = spec.metric(x[None, :])[0]
    return _finite(g, "metric", x)


def _stencil_points(spec: MetricSpec, x: np.ndarray, order: int) -> np.ndarray:
    spec.domain.check(x)
    pts = stencil(x, order)
    spec.domain.check(pts, "finite-difference stencil point")
    return pts


def _foliated_jets(
    spec: MetricSpec, x: np.ndarray, order: int
) -> tuple[Jet, Jet]:
    pts = _stencil_points(spec, x, order)
    lapse = _finite(spec.lapse(pts), "lapse", x)
    spatial = _finite(spec.spatial(pts), "spatial metric", x)
    return jet_from_values(x, lapse, order), jet_from_values(x, spatial, order)


def _metric_jet(spec: MetricSpec, x: np.ndarray, order: int) -> Jet:
    pts = _stencil_points(spec, x, order)
    values = _finite(spec.metric(pts), "metric", x)
    return jet_from_values(x, values, order)


def lowered_christoffel(dg: np.ndarray) -> np.ndarray:
    """
    ``out[d, a, b] = Gamma_dab`` from ``dg[e, i, j] = d_e g_ij``.
    """
    return 0.5 * (
        np.einsum("bad->dab", dg) + np.einsum("abd->dab", dg) - dg
    )


def christoffel_from_jet(g: np.ndarray, dg: np.ndarray) -> np.ndarray:
    ginv = np.linalg.inv(g)
    return np.einsum("cd,dab->cab", ginv, lowered_christoffel(dg))


def mtw_tensor(g: np.ndarray, dg: np.ndarray, ddg: np.ndarray) -> np.ndarray:
    """
    All-lower Riemann tensor in the opposite sign convention (positive for
    spheres), from a second-order metric jet. Works in any dimension.
    """
    low = lowered_christoffel(dg)
    gamma = np.einsum("cd,dab->cab", np.linalg.inv(g), low)
    linear = 0.5 * (
        np.einsum("bcad->abcd", ddg)
        + np.einsum("adbc->abcd", ddg)
        - np.einsum("bdac->abcd", ddg)
        - np.einsum("acbd->abcd", ddg)
    )
    quadratic = np.einsum("nbc,nad->abcd", low, gamma) - np.einsum(
        "nbd,nac->abcd", low, gamma
    )
    return linear + quadratic


@dataclass(frozen=True)
class _Slices:
    """
    Lapse and spatial-metric data of a foliated metric at one point.
    """

    lapse: float
    dn: np.ndarray  # (N,)
    h: np.ndarray
    hinv: np.ndarray
    k: np.ndarray  # d_t h
    gamma_h: np.ndarray  # spatial Christoffels
    lapse_jet: Jet
    spatial_jet: Jet

    @property
    def dsn(self) -> np.ndarray:
        return self.dn[1:]

    @classmethod
    def from_jets(cls, nj: Jet, hj: Jet) -> "_Slices":
        h = hj.value
        hinv = np.linalg.inv(h)
        return cls(
            lapse=float(nj.value),
            dn=nj.d1,
            h=h,
            hinv=hinv,
            k=hj.d1[0],
            gamma_h=np.einsum(
                "cd,dab->cab", hinv, lowered_christoffel(hj.d1[1:])
            ),
            lapse_jet=nj,
            spatial_jet=hj,
        )


def _foliated_christoffel(s: _Slices) -> np.ndarray:
    dim = len(s.h) + 1
    n = s.lapse
    gamma = np.zeros((dim, dim, dim))
    gamma[0, 0, 0] = s.dn[0] / n
    gamma[0, 0, 1:] = s.dsn / n
    gamma[0, 1:, 0] = s.dsn / n
    gamma[0, 1:, 1:] = s.k / (2.0 * n * n)
    gamma[1:, 0, 0] = n * (s.hinv @ s.dsn)
    mixed = 0.5 * np.einsum("kl,li->ki", s.hinv, s.k)
    gamma[1:, 1:, 0] = mixed
    gamma[1:, 0, 1:] = mixed
    gamma[1:, 1:, 1:] = s.gamma_h
    return gamma


def _foliated_mtw(s: _Slices) -> np.ndarray:
    """
    Curvature of a foliated metric assembled block by block from the lapse,
    the spatial metric, its time derivative ``k`` and the curvature of the
    slice.
    """
    dim = len(s.h) + 1
    n = s.lapse
    k = s.k
    hj, nj = s.spatial_jet, s.lapse_jet
    assert hj.d2 is not None and nj.d2 is not None
    out = np.zeros((dim,) * 4)

    slice_curv = mtw_tensor(s.h, hj.d1[1:], hj.d2[1:, 1:])
    out[1:, 1:, 1:, 1:] = slice_curv + (
        np.einsum("ik,jl->ijkl", k, k) - np.einsum("il,jk->ijkl", k, k)
    ) / (4.0 * n * n)

    # nabla_k[l, i, j] = (covariant d_l of k)_ij on the slice
    dk = hj.d2[1:, 0]
    nabla_k = (
        dk
        - np.einsum("mli,mj->lij", s.gamma_h, k)
        - np.einsum("mlj,im->lij", s.gamma_h, k)
    )
    mixed = 0.5 * (
        np.einsum("lij->jil", nabla_k) - np.einsum("ilj->jil", nabla_k)
    ) - (
        np.einsum("ij,l->jil", k, s.dsn) - np.einsum("jl,i->jil", k, s.dsn)
    ) / (
        2.0 * n
    )
    out[0, 1:, 1:, 1:] = mixed
    out[1:, 0, 1:, 1:] = -mixed
    swapped = np.einsum("jil->ilj", mixed)
    out[1:, 1:, 0, 1:] = swapped
    out[1:, 1:, 1:, 0] = -swapped

    dsn = s.dsn
    hess_n2 = 2.0 * (n * nj.d2[1:, 1:] + np.outer(dsn, dsn)) - np.einsum(
        "mij,m->ij", s.gamma_h, 2.0 * n * dsn
    )
    normal = (
        0.5 * (hess_n2 - hj.d2[0, 0])
        + 0.25 * k @ s.hinv @ k
        + s.dn[0] / (2.0 * n) * k
        - np.outer(dsn, dsn)
    )
    out[1:, 0, 1:, 0] = normal
    out[0, 1:, 1:, 0] = -normal
    out[1:, 0, 0, 1:] = -normal
    out[0, 1:, 0, 1:] = normal
    return out


def _method(spec: MetricSpec, method: str) -> str:
    if method not in METHODS:
        raise ValueError(
            "unknown method {!r}; expected one of {}".format(method, METHODS)
        )
    if method == "auto":
        return "analytic" if spec.foliated else "fd"
    if method == "analytic" and not spec.foliated:
        raise SpecError("closed-form formulas need a foliated spec")
    return method


def christoffel(
    spec: MetricSpec, x: np.ndarray, method: str = "auto"
) -> np.ndarray:
    """
    ``Gamma^c_ab`` at ``x`` as an array (first-order stencil only).
    """
    if _method(spec, method) == "analytic":
        nj, hj = _foliated_jets(spec, x, order=1)
        gamma = _foliated_christoffel(_Slices.from_jets(nj, hj))
    else:
        gj = _metric_jet(spec, x, order=1)
        gamma = christoffel_from_jet(gj.value, gj.d1)
    return _finite(gamma, "christoffel", x)


def connection_and_curvature(
    spec: MetricSpec, x: np.ndarray, method: str = "auto"
) -> tuple[np.ndarray, np.ndarray]:
    """
    ``(Gamma, riem)`` at ``x`` from a single second-order stencil.
    """
    if _method(spec, method) == "analytic":
        nj, hj = _foliated_jets(spec, x, order=2)
        slices = _Slices.from_jets(nj, hj)
        gamma = _foliated_christoffel(slices)
        mtw = _foliated_mtw(slices)
    else:
        gj = _metric_jet(spec, x, order=2)
        assert gj.d2 is not None
        gamma = christoffel_from_jet(gj.value, gj.d1)
        mtw = mtw_tensor(gj.value, gj.d1, gj.d2)
    riem = -spec.curvature_sign * mtw
    return _finite(gamma, "christoffel", x), _finite(riem, "curvature", x)


def ricci_from(g: np.ndarray, riem: np.ndarray) -> np.ndarray:
    return np.einsum("ad,abcd->bc", np.linalg.inv(g), riem)


# Public point operations


def metric_at(spec: MetricSpec, p: Point) -> MetricAt:
    """
    The metric matrix at ``p``.

    :raises: `.ChartError` outside the chart, `.NonFiniteError` when the
        metric does not evaluate to finite numbers.
    """
    x = _as_point(spec, p)
    return MetricAt(g=metric_array(spec, x), point=x)


def christoffel_at(
    spec: MetricSpec, p: Point, method: str = "auto"
) -> ChristoffelAt:
    """
    Christoffel symbols at ``p``.

    ``method="analytic"`` (the default for foliated specs) uses the
    closed-form foliated expressions fed with finite-difference derivatives of
    the lapse and spatial metric; ``"fd"`` differentiates the full metric.
    Both are exactly symmetric in the lower indices.
    """
    x = _as_point(spec, p)
    return ChristoffelAt(gamma=christoffel(spec, x, method), point=x)


def riemann_at(spec: MetricSpec, p: Point, method: str = "auto") -> RiemannAt:
    """
    Riemann and Ricci tensors at ``p`` (see the module docstring for the
    sign convention).
    """
    x = _as_point(spec, p)
    _, riem = connection_and_curvature(spec, x, method)
    g = metric_array(spec, x)
    return RiemannAt(riem=riem, ricci=ricci_from(g, riem), point=x)


def lie_derivative_T(
    spec: MetricSpec, p: Point, basis: str = "normal"
) -> np.ndarray:
    """
    ``L_T g`` for the foliation normal ``T = n^-1 d_t``.

    With ``basis="normal"`` components are taken against ``(T, d_1, ..)``:
    ``(L_T g)_00 = 0``, ``(L_T g)_0i = n^-1 d_i n``,
    ``(L_T g)_ij = n^-1 d_t g_ij``. ``basis="coordinate"`` gives the plain
    coordinate components (``(L_T g)_0i = d_i n``).

    :raises: `.SpecError` if ``spec`` is not foliated.
    """
    if not spec.foliated:
        raise SpecError("the Lie derivative along T needs a foliated spec")
    if basis not in ("normal", "coordinate"):
        raise ValueError("basis must be 'normal' or 'coordinate'")
    x = _as_point(spec, p)
    nj, hj = _foliated_jets(spec, x, order=1)
    n = float(nj.value)
    out = np.zeros((spec.dim, spec.dim))
    shift = nj.d1[1:] if basis == "coordinate" else nj.d1[1:] / n
    out[0, 1:] = shift
    out[1:, 0] = shift
    out[1:, 1:] = hj.d1[0] / n
    return _finite(out, "lie derivative", x)


def probe_points(
    spec: MetricSpec, count: int = 16, seed: int = 0, guard: float = 1e-2
) -> np.ndarray:
    """
    Deterministic interior sample of the chart, shape ``(count, N)``.

    Scrambled Halton points mapped onto `.ChartDomain.probe_box`, keeping
    those at least ``guard`` inside the chart.
    """
    box = spec.domain.probe_box()
    span = box[:, 1] - box[:, 0]
    lo = box[:, 0] + guard * span
    hi = box[:, 1] - guard * span
    sampler = qmc.Halton(d=spec.dim, scramble=True, seed=seed)
    kept: list[np.ndarray] = []
    total = 0
    for _ in range(64):
        batch = qmc.scale(sampler.random(max(2 * count, 16)), lo, hi)
        batch = batch[spec.domain.contains(batch, guard)]
        kept.append(batch)
        total += len(batch)
        if total >= count:
            break
    points = np.vstack(kept)[:count]
    if len(points) < count:
        raise SpecError(
            "chart too small to place {} probe points".format(count)
        )
    return points


def check_signature(spec: MetricSpec, points: np.ndarray) -> None:
    """
    Require a Lorentzian signature (and a positive lapse) at ``points``.

    :raises: `.SpecError` naming the first failing point.
    """
    if spec.foliated:
        lapse = spec.lapse(points)
        bad = ~(lapse > 0)
        if bad.any():
            raise SpecError(
                "lapse must be positive (got {!r} at {})".format(
                    float(lapse[bad][0]), tuple(points[bad][0])
                )
            )
    metrics = spec.metric(points)
    if not np.all(np.isfinite(metrics)):
        raise SpecError("metric is not finite at every probe point")
    for x, g in zip(points, metrics):
        eig = np.linalg.eigvalsh(0.5 * (g + g.T))
        scale = max(float(np.max(np.abs(eig))), 1e-300)
        negative = int(np.sum(eig < -1e-12 * scale))
        positive = int(np.sum(eig > 1e-12 * scale))
        if negative != 1 or positive != spec.dim - 1:
            raise SpecError(
                "signature must be (-, +, ..., +); at {} eigenvalues are "
                "{}".format(tuple(x), np.round(eig, 12).tolist())
            )


def validate(spec: MetricSpec, count: int = 16, seed: int = 0) -> MetricSpec:
    check_signature(spec, probe_points(spec, count, seed))
    return spec


def builtin(name: str, dim: int = 4, **params: Any) -> MetricSpec:
    """
    Spec for a builtin model, e.g. ``builtin("schwarzschild", M=1.0)``.

    :raises: `.SpecError` for unknown models or bad parameters.
    """
    model = lookup(name)(dim=dim, **params)
    spec = MetricSpec(
        dim=dim,
        kind="builtin",
        domain=model.domain(),
        lapse_fn=model.lapse,
        spatial_fn=model.spatial,
        model=model,
    )
    return validate(spec)


# Document parsing


_COMPONENT = re.compile(r"^g(?:(\d)(\d)|_(\d+)_(\d+))$")
_MODEL_KEYS = {"model", "dim", "scale"}


def _component(key: str) -> Optional[tuple[int, int]]:
    match = _COMPONENT.match(key)
    if match is None:
        return None
    a, b, c, d = match.groups()
    i, j = (int(a), int(b)) if a is not None else (int(c), int(d))
    return (i, j) if i <= j else (j, i)


def _text(value: Value) -> str:
    raw = value.raw
    if isinstance(raw, tuple):
        raise ParseError(
            "expected an expression, got a list", value.line, value.column
        )
    if isinstance(raw, float):
        return repr(raw)
    return str(raw)


def _number(value: Value, what: str) -> float:
    raw = value.raw
    if isinstance(raw, float):
        return raw
    try:
        expr = parse_expression(
            str(raw), (), None, value.line, value.text_column
        )
    except ParseError:
        raise ParseError(
            "{} must be a number".format(what),
            value.line,
            value.column,
            str(raw),
        ) from None
    return float(expr.evaluate({}))


class _ExpressionField:
    """
    Batched evaluation of a scalar expression over chart points.
    """

    def __init__(self, expression: Expression, names: Sequence[str]):
        self.expression = expression
        self.names = list(names)

    def __call__(self, x: np.ndarray) -> np.ndarray:
        env = {name: x[:, i] for i, name in enumerate(self.names)}
        value = self.expression.evaluate(env)
        return np.broadcast_to(np.asarray(value, dtype=float), (len(x),))


class _MatrixField:
    """
    Batched symmetric matrix assembled from component fields.
    """

    def __init__(
        self, size: int, offset: int, entries: Mapping[tuple[int, int], Any]
    ):
        self.size = size
        self.offset = offset
        self.entries = dict(entries)

    def __call__(self, x: np.ndarray) -> np.ndarray:
        out = np.zeros((len(x), self.size, self.size))
        for (i, j), component in self.entries.items():
            value = component(x)
            out[:, i - self.offset, j - self.offset] = value
            out[:, j - self.offset, i - self.offset] = value
        return out


def _constants(doc: Document) -> dict[str, float]:
    constants: dict[str, float] = {}
    for key, value in doc.section("constants").items():
        if isinstance(value.raw, float):
            constants[key] = value.raw
            continue
        expr = parse_expression(
            _text(value), (), constants, value.line, value.text_column
        )
        constants[key] = float(expr.evaluate({}))
    return constants


def _domain(
    doc: Document, names: list[str], base: ChartDomain
) -> ChartDomain:
    box = list(base.box)
    periods = list(base.periods) if base.periods else [None] * len(names)
    r_min = base.r_min
    for key, value in doc.section("domain").items():
        if key in names:
            raw = value.raw
            if not (isinstance(raw, tuple) and len(raw) == 2):
                raise ParseError(
                    "domain entry {!r} needs [lo, hi]".format(key),
                    value.line,
                    value.column,
                )
            box[names.index(key)] = (float(raw[0]), float(raw[1]))
        elif key == "r_min":
            r_min = _number(value, "r_min")
        elif key == "period":
            period = _number(value, "period")
            periods = [None] + [period] * (len(names) - 1)
        elif key.startswith("period_") and key[7:] in names[1:]:
            periods[names.index(key[7:])] = _number(value, key)
        elif re.match(r"^(period_)?x\d+$", key):
            raise SpecError(
                "dimension mismatch: domain key {!r} in a {}-dimensional "
                "spec".format(key, len(names))
            )
        else:
            raise ParseError(
                "unknown domain key {!r}".format(key),
                value.line,
                1,
                key,
            )
    for axis, period in enumerate(periods):
        if period is not None:
            box[axis] = (-np.inf, np.inf)
    try:
        return ChartDomain(
            box=tuple(box),
            r_min=r_min,
            periods=tuple(periods) if any(periods) else (),
        )
    except ValueError as exc:
        raise SpecError(str(exc)) from None


def _collect_components(
    doc: Document, sections: Sequence[str]
) -> dict[tuple[int, int], Value]:
    found: dict[tuple[int, int], Value] = {}
    for name in sections:
        for key, value in doc.section(name).items():
            index = _component(key)
            if index is None:
                continue
            if index in found:
                raise ParseError(
                    "component {} given twice".format(key),
                    value.line,
                    value.column,
                    key,
                )
            found[index] = value
    return found


def _check_keys(doc: Document, name: str, allowed: Callable[[str], bool]):
    for key, value in doc.section(name).items():
        if not allowed(key):
            raise ParseError(
                "unexpected key {!r} in [{}]".format(key, name),
                value.line,
                1,
                key,
            )


def parse_metric_spec(text: str, probes: int = 16) -> MetricSpec:
    """
    Parse and validate a metric-spec document.

    The document kind is decided by its content: a ``model`` key selects a
    builtin model (other ``[model]`` keys become its parameters), a
    ``[metric]`` section or any ``g0j`` component a general metric, and
    ``lapse``/``gij`` entries a foliated metric. Expressions may use the
    coordinates ``t, x1 .. xn``, ``pi``, ``e`` and ``[constants]``.

    :raises:
        `.ParseError` (with line and column) for syntax errors, unknown
        variables and misplaced keys; `.SpecError` for unknown models,
        dimension mismatches, non-positive lapse or a signature failure at one
        of ``probes`` probe points.
    """
    doc = parse_document(text)
    model_section = doc.section("model")
    scale = 1.0
    if "scale" in model_section:
        scale = _number(model_section["scale"], "scale")
        if not scale > 0:
            raise SpecError("scale must be positive")
    dim_value = model_section.get("dim")
    dim: Optional[int] = None
    if dim_value is not None:
        dim_float = _number(dim_value, "dim")
        if dim_float != int(dim_float):
            raise SpecError("dim must be an integer")
        dim = int(dim_float)

    if "model" in model_section:
        spec = _parse_builtin(doc, dim)
    else:
        spec = _parse_expressions(doc, dim)
    if scale != 1.0:
        spec = spec.scaled(scale)
    debug("Parsed %s (dim %d)", spec.label, spec.dim)
    check_signature(spec, probe_points(spec, probes))
    return spec


def _parse_builtin(doc: Document, dim: Optional[int]) -> MetricSpec:
    for name in ("lapse", "spatial", "metric"):
        if name in doc:
            raise SpecError(
                "a builtin model takes no [{}] section".format(name)
            )
    section = doc.section("model")
    name = _text(section["model"])
    params: dict[str, Any] = {}
    for key, value in section.items():
        if key in _MODEL_KEYS:
            continue
        params[key] = (
            value.raw if isinstance(value.raw, float) else _text(value)
        )
    model = lookup(name)(dim=dim or 4, **params)
    domain = _domain(doc, coordinate_names(model.dim), model.domain())
    return MetricSpec(
        dim=model.dim,
        kind="builtin",
        domain=domain,
        lapse_fn=model.lapse,
        spatial_fn=model.spatial,
        model=model,
    )


def _parse_expressions(doc: Document, dim: Optional[int]) -> MetricSpec:
    constants = _constants(doc)
    spatial_like = ("model", "spatial", "metric")
    components = _collect_components(doc, spatial_like)
    general = "metric" in doc or any(i == 0 for i, _ in components)
    lapse_value = doc.get("lapse", "lapse") or doc.get("lapse", "n")
    if lapse_value is None:
        lapse_value = doc.get("model", "lapse")

    _check_keys(
        doc,
        "model",
        lambda k: k in _MODEL_KEYS
        or k == "lapse"
        or _component(k) is not None,
    )
    _check_keys(doc, "lapse", lambda k: k in ("lapse", "n"))
    _check_keys(doc, "spatial", lambda k: _component(k) is not None)
    _check_keys(doc, "metric", lambda k: _component(k) is not None)

    if general:
        if lapse_value is not None or "spatial" in doc:
            raise SpecError(
                "give either a full [metric] or a lapse with [spatial], "
                "not both"
            )
        if not components:
            raise SpecError("[metric] defines no components")
        inferred = max(j for _, j in components) + 1
        offset = 0
    else:
        if lapse_value is None and not components:
            raise SpecError("document defines no metric")
        if lapse_value is None:
            raise SpecError("a foliated metric needs a lapse")
        if not components:
            raise SpecError("a foliated metric needs [spatial] components")
        if any(i == 0 for i, _ in components):
            raise SpecError("spatial components are numbered from 1")
        inferred = max(j for _, j in components) + 1
        offset = 1
    if dim is None:
        dim = inferred
    elif inferred > dim:
        raise SpecError(
            "dimension mismatch: component index {} in a {}-dimensional "
            "spec".format(inferred - 1, dim)
        )
    names = coordinate_names(dim)
    for axis in range(offset, dim):
        if (axis, axis) not in components:
            raise SpecError(
                "missing diagonal component {}".format(Model.key(axis, axis))
            )

    def compile_field(value: Value) -> _ExpressionField:
        expr = parse_expression(
            _text(value), names, constants, value.line, value.text_column
        )
        return _ExpressionField(expr, names)

    fields = {index: compile_field(v) for index, v in components.items()}
    matrix = _MatrixField(dim - offset, offset, fields)
    source = {
        name: {key: value.raw for key, value in entries.items()}
        for name, entries in doc.items()
    }
    domain = _domain(doc, names, ChartDomain.unbounded(dim))
    if general:
        return MetricSpec(
            dim=dim,
            kind="general",
            domain=domain,
            metric_fn=matrix,
            source=source,
        )
    assert lapse_value is not None
    return MetricSpec(
        dim=dim,
        kind="foliated",
        domain=domain,
        lapse_fn=compile_field(lapse_value),
        spatial_fn=matrix,
        source=source,
    )
