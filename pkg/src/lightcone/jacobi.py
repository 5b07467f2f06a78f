"""
Jacobi fields, the exponential-map Jacobian and conjugate points.

Jacobi fields are carried in components of a parallel frame along the
geodesic (see `.geodesic.GeodesicSystem`). For ``m`` fields with
``J(0) = 0`` and ``J'(0) = W`` (``N x m``), ``A(s)`` holds their components.
With ``W = I`` the normalized Jacobian of ``exp`` along the ray is
``phi(s) = |det(A(s) / s)|``; conjugate points are parameters where
``A(s) / s`` (or, for null rays, its screen block) becomes singular.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np
from scipy.integrate import simpson
from scipy.linalg import null_space
from scipy.optimize import brentq, minimize_scalar

from .config import DEFAULT_TOLERANCES, Tolerances
from .frames import AssumptionBounds, Observer, complete_frame, eta
from .geodesic import (
    GeodesicSolution,
    TransportedFrame,
    integrate_geodesic,
)
from .lattices import directions as direction_set
from .spacetime import MetricSpec, connection_and_curvature
from .util import debug, run_batch

#: Smallest singular values below this (relative to the field scale) mark a
#: conjugate point when the determinant does not change sign.
SINGULAR_TOL = 1e-6
#: Local minima of the smallest singular value under this are refined.
REFINE_BELOW = 0.25
#: Points per unit parameter used to scan for degeneracies.
SCAN_DENSITY = 64


@dataclass
class JacobiSolution:
    """
    Jacobi fields along a geodesic in transported-frame components.

    ``a`` has shape ``(K, N, m)`` (``m`` fields), ``da`` likewise; ``F`` is
    ``|J|_T`` per sample and field, the norm in the transported observer
    metric (Euclidean in frame components).
    """

    geodesic: GeodesicSolution
    s: np.ndarray
    a: np.ndarray
    da: np.ndarray

    @property
    def F(self) -> np.ndarray:
        return np.linalg.norm(self.a, axis=1)

    def components(self, s: float) -> tuple[np.ndarray, np.ndarray]:
        part = self.geodesic.at(s)
        return part["A"], part["dA"]

    def vectors(self) -> np.ndarray:
        """
        Chart components ``J(s) = E(s) a(s)``, shape ``(K, N, m)``.
        """
        assert self.geodesic.frames is not None
        return np.einsum("kij,kjm->kim", self.geodesic.frames, self.a)


def _frame_data(frame: TransportedFrame, vectors: np.ndarray) -> np.ndarray:
    vectors = np.asarray(vectors, dtype=float)
    if vectors.ndim == 1:
        vectors = vectors[:, None]
    return np.linalg.solve(frame.frames[0], vectors)


def integrate_jacobi(
    spec: MetricSpec,
    geo: GeodesicSolution,
    frame: TransportedFrame,
    J0: Sequence[float],
    dJ0: Sequence[float],
    tol: Tolerances = DEFAULT_TOLERANCES,
) -> JacobiSolution:
    """
    Integrate ``a'' = K a`` jointly with the geodesic of ``geo``.

    ``J0`` and ``dJ0`` are chart vectors at the start of ``geo`` (or
    ``N x m`` arrays of several fields); they are converted to components of
    the first frame of ``frame``. ``K[a, c] = -eta_a riem(E_c, v, v, E_a)``.
    """
    A0 = _frame_data(frame, np.asarray(J0, dtype=float))
    dA0 = _frame_data(frame, np.asarray(dJ0, dtype=float))
    if A0.shape != dA0.shape:
        raise ValueError("J0 and J0' must have the same shape")
    joint = integrate_geodesic(
        spec,
        geo.start,
        geo.velocity,
        geo.s_end,
        tol,
        frame=frame.frames[0],
        jacobi=(A0, dA0),
    )
    assert joint.A is not None and joint.dA is not None
    return JacobiSolution(geodesic=joint, s=joint.s, a=joint.A, da=joint.dA)


def jacobian_matrix(A: np.ndarray, s: float) -> np.ndarray:
    """
    ``A(s) / s``, with the ``s -> 0`` limit ``A'(0)`` taken as identity.
    """
    if s <= 0:
        return np.eye(A.shape[0], A.shape[1])
    return A / s


def phi_from_fields(A: np.ndarray, s: float) -> float:
    """
    ``phi(s)`` from the ``N`` fields with ``J(0) = 0``, ``J'(0) = E_k``.

    Equivalent to ``|c ^ J_1 ^ ... ^ J_n| / (s^n |c ^ J_1'(0) ^ ...|)`` for
    any complement of the ray direction ``c``, because ``A c = s c``.
    """
    if s <= 0:
        return 1.0
    return abs(float(np.linalg.det(A / s)))


def exp_jacobian(
    spec: MetricSpec,
    obs: Observer,
    direction: Sequence[float],
    s: float,
    tol: Tolerances = DEFAULT_TOLERANCES,
) -> float:
    """
    Normalized Jacobian ``phi(s)`` of ``exp`` along the ray with frame
    direction ``direction`` (normalized to ``g_T`` unit length).

    ``phi(0) = 1``. If the ray does not reach ``s`` the result is ``nan``.
    """
    if s == 0:
        return 1.0
    if s < 0:
        raise ValueError("the ray parameter must not be negative")
    E = complete_frame(spec, obs).vectors
    u = np.asarray(direction, dtype=float)
    u = u / np.linalg.norm(u)
    n = spec.dim
    geo = integrate_geodesic(
        spec,
        obs.point,
        E @ u,
        s,
        tol,
        frame=E,
        jacobi=(np.zeros((n, n)), np.eye(n)),
    )
    if not geo.ok:
        debug("Ray %s stopped early: %s", tuple(u), geo.termination)
        return float("nan")
    assert geo.A is not None
    return phi_from_fields(geo.A[-1], s)


def screen_basis(direction: np.ndarray) -> np.ndarray:
    """
    Orthonormal basis (columns) of the frame-Euclidean complement of
    ``span{e_0, direction}``.
    """
    dim = len(direction)
    span = np.column_stack([np.eye(dim)[:, 0], direction])
    return null_space(span.T)


@dataclass
class Degeneracy:
    """
    Where a Jacobi matrix along one ray first degenerates.

    ``s`` is ``None`` if no degeneracy was found up to ``searched``.
    ``how`` is ``"sign"`` (determinant sign change), ``"singular"``
    (smallest singular value touched zero) or ``""``.
    """

    s: Optional[float]
    searched: float
    how: str = ""
    sigma: float = float("nan")


def _matrix(geo: GeodesicSolution, W: Optional[np.ndarray], s: float):
    A = geo.at(s)["A"]
    M = jacobian_matrix(A, s)
    return M if W is None else W.T @ M


def first_degeneracy(
    geo: GeodesicSolution,
    W: Optional[np.ndarray] = None,
    tol: Tolerances = DEFAULT_TOLERANCES,
    density: int = SCAN_DENSITY,
) -> Degeneracy:
    """
    First parameter where the Jacobi matrix along ``geo`` is singular.

    The matrix is ``A(s)/s`` (or ``W^T A(s)/s`` for a screen ``W``). The
    determinant is scanned on a grid for sign changes, located by Brent's
    method; independently, local minima of the smallest singular value below
    `REFINE_BELOW` are refined by bounded minimization, which catches zeros
    of even multiplicity. The earlier of the two wins.
    """
    s_end = geo.s_end
    if s_end <= 0:
        return Degeneracy(None, 0.0)
    count = max(16, int(math.ceil(density * s_end)))
    grid = np.unique(
        np.concatenate([np.linspace(0.0, s_end, count + 1)[1:], geo.s[1:]])
    )

    def det(s: float) -> float:
        return float(np.linalg.det(_matrix(geo, W, s)))

    def sigma(s: float) -> float:
        return float(np.linalg.svd(_matrix(geo, W, s), compute_uv=False)[-1])

    dets = np.array([det(s) for s in grid])
    sigmas = np.array([sigma(s) for s in grid])
    found: Optional[Degeneracy] = None
    # Determinant starts at 1 for s -> 0+.
    previous_s, previous_d = 0.0, 1.0
    for s, d in zip(grid, dets):
        if d == 0.0:
            found = Degeneracy(float(s), s_end, "sign", 0.0)
            break
        if np.sign(d) != np.sign(previous_d):
            root = brentq(det, previous_s, s, xtol=tol.bisect)
            found = Degeneracy(float(root), s_end, "sign", sigma(root))
            break
        previous_s, previous_d = s, d
    limit = found.s if found is not None else s_end
    for k in range(1, len(grid) - 1):
        if grid[k] >= limit:
            break
        if not (
            sigmas[k] <= sigmas[k - 1]
            and sigmas[k] <= sigmas[k + 1]
            and sigmas[k] < REFINE_BELOW
        ):
            continue
        best = minimize_scalar(
            sigma,
            bounds=(grid[k - 1], grid[k + 1]),
            method="bounded",
            options={"xatol": tol.bisect},
        )
        if best.fun < SINGULAR_TOL * max(1.0, float(best.x)):
            s_star = float(best.x)
            if s_star < limit:
                found = Degeneracy(s_star, s_end, "singular", float(best.fun))
            break
    if found is not None:
        debug("Degeneracy at s=%.8g (%s)", found.s, found.how)
        return found
    return Degeneracy(None, s_end)


@dataclass
class DirectionResult:
    direction: np.ndarray
    s_star: Optional[float]
    searched: float
    termination: str
    how: str = ""


@dataclass
class ConjugateSearch:
    """
    Per-direction first conjugate parameters.

    ``s_star`` is ``None`` where no conjugate point was found within the
    searched range (``r_max``, or less where the ray stopped early).
    """

    kind: str
    r_max: float
    bisect: float
    results: list[DirectionResult] = field(default_factory=list)

    @property
    def directions(self) -> np.ndarray:
        return np.array([r.direction for r in self.results])

    @property
    def found(self) -> list[float]:
        return [r.s_star for r in self.results if r.s_star is not None]

    @property
    def minimum(self) -> Optional[float]:
        """
        Smallest conjugate parameter over all directions, or ``None``.
        """
        return min(self.found, default=None)

    @property
    def none(self) -> bool:
        return self.minimum is None

    @property
    def failures(self) -> int:
        return sum(r.termination != "reached_smax" for r in self.results)

    def describe(self) -> str:
        if self.none:
            return "none <= {:g}".format(self.r_max)
        return "{:.8g}".format(self.minimum)

    def to_csv(self) -> str:
        out = io.StringIO()
        writer = csv.writer(out, lineterminator="\n")
        dim = len(self.results[0].direction) if self.results else 0
        writer.writerow(
            ["index"]
            + ["u{}".format(i) for i in range(dim)]
            + ["s_star", "searched", "termination", "detection"]
        )
        for index, r in enumerate(self.results):
            star = "none" if r.s_star is None else "{:.10g}".format(r.s_star)
            writer.writerow(
                [index]
                + ["{:.10g}".format(c) for c in r.direction]
                + [star, "{:.10g}".format(r.searched), r.termination, r.how]
            )
        return out.getvalue()


def first_conjugate(
    spec: MetricSpec,
    obs: Observer,
    y: Sequence[float],
    r_max: float,
    tol: Tolerances = DEFAULT_TOLERANCES,
    screen: bool = False,
) -> DirectionResult:
    """
    First conjugate point along the ray ``s -> exp(s y)``.

    ``y`` is in observer-frame components and need not be unit: the result
    is reported as the ``g_T`` radius ``s* |y|``, which does not depend on
    the scaling of ``y``. The ray is followed to radius ``r_max``.

    :param screen: Use the null screen (fields with ``J'(0)`` orthogonal to
        ``e_0`` and ``y``) instead of all ``N`` fields.
    """
    y = np.asarray(y, dtype=float)
    size = float(np.linalg.norm(y))
    if size == 0:
        raise ValueError("direction must be nonzero")
    E = complete_frame(spec, obs).vectors
    n = spec.dim
    W = screen_basis(y / size) if screen else None
    initial = np.eye(n) if W is None else W
    m = initial.shape[1]
    if m == 0:
        return DirectionResult(y / size, None, r_max, "reached_smax")
    geo = integrate_geodesic(
        spec,
        obs.point,
        E @ y,
        r_max / size,
        tol,
        frame=E,
        jacobi=(np.zeros((n, m)), initial),
    )
    found = first_degeneracy(geo, W, tol)
    star = None if found.s is None else found.s * size
    return DirectionResult(
        direction=y / size,
        s_star=star,
        searched=geo.s_end * size,
        termination=geo.termination,
        how=found.how,
    )


def _search(
    spec: MetricSpec,
    obs: Observer,
    dirs: np.ndarray,
    r_max: float,
    kind: str,
    tol: Tolerances,
    workers: int,
    screen: bool,
) -> ConjugateSearch:
    def one(u: np.ndarray) -> DirectionResult:
        return first_conjugate(spec, obs, u, r_max, tol, screen=screen)

    results = run_batch(one, list(dirs), workers)
    search = ConjugateSearch(
        kind=kind, r_max=r_max, bisect=tol.bisect, results=results
    )
    debug(
        "Conjugate search (%s, %d directions): %s",
        kind,
        len(results),
        search.describe(),
    )
    return search


def conjugate_radius(
    spec: MetricSpec,
    obs: Observer,
    r_max: float,
    n_dirs: int = 64,
    kind: str = "all",
    tol: Tolerances = DEFAULT_TOLERANCES,
    workers: int = 1,
    minimum: int = 8,
) -> ConjugateSearch:
    """
    First conjugate parameter in each direction of a deterministic direction
    set of the given ``kind`` (see `.lattices.directions`), up to ``r_max``.

    :raises: ``ValueError`` if ``n_dirs`` is below ``minimum``.
    """
    if n_dirs < minimum:
        raise ValueError(
            "need at least {} directions, got {}".format(minimum, n_dirs)
        )
    dirs = direction_set(kind, spec.dim, n_dirs)
    return _search(spec, obs, dirs, r_max, kind, tol, workers, screen=False)


def null_conjugate_radius(
    spec: MetricSpec,
    obs: Observer,
    r_max: float,
    n_dirs: int = 64,
    tol: Tolerances = DEFAULT_TOLERANCES,
    workers: int = 1,
    minimum: int = 8,
) -> ConjugateSearch:
    """
    Null conjugate search along past null directions ``(-1, u)/sqrt(2)``,
    using the ``n - 1`` screen Jacobi fields.
    """
    if n_dirs < minimum:
        raise ValueError(
            "need at least {} directions, got {}".format(minimum, n_dirs)
        )
    dirs = direction_set("null", spec.dim, n_dirs)
    return _search(spec, obs, dirs, r_max, "null", tol, workers, screen=True)


def screen_phi(
    spec: MetricSpec,
    obs: Observer,
    direction: Sequence[float],
    s: float,
    tol: Tolerances = DEFAULT_TOLERANCES,
) -> float:
    """
    ``|det(W^T A(s) W / s)|`` for the null screen ``W`` of ``direction``.
    """
    u = np.asarray(direction, dtype=float)
    u = u / np.linalg.norm(u)
    W = screen_basis(u)
    if s == 0 or W.shape[1] == 0:
        return 1.0
    E = complete_frame(spec, obs).vectors
    n = spec.dim
    geo = integrate_geodesic(
        spec,
        obs.point,
        E @ u,
        s,
        tol,
        frame=E,
        jacobi=(np.zeros((n, W.shape[1])), W),
    )
    if not geo.ok:
        return float("nan")
    return abs(float(np.linalg.det(_matrix(geo, W, s))))


def index_form(
    spec: MetricSpec, sol: JacobiSolution, column: int = 0, samples: int = 201
) -> float:
    """
    ``I(J, J) = int (g(J', J') - Riem(J, g', g', J)) ds`` over the solved
    range for one field, by Simpson's rule on ``samples`` evenly spaced
    points of the dense output.

    For a Jacobi field this equals `boundary_term`; it is a diagnostic,
    nothing is minimized.
    """
    geo = sol.geodesic
    signs = np.diag(eta(spec.dim))
    grid = np.linspace(0.0, geo.s_end, samples)
    values = []
    for s in grid:
        part = geo.at(s)
        x, v, E = part["x"], part["v"], part["E"]
        a, da = part["A"][:, column], part["dA"][:, column]
        _, riem = connection_and_curvature(spec, x)
        q = np.einsum("abcd,ag,b,c,dk->gk", riem, E, v, v, E)
        values.append(float(da @ (signs * da) - a @ q @ a))
    return float(simpson(np.array(values), x=grid))


def boundary_term(
    spec: MetricSpec, sol: JacobiSolution, column: int = 0
) -> float:
    """
    ``g(J', J)`` at the end of the range minus at the start.
    """
    signs = np.diag(eta(spec.dim))
    a, da = sol.a[:, :, column], sol.da[:, :, column]
    end = float(da[-1] @ (signs * a[-1]))
    start = float(da[0] @ (signs * a[0]))
    return end - start


@dataclass(frozen=True)
class SandwichConstants:
    """
    Constants of the Jacobi-field comparison window
    ``exp(-c4) s <= |J(s)|_T <= exp(c5) s``.

    ``G = 2 K2 / K3 (exp(4 K3 s) - 1)`` at the window length, ``ell`` and
    ``u`` are the two smallness quantities both capped by `threshold`.
    """

    G: float
    ell: float
    u: float
    c3: float
    c4: float
    c5: float
    threshold: float
    window: float

    @property
    def admissible(self) -> bool:
        return self.ell <= self.threshold and self.u <= self.threshold

    def as_dict(self) -> dict[str, float]:
        return {
            "G": self.G,
            "ell": self.ell,
            "u": self.u,
            "c3": self.c3,
            "c4": self.c4,
            "c5": self.c5,
            "threshold": self.threshold,
            "window": self.window,
        }


def sandwich_constants(
    bounds: AssumptionBounds,
    window: float,
    eps: float = 0.1,
    threshold: float = 0.5,
) -> SandwichConstants:
    """
    Evaluate the comparison constants on ``[0, window]``.

    ``K3`` controls how far ``|gamma'|_T`` can drift; ``K2`` the curvature
    forcing. With ``K3 -> 0`` the exponential factor degenerates to its
    linear limit ``8 K2 s``.
    """
    K2, K3 = bounds.K2, bounds.K3
    s = window
    if K3 > 0:
        G = 2.0 * K2 / K3 * math.expm1(4.0 * K3 * s)
    else:
        G = 8.0 * K2 * s
    # Speed factor of |gamma'|_T over the window, from 1/|g'| Lipschitz K3.
    ell = 2.0 * s * K3
    u = G * s
    c3 = eps + ell
    c4 = -math.log1p(-min(u, threshold)) + c3
    c5 = math.log1p(min(u, threshold)) + c3
    return SandwichConstants(
        G=G,
        ell=ell,
        u=u,
        c3=c3,
        c4=c4,
        c5=c5,
        threshold=threshold,
        window=window,
    )


@dataclass
class SandwichReport:
    constants: SandwichConstants
    s: np.ndarray
    F: np.ndarray
    violations: int
    checked: int
    flagged: str = ""

    @property
    def holds(self) -> bool:
        return self.violations == 0


def sandwich_check(
    spec: MetricSpec,
    obs: Observer,
    bounds: AssumptionBounds,
    window: float,
    eps: float = 0.1,
    n_dirs: int = 16,
    tol: Tolerances = DEFAULT_TOLERANCES,
    workers: int = 1,
) -> SandwichReport:
    """
    Check ``exp(-c4) s <= F(s) <= exp(c5) s`` for unit Jacobi fields
    (``J(0) = 0``, ``|J'(0)|_T = 1``) along ``n_dirs`` unit rays.

    Every ray carries all ``N`` fields; each field column is checked.
    Inadmissible constants (smallness fails) are flagged, not raised.
    """
    constants = sandwich_constants(bounds, window, eps)
    E = complete_frame(spec, obs).vectors
    n = spec.dim
    dirs = direction_set("all", n, n_dirs)

    def one(u: np.ndarray) -> GeodesicSolution:
        return integrate_geodesic(
            spec,
            obs.point,
            E @ u,
            window,
            tol,
            frame=E,
            jacobi=(np.zeros((n, n)), np.eye(n)),
        )

    rays = run_batch(one, list(dirs), workers)
    lower = math.exp(-constants.c4)
    upper = math.exp(constants.c5)
    violations = checked = 0
    profile_s = profile_F = np.zeros(0)
    for geo in rays:
        assert geo.A is not None
        s = geo.s[1:]
        F = np.linalg.norm(geo.A[1:], axis=1)
        bad = (F < lower * s[:, None] * (1 - 1e-9)) | (
            F > upper * s[:, None] * (1 + 1e-9)
        )
        violations += int(np.sum(bad))
        checked += bad.size
        if not len(profile_s):
            profile_s, profile_F = geo.s, np.linalg.norm(geo.A, axis=1)
    flagged = ""
    if not constants.admissible:
        flagged = "smallness condition fails (ell={:.3g}, u={:.3g})".format(
            constants.ell, constants.u
        )
    debug(
        "Sandwich window %.3g: %d of %d samples outside", window, violations,
        checked,
    )
    return SandwichReport(
        constants=constants,
        s=profile_s,
        F=profile_F,
        violations=violations,
        checked=checked,
        flagged=flagged,
    )
