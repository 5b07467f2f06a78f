"""
Central finite-difference jets of batched point functions.

Every function differentiated here takes an array of points, shape
``(P, N)``, and returns values of shape ``(P, ...)``. A whole stencil is
evaluated in one call.

Step sizes: first derivatives use ``h = eps**(1/3) * max(1, |x_a|)``, second
derivatives ``h = eps**(1/4) * max(1, |x_a|)``; mixed second derivatives use
the four-point cross stencil, so the Hessian is symmetric by construction.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

EPS = np.finfo(float).eps
FIRST = EPS ** (1.0 / 3.0)
SECOND = EPS ** (1.0 / 4.0)

PointFunction = Callable[[np.ndarray], np.ndarray]


@dataclass(frozen=True)
class Jet:
    """
    Value and derivatives of a field at one point.

    ``d1[a]`` is the derivative along coordinate ``a``; ``d2[a, b]`` the
    (symmetric) second derivative. ``d2`` is ``None`` for first-order jets.
    """

    value: np.ndarray
    d1: np.ndarray
    d2: Optional[np.ndarray] = None


def steps(x: np.ndarray, base: float) -> np.ndarray:
    return base * np.maximum(1.0, np.abs(x))


def stencil(x: np.ndarray, order: int = 2) -> np.ndarray:
    """
    All points needed for a jet of the given ``order`` at ``x``.

    Layout: center, then ``±h1`` per axis, then (order 2) ``±h2`` per axis,
    then the ``(++, +-, -+, --)`` cross points per axis pair ``a < b``.
    """
    dim = len(x)
    h1 = steps(x, FIRST)
    pts = [x]
    for a in range(dim):
        for sign in (1.0, -1.0):
            p = x.copy()
            p[a] += sign * h1[a]
            pts.append(p)
    if order >= 2:
        h2 = steps(x, SECOND)
        for a in range(dim):
            for sign in (1.0, -1.0):
                p = x.copy()
                p[a] += sign * h2[a]
                pts.append(p)
        for a in range(dim):
            for b in range(a + 1, dim):
                for sa, sb in ((1, 1), (1, -1), (-1, 1), (-1, -1)):
                    p = x.copy()
                    p[a] += sa * h2[a]
                    p[b] += sb * h2[b]
                    pts.append(p)
    return np.array(pts)


def jet_from_values(
    x: np.ndarray, values: np.ndarray, order: int = 2
) -> Jet:
    """
    Assemble a `Jet` from function values on `stencil` points.
    """
    dim = len(x)
    h1 = steps(x, FIRST)
    center = values[0]
    shape = center.shape
    d1 = np.empty((dim,) + shape)
    k = 1
    for a in range(dim):
        d1[a] = (values[k] - values[k + 1]) / (2.0 * h1[a])
        k += 2
    if order < 2:
        return Jet(center, d1)
    h2 = steps(x, SECOND)
    d2 = np.empty((dim, dim) + shape)
    for a in range(dim):
        d2[a, a] = (values[k] - 2.0 * center + values[k + 1]) / h2[a] ** 2
        k += 2
    for a in range(dim):
        for b in range(a + 1, dim):
            pp, pm, mp, mm = values[k : k + 4]
            mixed = (pp - pm - mp + mm) / (4.0 * h2[a] * h2[b])
            d2[a, b] = mixed
            d2[b, a] = mixed
            k += 4
    return Jet(center, d1, d2)


def jet(f: PointFunction, x: np.ndarray, order: int = 2) -> Jet:
    """
    Finite-difference jet of ``f`` at ``x`` up to ``order`` (1 or 2).
    """
    x = np.asarray(x, dtype=float)
    return jet_from_values(x, f(stencil(x, order)), order)


def gradient(f: PointFunction, x: np.ndarray) -> np.ndarray:
    """
    First derivatives only, shape ``(N, ...)``.
    """
    return jet(f, x, order=1).d1
