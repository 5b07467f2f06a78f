"""
Deterministic direction sets and cap quadratures.

All directions are returned in observer-frame components, where the
reference metric is the Euclidean one, so "unit" means unit for ``g_T``.
Frame index 0 is the observer's time direction.
"""

from __future__ import annotations

import math

import numpy as np
from scipy.special import gamma
from scipy.stats import norm, qmc

KINDS = ("all", "spatial", "timelike", "null")

GOLDEN_ANGLE = math.pi * (3.0 - math.sqrt(5.0))


def sphere_area(dim: int) -> float:
    """
    Area of the unit sphere ``S^{dim-1}`` in ``R^dim`` (``2`` for ``dim=1``).
    """
    return 2.0 * math.pi ** (dim / 2.0) / gamma(dim / 2.0)


def ball_volume(dim: int) -> float:
    """
    Volume of the unit ball in ``R^dim``.
    """
    return sphere_area(dim) / dim


def fibonacci_sphere(count: int) -> np.ndarray:
    """
    Spherical Fibonacci lattice of ``count`` points on ``S^2``.
    """
    i = np.arange(count, dtype=float)
    offset = 2.0 / count
    y = i * offset - 1.0 + offset / 2.0
    r = np.sqrt(np.clip(1.0 - y * y, 0.0, None))
    phi = ((i + 1.0) % count) * GOLDEN_ANGLE
    return np.column_stack([np.cos(phi) * r, y, np.sin(phi) * r])


def halton_sphere(dim: int, count: int) -> np.ndarray:
    """
    Low-discrepancy points on ``S^{dim-1}`` for ``dim >= 4``.

    Unscrambled Halton points (skipping the all-zero first point) pushed
    through the inverse normal CDF, then normalized: Gaussian vectors are
    rotation invariant, so the result is evenly spread and reproducible.
    """
    sampler = qmc.Halton(d=dim, scramble=False)
    sampler.fast_forward(1)
    gauss = norm.ppf(sampler.random(count))
    lengths = np.linalg.norm(gauss, axis=1)
    return gauss / lengths[:, None]


def sphere_points(dim: int, count: int) -> np.ndarray:
    """
    ``count`` deterministic unit vectors in ``R^dim`` (``S^{dim-1}``).

    ``dim == 1`` always yields the two points ``±1``.
    """
    if dim < 1:
        raise ValueError("sphere dimension must be positive")
    if dim == 1:
        return np.array([[1.0], [-1.0]])
    if count < 1:
        raise ValueError("need at least one direction")
    if dim == 2:
        angles = 2.0 * math.pi * (np.arange(count) + 0.5) / count
        return np.column_stack([np.cos(angles), np.sin(angles)])
    if dim == 3:
        return fibonacci_sphere(count)
    return halton_sphere(dim, count)


def directions(kind: str, dim: int, count: int) -> np.ndarray:
    """
    Direction set of the given causal ``kind`` in a ``dim``-dimensional
    tangent space, frame components, unit for ``g_T``.

    - ``all``: the whole unit sphere.
    - ``spatial``: unit vectors orthogonal to the observer.
    - ``timelike``: future-pointing timelike vectors (inside the cone of
      half-angle ``pi/4`` about the observer).
    - ``null``: past-pointing null vectors ``(-1, u)/sqrt(2)``.
    """
    if kind == "all":
        return sphere_points(dim, count)
    spatial = sphere_points(dim - 1, count)
    zeros = np.zeros((len(spatial), 1))
    if kind == "spatial":
        return np.hstack([zeros, spatial])
    if kind == "null":
        return np.hstack([zeros - 1.0, spatial]) / math.sqrt(2.0)
    if kind == "timelike":
        dirs, _ = cap_quadrature(dim, math.pi / 8, 1, count)
        return dirs
    raise ValueError(
        "unknown direction kind {!r}; expected one of {}".format(kind, KINDS)
    )


def cap_solid_angle(dim: int, half_angle: float) -> float:
    """
    Area of a cap of the given half-angle on ``S^{dim-1}``.
    """
    n = dim - 1
    nodes, weights = np.polynomial.legendre.leggauss(64)
    theta = 0.5 * half_angle * (nodes + 1.0)
    integrand = weights * np.sin(theta) ** (n - 1)
    radial = 0.5 * half_angle * float(np.sum(integrand))
    return sphere_area(n) * radial


def cap_quadrature(
    dim: int,
    half_angle: float,
    n_theta: int,
    n_u: int,
    axis: float = 1.0,
) -> tuple[np.ndarray, np.ndarray]:
    """
    Product quadrature over a cap about ``axis * e_0`` on ``S^{dim-1}``.

    The polar angle uses Gauss-Legendre nodes with the ``sin^{n-1}`` area
    factor folded into the weights, the azimuthal sphere ``S^{n-1}`` uses
    `sphere_points` with equal weights. Weights sum to the cap area.

    :returns: ``(directions, weights)``, shapes ``(K, dim)`` and ``(K,)``.
    """
    if not 0.0 < half_angle <= math.pi:
        raise ValueError("cap half-angle must lie in (0, pi]")
    n = dim - 1
    nodes, gl = np.polynomial.legendre.leggauss(n_theta)
    theta = 0.5 * half_angle * (nodes + 1.0)
    theta_w = 0.5 * half_angle * gl * np.sin(theta) ** (n - 1)
    u = sphere_points(n, n_u)
    u_w = sphere_area(n) / len(u)
    dirs = []
    weights = []
    for th, tw in zip(theta, theta_w):
        head = np.full((len(u), 1), axis * math.cos(th))
        dirs.append(np.hstack([head, math.sin(th) * u]))
        weights.append(np.full(len(u), tw * u_w))
    return np.vstack(dirs), np.concatenate(weights)


def ball_points(dim: int, radius: float, n_dirs: int, n_radii: int):
    """
    Ray grid covering the ball of ``radius``: ``n_dirs`` sphere directions
    times ``n_radii`` evenly spaced radii (zero excluded).

    :returns: ``(directions, radii)``; points are ``radii[j] * directions[i]``.
    """
    radii = radius * np.arange(1, n_radii + 1) / n_radii
    return sphere_points(dim, n_dirs), radii
