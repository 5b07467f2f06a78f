from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .exceptions import ChartError


@dataclass(frozen=True)
class ChartDomain:
    """
    Where a chart's coordinates are valid.

    :param box:
        ``(lo, hi)`` per coordinate, ``t`` first. Either side may be infinite.
    :param r_min:
        Optional excision radius: points need ``|x| > r_min`` in the spatial
        coordinates (keeps e.g. a horizon out of the chart).
    :param periods:
        Per-coordinate lattice period or ``None``. Periodic axes are
        integrated on the universal cover and never bound the chart; use
        `identify` to map points back to the fundamental domain.
    """

    box: tuple[tuple[float, float], ...]
    r_min: Optional[float] = None
    periods: tuple[Optional[float], ...] = ()

    def __post_init__(self) -> None:
        for lo, hi in self.box:
            if not lo < hi:
                raise ValueError(
                    "empty chart interval [{}, {}]".format(lo, hi)
                )
        if self.periods and len(self.periods) != len(self.box):
            raise ValueError("one period entry per coordinate expected")
        if self.periods and self.periods[0] is not None:
            raise ValueError("the time coordinate cannot be periodic")

    @classmethod
    def unbounded(cls, dim: int, **kwargs: object) -> "ChartDomain":
        inf = float("inf")
        return cls(box=((-inf, inf),) * dim, **kwargs)  # type: ignore

    @property
    def dim(self) -> int:
        return len(self.box)

    def period(self, axis: int) -> Optional[float]:
        return self.periods[axis] if self.periods else None

    @property
    def periodic(self) -> bool:
        return any(p is not None for p in self.periods)

    def margin(self, points: np.ndarray) -> np.ndarray:
        """
        Signed distance (in coordinates) from each point to the chart edge.

        Positive inside. ``points`` has shape ``(P, N)`` or ``(N,)``.
        """
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        margins = np.full(len(pts), np.inf)
        for axis, (lo, hi) in enumerate(self.box):
            if self.period(axis) is not None:
                continue
            col = pts[:, axis]
            with np.errstate(invalid="ignore"):
                margins = np.minimum(margins, np.minimum(col - lo, hi - col))
        if self.r_min is not None:
            radius = np.linalg.norm(pts[:, 1:], axis=1)
            margins = np.minimum(margins, radius - self.r_min)
        margins[~np.all(np.isfinite(pts), axis=1)] = -np.inf
        return margins

    def contains(self, points: np.ndarray, guard: float = 0.0) -> np.ndarray:
        return self.margin(points) > guard

    def check(self, points: np.ndarray, what: str = "point") -> None:
        """
        Raise `.ChartError` unless every one of ``points`` is inside.
        """
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        inside = self.contains(pts)
        if not inside.all():
            bad = pts[int(np.argmin(inside))]
            raise ChartError(
                "{} {} lies outside the chart".format(what, tuple(bad)), bad
            )

    def identify(self, points: np.ndarray) -> np.ndarray:
        """
        Reduce periodic coordinates into ``[lo, lo + period)``.

        Non-periodic coordinates are returned unchanged.
        """
        pts = np.array(points, dtype=float)
        flat = np.atleast_2d(pts)
        for axis in range(self.dim):
            period = self.period(axis)
            if period is None:
                continue
            lo = self.box[axis][0]
            lo = lo if np.isfinite(lo) else 0.0
            flat[:, axis] = lo + np.mod(flat[:, axis] - lo, period)
        return flat.reshape(pts.shape)

    def probe_box(self) -> np.ndarray:
        """
        Finite box used for probe sampling, shape ``(N, 2)``.

        Infinite sides fall back to ``[-1, 1]``; periodic axes use one
        period.
        """
        out = np.empty((self.dim, 2))
        for axis, (lo, hi) in enumerate(self.box):
            period = self.period(axis)
            if period is not None:
                start = lo if np.isfinite(lo) else 0.0
                out[axis] = (start, start + period)
                continue
            out[axis] = (
                lo if np.isfinite(lo) else -1.0,
                hi if np.isfinite(hi) else 1.0,
            )
        return out

    def sections(self, names: Sequence[str]) -> dict[str, object]:
        """
        Document form of this domain (keys of a ``[domain]`` section).
        """
        entries: dict[str, object] = {}
        for name, (lo, hi), axis in zip(names, self.box, range(self.dim)):
            period = self.period(axis)
            if period is not None:
                entries["period_" + name] = float(period)
            elif np.isfinite(lo) or np.isfinite(hi):
                entries[name] = (lo, hi)
        if self.r_min is not None:
            entries["r_min"] = float(self.r_min)
        return entries
