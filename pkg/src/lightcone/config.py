"""
Configuration for the lightcone CLI, layered the invoke way.

Library functions never reach into this module; they take explicit keyword
arguments. Tasks read a `LightconeConfig` (defaults, then system/user/project
YAML files, then ``LIGHTCONE_*`` environment variables, then flags) and pass
plain values down.
"""

from __future__ import annotations

import os
from dataclasses import dataclass, replace
from typing import Any, Mapping, Optional

from invoke.config import Config, merge_dicts


@dataclass(frozen=True)
class Tolerances:
    """
    Numerical tolerance bundle threaded through the analysis API.

    :param rtol: Relative tolerance of the adaptive integrator.
    :param atol: Absolute tolerance of the adaptive integrator.
    :param bisect: Parameter tolerance for bisection and bracketing searches.
    :param newton: Residual tolerance for shooting solves.
    :param method: ``"rk45"`` (adaptive, embedded error control) or ``"rk4"``
        (classic fixed step).
    :param fixed_step: Step used by ``"rk4"`` and by the fallback.
    :param fallback: Retry a failed adaptive integration with fixed steps.
    :param guard: Margin kept between trajectories and the chart boundary, so
        finite-difference stencils stay inside the chart.
    :param max_steps: Hard cap on accepted steps per integration.
    """

    rtol: float = 1e-10
    atol: float = 1e-12
    bisect: float = 1e-8
    newton: float = 1e-10
    method: str = "rk45"
    fixed_step: float = 1e-2
    fallback: bool = True
    guard: float = 1e-3
    max_steps: int = 100000

    def __post_init__(self) -> None:
        for name in ("rtol", "atol", "bisect", "newton", "fixed_step"):
            if not getattr(self, name) > 0:
                raise ValueError(
                    "tolerance {!r} must be positive".format(name)
                )
        if self.method not in ("rk45", "rk4"):
            raise ValueError("unknown integrator {!r}".format(self.method))

    def loosened(self, factor: float) -> "Tolerances":
        """
        Return a copy with integrator tolerances multiplied by ``factor``.
        """
        return replace(
            self, rtol=self.rtol * factor, atol=self.atol * factor
        )

    @classmethod
    def from_config(cls, config: Mapping[str, Any]) -> "Tolerances":
        tol = config["tolerances"]
        integ = config["integrator"]
        return cls(
            rtol=float(tol["rtol"]),
            atol=float(tol["atol"]),
            bisect=float(tol["bisect"]),
            newton=float(tol["newton"]),
            method=str(integ["method"]),
            fixed_step=float(integ["fixed_step"]),
            fallback=bool(integ["fallback"]),
            guard=float(integ["guard"]),
        )


DEFAULT_TOLERANCES = Tolerances()

#: Data file formats: CSV tables or two-column plot text.
FORMATS = ("csv", "plotdata")


class LightconeConfig(Config):
    """
    `invoke.Config` subclass carrying lightcone's own settings.

    The prefix makes config files ``lightcone.yaml`` (system, user, project)
    and environment variables ``LIGHTCONE_<KEY>``, e.g.
    ``LIGHTCONE_THREADS=4`` or ``LIGHTCONE_TOLERANCES_RTOL=1e-9``.
    """

    prefix = "lightcone"

    @staticmethod
    def global_defaults() -> dict:
        their = Config.global_defaults()
        ours = {
            "threads": 1,
            "seed": 0,
            "tolerances": {
                "rtol": DEFAULT_TOLERANCES.rtol,
                "atol": DEFAULT_TOLERANCES.atol,
                "bisect": DEFAULT_TOLERANCES.bisect,
                "newton": DEFAULT_TOLERANCES.newton,
            },
            "integrator": {
                "method": DEFAULT_TOLERANCES.method,
                "fixed_step": DEFAULT_TOLERANCES.fixed_step,
                "fallback": DEFAULT_TOLERANCES.fallback,
                "guard": DEFAULT_TOLERANCES.guard,
            },
            "directions": {"count": 64, "minimum": 8},
            "bounds": {
                "c_n": 0.125,
                "kappa": 0.25,
                "eps": 0.1,
                "c_sigma_slope": 0.5,
            },
            "output": {"format": "csv", "directory": "lightcone-out"},
        }
        return merge_dicts(their, ours)


def _floats(text: Optional[str], what: str) -> Optional[tuple[float, ...]]:
    if text is None or text == "":
        return None
    try:
        return tuple(float(part) for part in text.split(","))
    except ValueError:
        raise ValueError(
            "{} must be comma-separated numbers, got {!r}".format(what, text)
        )


@dataclass(frozen=True)
class RunConfig:
    """
    Everything one CLI command needs, resolved from flags over config.

    ``point`` and ``T`` are ``None`` for "origin" and "foliation normal";
    ``grid`` means whatever grid the command samples (probe count, loop
    grid density, cone grid, number of radii).
    """

    command: str
    spec: str
    point: Optional[tuple[float, ...]]
    T: Optional[tuple[float, ...]]
    r_max: float
    grid: int
    tol: Tolerances
    out: str
    seed: int
    format: str
    threads: int

    def __post_init__(self) -> None:
        if not self.r_max > 0:
            raise ValueError("--rmax must be positive")
        if self.grid < 1:
            raise ValueError("--grid must be at least 1")
        if self.format not in FORMATS:
            raise ValueError(
                "unknown --format {!r}; expected one of {}".format(
                    self.format, ", ".join(FORMATS)
                )
            )

    @classmethod
    def from_flags(
        cls,
        config: Mapping[str, Any],
        command: str,
        spec: str,
        point: Optional[str] = None,
        T: Optional[str] = None,
        rmax: float = 1.0,
        grid: int = 8,
        tol: Optional[float] = None,
        out: Optional[str] = None,
        seed: Optional[int] = None,
        format: Optional[str] = None,
    ) -> "RunConfig":
        """
        Merge task flags over ``config`` (a `LightconeConfig`).

        ``tol`` sets the integrator's relative tolerance, the absolute one
        following at a hundredth of it.
        """
        tolerances = Tolerances.from_config(config)
        if tol is not None:
            tolerances = replace(tolerances, rtol=tol, atol=tol * 1e-2)
        output = config["output"]
        observer = None if T in (None, "", "foliation-normal") else T
        return cls(
            command=command,
            spec=spec,
            point=_floats(point, "--point"),
            T=_floats(observer, "--T"),
            r_max=float(rmax),
            grid=int(grid),
            tol=tolerances,
            out=out or os.path.join(str(output["directory"]), command),
            seed=int(config["seed"] if seed is None else seed),
            format=str(format or output["format"]),
            threads=max(1, int(config["threads"])),
        )

    def settings(self) -> dict[str, Any]:
        """
        Plain values for the report manifest.
        """
        return {
            "spec": self.spec,
            "point": None if self.point is None else list(self.point),
            "T": "foliation-normal" if self.T is None else list(self.T),
            "rmax": self.r_max,
            "grid": self.grid,
            "rtol": self.tol.rtol,
            "atol": self.tol.atol,
            "threads": self.threads,
            "format": self.format,
        }
