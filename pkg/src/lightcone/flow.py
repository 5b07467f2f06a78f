"""
Chart-aware ODE stepping with dense output.

`integrate` advances ``y' = f(s, y)`` from ``s = 0`` to ``s_max`` with
scipy's embedded Runge-Kutta 4(5) stepper (or classic fixed-step RK4), checks
the chart margin after every accepted step and locates the exit parameter by
root finding on the step's dense output. Terminations are reported, never
raised.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np
from scipy.integrate import RK45, OdeSolution
from scipy.interpolate import CubicHermiteSpline
from scipy.optimize import brentq

from .config import DEFAULT_TOLERANCES, Tolerances
from .exceptions import ChartError, NonFiniteError
from .util import debug

REACHED = "reached_smax"
LEFT_CHART = "left_chart"
STEP_FAILURE = "step_failure"
TERMINATIONS = (REACHED, LEFT_CHART, STEP_FAILURE)

Rhs = Callable[[float, np.ndarray], np.ndarray]
Margin = Callable[[np.ndarray], float]


@dataclass
class Trajectory:
    """
    Accepted steps of one integration plus a continuous interpolant.

    ``s`` holds the accepted parameters (strictly increasing), ``y`` the
    states there; the final node is the termination point. `state` evaluates
    the dense output anywhere in ``[0, s_end]``.
    """

    s: np.ndarray
    y: np.ndarray
    termination: str
    method: str
    dense: Optional[Callable[[np.ndarray], np.ndarray]] = field(
        default=None, repr=False
    )
    message: str = ""

    @property
    def s_end(self) -> float:
        return float(self.s[-1])

    @property
    def ok(self) -> bool:
        return self.termination == REACHED

    @property
    def steps(self) -> int:
        return len(self.s) - 1

    def state(self, s: float) -> np.ndarray:
        """
        Interpolated state at parameter ``s`` (clipped to the solved range).
        """
        s = min(max(float(s), 0.0), self.s_end)
        if self.dense is None or self.s_end == 0.0:
            return self.y[0].copy()
        return np.asarray(self.dense(s), dtype=float)

    def states(self, params: np.ndarray) -> np.ndarray:
        """
        Interpolated states at several parameters, shape ``(K, D)``.
        """
        return np.array([self.state(s) for s in params])


def _trivial(y0: np.ndarray, method: str) -> Trajectory:
    return Trajectory(
        s=np.zeros(1), y=y0[None, :].copy(), termination=REACHED, method=method
    )


def _exit_parameter(
    margin: Margin,
    interpolant: Callable[[float], np.ndarray],
    lo: float,
    hi: float,
    xtol: float,
) -> float:
    """
    Parameter in ``[lo, hi]`` where the margin along the interpolant hits
    zero; ``lo`` is inside, ``hi`` is not.
    """

    def f(s: float) -> float:
        value = margin(interpolant(s))
        return value if np.isfinite(value) else -1.0

    if f(lo) <= 0.0:
        return lo
    return float(brentq(f, lo, hi, xtol=xtol))


def _adaptive(
    rhs: Rhs,
    y0: np.ndarray,
    s_max: float,
    margin: Margin,
    tol: Tolerances,
) -> Trajectory:
    try:
        solver = RK45(rhs, 0.0, y0, s_max, rtol=tol.rtol, atol=tol.atol)
    except ChartError as exc:
        out = _trivial(y0, "rk45")
        out.termination, out.message = LEFT_CHART, str(exc)
        return out
    except NonFiniteError as exc:
        out = _trivial(y0, "rk45")
        out.termination, out.message = STEP_FAILURE, str(exc)
        return out
    ts = [0.0]
    ys = [y0.copy()]
    interpolants = []
    termination = REACHED
    message = ""
    while solver.status == "running":
        if len(ts) > tol.max_steps:
            termination, message = STEP_FAILURE, "too many steps"
            break
        try:
            msg = solver.step()
        except ChartError as exc:
            termination, message = LEFT_CHART, str(exc)
            break
        except (NonFiniteError, np.linalg.LinAlgError) as exc:
            termination, message = STEP_FAILURE, str(exc)
            break
        if solver.status == "failed":
            termination, message = STEP_FAILURE, str(msg)
            break
        if not np.all(np.isfinite(solver.y)):
            termination, message = STEP_FAILURE, "state became non-finite"
            break
        interpolant = solver.dense_output()
        if margin(solver.y) <= 0.0:
            s_exit = _exit_parameter(
                margin, interpolant, solver.t_old, solver.t, tol.bisect
            )
            interpolants.append(interpolant)
            ts.append(s_exit if s_exit > ts[-1] else solver.t)
            ys.append(interpolant(s_exit))
            termination = LEFT_CHART
            message = "trajectory left the chart at s = {:.6g}".format(s_exit)
            break
        interpolants.append(interpolant)
        ts.append(solver.t)
        ys.append(solver.y.copy())
    if not interpolants:
        out = _trivial(y0, "rk45")
        out.termination, out.message = termination, message
        return out
    # The last interpolant may reach past a truncated exit step; OdeSolution
    # only needs the breakpoints to be increasing.
    dense = OdeSolution(np.array(ts), interpolants)
    return Trajectory(
        s=np.array(ts),
        y=np.array(ys),
        termination=termination,
        method="rk45",
        dense=dense,
        message=message,
    )


def _rk4_step(rhs: Rhs, s: float, y: np.ndarray, h: float) -> np.ndarray:
    k1 = rhs(s, y)
    k2 = rhs(s + h / 2, y + h / 2 * k1)
    k3 = rhs(s + h / 2, y + h / 2 * k2)
    k4 = rhs(s + h, y + h * k3)
    return y + h / 6 * (k1 + 2 * k2 + 2 * k3 + k4)


def _fixed(
    rhs: Rhs,
    y0: np.ndarray,
    s_max: float,
    margin: Margin,
    tol: Tolerances,
) -> Trajectory:
    ts = [0.0]
    ys = [y0.copy()]
    try:
        slopes = [rhs(0.0, y0)]
    except ChartError as exc:
        out = _trivial(y0, "rk4")
        out.termination, out.message = LEFT_CHART, str(exc)
        return out
    termination = REACHED
    message = ""
    steps = int(np.ceil(s_max / tol.fixed_step - 1e-12))
    if steps > tol.max_steps:
        steps = tol.max_steps
        termination, message = STEP_FAILURE, "too many steps"
    for _ in range(steps):
        s = ts[-1]
        h = min(tol.fixed_step, s_max - s)
        try:
            y = _rk4_step(rhs, s, ys[-1], h)
            slope = rhs(s + h, y)
        except ChartError as exc:
            termination, message = LEFT_CHART, str(exc)
            break
        except (NonFiniteError, FloatingPointError) as exc:
            termination, message = STEP_FAILURE, str(exc)
            break
        if not np.all(np.isfinite(y)):
            termination, message = STEP_FAILURE, "state became non-finite"
            break
        ts.append(s + h)
        ys.append(y)
        slopes.append(slope)
        if margin(y) <= 0.0:
            segment = CubicHermiteSpline(
                ts[-2:], np.array(ys[-2:]), np.array(slopes[-2:])
            )
            s_exit = _exit_parameter(
                margin, segment, ts[-2], ts[-1], tol.bisect
            )
            if s_exit > ts[-2]:
                ys[-1] = segment(s_exit)
                slopes[-1] = segment(s_exit, 1)
                ts[-1] = s_exit
            else:
                del ts[-1], ys[-1], slopes[-1]
            termination = LEFT_CHART
            message = "trajectory left the chart at s = {:.6g}".format(s_exit)
            break
    if len(ts) == 1:
        out = _trivial(y0, "rk4")
        out.termination, out.message = termination, message
        return out
    dense = CubicHermiteSpline(np.array(ts), np.array(ys), np.array(slopes))
    return Trajectory(
        s=np.array(ts),
        y=np.array(ys),
        termination=termination,
        method="rk4",
        dense=dense,
        message=message,
    )


def integrate(
    rhs: Rhs,
    y0: np.ndarray,
    s_max: float,
    margin: Margin,
    tol: Tolerances = DEFAULT_TOLERANCES,
) -> Trajectory:
    """
    Integrate ``y' = rhs(s, y)`` over ``[0, s_max]``.

    :param margin:
        Signed chart margin of a state, positive inside. Integration stops
        with ``left_chart`` where it reaches zero (located on the dense
        output) or when ``rhs`` raises `.ChartError`.
    :param tol: `.Tolerances`; ``method`` picks the stepper and ``fallback``
        retries a failed adaptive run with fixed RK4 steps.

    :returns: a `Trajectory`; ``s_max == 0`` yields the one-node trajectory.
    """
    y0 = np.asarray(y0, dtype=float)
    if not s_max > 0:
        if s_max < 0:
            raise ValueError("s_max must not be negative")
        return _trivial(y0, tol.method)
    if tol.method == "rk4":
        return _fixed(rhs, y0, s_max, margin, tol)
    trajectory = _adaptive(rhs, y0, s_max, margin, tol)
    if trajectory.termination == STEP_FAILURE and tol.fallback:
        debug(
            "Adaptive integration failed at s=%.6g (%s); retrying with RK4",
            trajectory.s_end,
            trajectory.message,
        )
        trajectory = _fixed(rhs, y0, s_max, margin, tol)
    debug(
        "Integration ended with %s at s=%.6g after %d steps",
        trajectory.termination,
        trajectory.s_end,
        trajectory.steps,
    )
    return trajectory
