"""Adaptive Runge-Kutta-Fehlberg 4(5) with dense output and event location.

The classic Fehlberg embedded pair drives a standard step controller
(mixed tolerance abs_tol + rel_tol*|y|, safety factor 0.9, growth clamp
[0.2, 5]); the fifth-order solution is propagated.  Dense output is cubic
Hermite on step endpoints; events are located by sign change over a step
and refined by bisection on the interpolant, which is unconditionally
robust near grazing zeros.

States are plain sequences of floats.  Systems here are small (dimension
3 to 7, or a few hundred for the joint crossing check), so Python lists
beat array wrappers.
"""

from __future__ import annotations

import math
from bisect import bisect_right
from dataclasses import dataclass, field
from typing import Callable, Sequence

__all__ = [
    "Tolerances",
    "OdeProblem",
    "EventSpec",
    "Event",
    "Segment",
    "Trajectory",
    "IntegrationError",
    "StepUnderflow",
    "NonFiniteState",
    "integrate",
    "refine_root",
]

# Fehlberg 4(5) tableau
_A21 = 1.0 / 4.0
_A31, _A32 = 3.0 / 32.0, 9.0 / 32.0
_A41, _A42, _A43 = 1932.0 / 2197.0, -7200.0 / 2197.0, 7296.0 / 2197.0
_A51, _A52, _A53, _A54 = 439.0 / 216.0, -8.0, 3680.0 / 513.0, -845.0 / 4104.0
_A61, _A62, _A63, _A64, _A65 = (-8.0 / 27.0, 2.0, -3544.0 / 2565.0,
                                1859.0 / 4104.0, -11.0 / 40.0)
_C2, _C3, _C4, _C5, _C6 = 1.0 / 4.0, 3.0 / 8.0, 12.0 / 13.0, 1.0, 1.0 / 2.0
# fifth-order weights (propagated) and embedded error weights (5th - 4th)
_B1, _B3, _B4, _B5, _B6 = (16.0 / 135.0, 6656.0 / 12825.0, 28561.0 / 56430.0,
                           -9.0 / 50.0, 2.0 / 55.0)
_E1 = 16.0 / 135.0 - 25.0 / 216.0
_E3 = 6656.0 / 12825.0 - 1408.0 / 2565.0
_E4 = 28561.0 / 56430.0 - 2197.0 / 4104.0
_E5 = -9.0 / 50.0 + 1.0 / 5.0
_E6 = 2.0 / 55.0

_TIME_TOL = 1e-12  # event localization: width 1e-12 * max(1, |t|)


@dataclass(frozen=True)
class Tolerances:
    abs_tol: float = 1e-10
    rel_tol: float = 1e-10
    min_step: float = 1e-14
    max_step: float = 0.1

    def __post_init__(self):
        if min(self.abs_tol, self.rel_tol, self.min_step, self.max_step) <= 0.0:
            raise ValueError("tolerances must be positive")
        if not self.min_step < self.max_step:
            raise ValueError("min_step must be smaller than max_step")


@dataclass(frozen=True)
class OdeProblem:
    dimension: int
    rhs: Callable[[float, Sequence[float]], Sequence[float]]
    t0: float
    y0: tuple
    t_end: float

    def __post_init__(self):
        if self.dimension < 1 or len(self.y0) != self.dimension:
            raise ValueError("state dimension mismatch")
        if not self.t_end > self.t0:
            raise ValueError("t_end must exceed t0")


@dataclass(frozen=True)
class EventSpec:
    guard: Callable[[float, Sequence[float]], float]
    direction: str = "any"  # any | decreasing | increasing
    terminal: bool = False

    def __post_init__(self):
        if self.direction not in ("any", "decreasing", "increasing"):
            raise ValueError(f"bad event direction '{self.direction}'")


@dataclass(frozen=True)
class Event:
    t: float
    state: tuple
    index: int


@dataclass(frozen=True)
class Segment:
    """Cubic Hermite interpolant over one accepted step."""

    t0: float
    t1: float
    y0: Sequence[float]
    y1: Sequence[float]
    f0: Sequence[float]
    f1: Sequence[float]

    def __call__(self, t: float) -> tuple:
        h = self.t1 - self.t0
        s = (t - self.t0) / h
        s2 = s * s
        s3 = s2 * s
        h00 = 2.0 * s3 - 3.0 * s2 + 1.0
        h10 = s3 - 2.0 * s2 + s
        h01 = -2.0 * s3 + 3.0 * s2
        h11 = s3 - s2
        y0, y1, f0, f1 = self.y0, self.y1, self.f0, self.f1
        return tuple(
            h00 * y0[i] + h10 * h * f0[i] + h01 * y1[i] + h11 * h * f1[i]
            for i in range(len(y0))
        )


@dataclass
class Trajectory:
    """Accepted knots, per-step interpolants, and located events.

    Segments are retained only when the integration was run with
    keep_segments=True; knots and events are always present.
    """

    times: list[float] = field(default_factory=list)
    states: list[Sequence[float]] = field(default_factory=list)
    segments: list[Segment] = field(default_factory=list)
    events: list[Event] = field(default_factory=list)

    def __call__(self, t: float) -> tuple:
        return self.state_at(t)

    def state_at(self, t: float) -> tuple:
        if not self.segments:
            if self.times and t == self.times[0]:
                return self.states[0]
            raise ValueError("trajectory has no interior")
        if not self.times[0] <= t <= self.times[-1]:
            raise ValueError(f"t={t} outside trajectory range "
                             f"[{self.times[0]}, {self.times[-1]}]")
        i = bisect_right(self.times, t) - 1
        i = min(max(i, 0), len(self.segments) - 1)
        return self.segments[i](t)

    @property
    def t_final(self) -> float:
        return self.times[-1]

    @property
    def final_state(self) -> tuple:
        return self.states[-1]


class IntegrationError(RuntimeError):
    """Base integration failure; `trajectory` holds the partial result."""

    def __init__(self, message: str, trajectory: Trajectory):
        super().__init__(message)
        self.trajectory = trajectory


class StepUnderflow(IntegrationError):
    pass


class NonFiniteState(IntegrationError):
    pass


def _all_finite(values: Sequence[float]) -> bool:
    for v in values:
        if not math.isfinite(v):
            return False
    return True


def refine_root(segment, guard, bracket: tuple[float, float]) -> float:
    """Bisect guard(t, segment(t)) over `bracket` to width 1e-12*max(1,|t|).

    `segment` is any callable t -> state.  The guard must change sign
    across the bracket (a zero endpoint counts).
    """
    a, b = bracket
    fa = guard(a, segment(a))
    if fa == 0.0:
        return a
    fb = guard(b, segment(b))
    if fb == 0.0:
        return b
    if (fa > 0.0) == (fb > 0.0):
        raise ValueError(f"guard has no sign change over [{a}, {b}]")
    positive_left = fa > 0.0
    for _ in range(200):
        m = 0.5 * (a + b)
        if (b - a) <= _TIME_TOL * max(1.0, abs(m)):
            break
        fm = guard(m, segment(m))
        if fm == 0.0:
            return m
        if (fm > 0.0) == positive_left:
            a = m
        else:
            b = m
    return 0.5 * (a + b)


def _triggered(direction: str, g0: float, g1: float) -> bool:
    if direction == "increasing":
        return g0 < 0.0 and g1 >= 0.0
    if direction == "decreasing":
        return g0 > 0.0 and g1 <= 0.0
    return (g0 < 0.0 and g1 >= 0.0) or (g0 > 0.0 and g1 <= 0.0)


def _initial_step(rhs, t0, y0, f0, tol: Tolerances, span: float) -> float:
    d0 = 0.0
    d1 = 0.0
    for i in range(len(y0)):
        sc = tol.abs_tol + tol.rel_tol * abs(y0[i])
        d0 = max(d0, abs(y0[i]) / sc)
        d1 = max(d1, abs(f0[i]) / sc)
    if d0 < 1e-5 or d1 < 1e-5:
        h = 1e-6
    else:
        h = 0.01 * d0 / d1
    return max(tol.min_step, min(h, tol.max_step, span))


def integrate(problem: OdeProblem, tol: Tolerances = Tolerances(),
              events: Sequence[EventSpec] = (), keep_segments: bool = True) -> Trajectory:
    """Run RKF45 from t0 to t_end (or to the first terminal event).

    Raises StepUnderflow when the controller would need a step below
    min_step (near-singular dynamics) and NonFiniteState when the state
    itself stops being finite; both carry the partial trajectory.
    keep_segments=False drops dense output (cheaper for long sweeps);
    event location is unaffected.
    """
    rhs = problem.rhs
    n = problem.dimension
    t = problem.t0
    t_end = problem.t_end
    y = list(problem.y0)

    traj = Trajectory()
    traj.times.append(t)
    traj.states.append(tuple(y))

    if not _all_finite(y):
        raise NonFiniteState("initial state is not finite", traj)
    f0 = list(rhs(t, y))
    if len(f0) != n:
        raise ValueError("rhs dimension mismatch")
    if not _all_finite(f0):
        raise NonFiniteState(f"rhs not finite at t={t}", traj)

    guards = [ev.guard(t, y) for ev in events]

    abs_tol, rel_tol = tol.abs_tol, tol.rel_tol
    min_step, max_step = tol.min_step, tol.max_step
    rng = range(n)
    # local bindings: the stage loop is the hot path of every sweep
    a21, a31, a32, a41, a42, a43 = _A21, _A31, _A32, _A41, _A42, _A43
    a51, a52, a53, a54 = _A51, _A52, _A53, _A54
    a61, a62, a63, a64, a65 = _A61, _A62, _A63, _A64, _A65
    b1, b3, b4, b5, b6 = _B1, _B3, _B4, _B5, _B6
    e1, e3, e4, e5, e6 = _E1, _E3, _E4, _E5, _E6
    isfinite = math.isfinite

    h = _initial_step(rhs, t, y, f0, tol, t_end - t)
    end_tol = _TIME_TOL * max(1.0, abs(t_end))

    while t < t_end - end_tol:
        if h > t_end - t:
            h = t_end - t

        # six Fehlberg stages
        k1 = f0
        ha = h * a21
        y2 = [y[i] + ha * k1[i] for i in rng]
        k2 = rhs(t + _C2 * h, y2)
        y3 = [y[i] + h * (a31 * k1[i] + a32 * k2[i]) for i in rng]
        k3 = rhs(t + _C3 * h, y3)
        y4 = [y[i] + h * (a41 * k1[i] + a42 * k2[i] + a43 * k3[i]) for i in rng]
        k4 = rhs(t + _C4 * h, y4)
        y5 = [y[i] + h * (a51 * k1[i] + a52 * k2[i] + a53 * k3[i] + a54 * k4[i])
              for i in rng]
        k5 = rhs(t + _C5 * h, y5)
        y6 = [y[i] + h * (a61 * k1[i] + a62 * k2[i] + a63 * k3[i] + a64 * k4[i]
                          + a65 * k5[i]) for i in rng]
        k6 = rhs(t + _C6 * h, y6)

        y_new = [y[i] + h * (b1 * k1[i] + b3 * k3[i] + b4 * k4[i] + b5 * k5[i]
                             + b6 * k6[i]) for i in rng]

        # scaled error norm of the embedded 4th-order difference
        err = 0.0
        for i in rng:
            d = h * (e1 * k1[i] + e3 * k3[i] + e4 * k4[i] + e5 * k5[i]
                     + e6 * k6[i])
            yi = y[i]
            yn = y_new[i]
            if yi < 0.0:
                yi = -yi
            if yn < 0.0:
                yn = -yn
            sc = abs_tol + rel_tol * (yi if yi > yn else yn)
            if d < 0.0:
                d = -d
            q = d / sc
            if q > err:
                err = q
        if not isfinite(err):
            err = math.inf

        if err > 1.0:  # reject
            factor = 0.2 if err == math.inf else max(0.2, 0.9 * err ** -0.2)
            h *= factor
            if h < min_step:
                raise StepUnderflow(
                    f"step size underflow at t={t} (needed h={h!r})", traj)
            continue

        # accept
        if not _all_finite(y_new):
            raise NonFiniteState(f"state not finite after step to t={t + h}", traj)
        f_new = list(rhs(t + h, y_new))
        if not _all_finite(f_new):
            raise NonFiniteState(f"rhs not finite at t={t + h}", traj)

        t_new = t + h
        if keep_segments:
            segment = Segment(t, t_new, y, y_new, k1, f_new)
            traj.segments.append(segment)
        else:
            segment = None
        traj.times.append(t_new)
        traj.states.append(y_new)

        # event detection on this step
        stop = False
        if events:
            hits = []
            for j, ev in enumerate(events):
                g1 = ev.guard(t_new, y_new)
                if _triggered(ev.direction, guards[j], g1):
                    if segment is None:
                        segment = Segment(t, t_new, y, y_new, k1, f_new)
                    t_hit = refine_root(segment, ev.guard, (t, t_new))
                    hits.append((t_hit, j))
                guards[j] = g1
            if hits:
                hits.sort()
                for t_hit, j in hits:
                    state_hit = segment(t_hit)
                    traj.events.append(Event(t_hit, state_hit, j))
                    if events[j].terminal:
                        traj.times[-1] = t_hit
                        traj.states[-1] = state_hit
                        stop = True
                        break
        if stop:
            return traj

        t = t_new
        y = y_new
        f0 = f_new

        if err == 0.0:
            factor = 5.0
        else:
            factor = min(5.0, max(0.2, 0.9 * err ** -0.2))
        h = min(h * factor, max_step)
        if h < min_step:
            h = min_step

    return traj
