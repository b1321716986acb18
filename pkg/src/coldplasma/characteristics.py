"""Single-characteristic tracing with the flow-Jacobian sensitivity Q(t).

Along a characteristic x(t) the fields obey  x' = V, V' = -E, E' = c(x) V.
The spatial derivatives (v, e) = (V_x, E_x) satisfy a nonlinear system
that linearizes to a scalar function Q(t) with Q(0) = 1: Q plays the role
of the Jacobian of the characteristic flow, and its first zero t* marks
the gradient catastrophe (neighbouring characteristics collide).

Two equivalent linear formulations are provided: the reduced second-order
form  Q'' + c(x) Q = R  with the conserved constant R = c(x0) - E0'(x0)
(5 states, used by default), and the third-order form
Q''' + c(x) Q' + c'(x) V Q = 0  (6 states, kept as a cross-check; the
conservation law then becomes a free diagnostic).  A damped variant and a
direct nonlinear (v, e) integration serve as independent oracles.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum

from .initial_data import InitialData
from .integrator import (EventSpec, IntegrationError, OdeProblem, Tolerances,
                         Trajectory, integrate)
from .profiles import ConstantProfile, DopingProfile

__all__ = [
    "BlowupStatus",
    "AugmentedState",
    "BlowupRecord",
    "DampingConfig",
    "IntegrationFailure",
    "QVanished",
    "trace",
    "trace_third_order",
    "trace_damped",
    "riccati_oracle",
    "derivatives_along",
    "invariant_residuals",
    "reduced_problem",
    "third_order_problem",
    "damped_problem",
    "riccati_problem",
    "conserved_rhs_constant",
]

Q_FLOOR = 1e-12  # below this the Radon quotient v = Q'/Q is meaningless


class BlowupStatus(Enum):
    BLEW_UP = "blewup"
    SURVIVED = "survived"
    EQUILIBRIUM = "equilibrium"
    FAILED = "failed"


@dataclass(frozen=True)
class AugmentedState:
    """State layout of the reduced 5D system: (x, V, E, Q, P=Q')."""

    x: float
    V: float
    E: float
    Q: float
    P: float

    @staticmethod
    def initial(profile: DopingProfile, data: InitialData, x0: float) -> "AugmentedState":
        return AugmentedState(x0, data.V0(x0), data.E0(x0), 1.0, data.dV0(x0))

    def as_tuple(self) -> tuple:
        return (self.x, self.V, self.E, self.Q, self.P)


@dataclass(frozen=True)
class BlowupRecord:
    x0: float
    status: BlowupStatus
    t_star: float | None
    q_min: float
    horizon: float
    error: str | None = None


@dataclass(frozen=True)
class DampingConfig:
    """Friction coefficient q >= 0; q = 0 reduces exactly to the undamped system."""

    q: float = 0.0

    def __post_init__(self):
        if self.q < 0.0:
            raise ValueError(f"damping must be nonnegative, got {self.q}")


class IntegrationFailure(RuntimeError):
    """Integrator breakdown along a characteristic; carries the partial run."""

    def __init__(self, message: str, trajectory: Trajectory):
        super().__init__(message)
        self.trajectory = trajectory


class QVanished(ValueError):
    pass


def conserved_rhs_constant(profile: DopingProfile, data: InitialData, x0: float) -> float:
    """R = c(x0) - E0'(x0), the conserved right side of the reduced form."""
    return profile.c(x0) - data.dE0(x0)


# ---------------------------------------------------------------------------
# problem builders (exposed so tests can e.g. negate the vector field)
# ---------------------------------------------------------------------------

def reduced_problem(profile: DopingProfile, data: InitialData, x0: float,
                    horizon: float) -> OdeProblem:
    R = conserved_rhs_constant(profile, data, x0)
    if isinstance(profile, ConstantProfile):
        C = profile.value

        def rhs(t, y):
            return (y[1], -y[2], C * y[1], y[4], R - C * y[3])
    else:
        c = profile.c

        def rhs(t, y):
            cx = c(y[0])
            return (y[1], -y[2], cx * y[1], y[4], R - cx * y[3])

    y0 = AugmentedState.initial(profile, data, x0).as_tuple()
    return OdeProblem(5, rhs, 0.0, y0, horizon)


def third_order_problem(profile: DopingProfile, data: InitialData, x0: float,
                        horizon: float) -> OdeProblem:
    c, dc = profile.c, profile.dc

    def rhs(t, y):
        x, V, E, Q, P, S = y
        cx = c(x)
        return (V, -E, cx * V, P, S, -cx * P - dc(x) * V * Q)

    y0 = (x0, data.V0(x0), data.E0(x0), 1.0, data.dV0(x0), -data.dE0(x0))
    return OdeProblem(6, rhs, 0.0, y0, horizon)


def damped_problem(profile: DopingProfile, data: InitialData,
                   damping: DampingConfig, x0: float, horizon: float) -> OdeProblem:
    """Damped system; W = V' is carried instead of E (E = -W - qV)."""
    c, dc = profile.c, profile.dc
    q = damping.q

    def rhs(t, y):
        x, V, W, Q, P, S = y
        cx = c(x)
        return (V, W, -q * W - cx * V, P, S, -q * S - cx * P - dc(x) * V * Q)

    y0 = (x0, data.V0(x0), -data.E0(x0) - q * data.V0(x0),
          1.0, data.dV0(x0), -data.dE0(x0))
    return OdeProblem(6, rhs, 0.0, y0, horizon)


def riccati_problem(profile: DopingProfile, data: InitialData, x0: float,
                    horizon: float) -> OdeProblem:
    """Direct nonlinear system for (v, e) = (V_x, E_x): v' = -v^2 - e,
    e' = -v e + c(x) v + c'(x) V.  Diverges in finite time at blow-up."""
    c, dc = profile.c, profile.dc

    def rhs(t, y):
        x, V, E, v, e = y
        cx = c(x)
        return (V, -E, cx * V, -v * v - e, -v * e + cx * v + dc(x) * V)

    y0 = (x0, data.V0(x0), data.E0(x0), data.dV0(x0), data.dE0(x0))
    return OdeProblem(5, rhs, 0.0, y0, horizon)


# ---------------------------------------------------------------------------
# tracing
# ---------------------------------------------------------------------------

_Q_EVENT = EventSpec(lambda t, y: y[3], direction="decreasing", terminal=True)


def _check_x0(profile: DopingProfile, x0: float) -> None:
    if not profile.domain.contains(x0):
        raise ValueError(f"x0={x0} outside profile domain "
                         f"[{profile.domain.lo}, {profile.domain.hi}]")


def _run(problem: OdeProblem, tol: Tolerances, x0: float, horizon: float,
         keep_segments: bool) -> tuple[Trajectory, BlowupRecord]:
    try:
        traj = integrate(problem, tol, events=[_Q_EVENT], keep_segments=keep_segments)
    except IntegrationError as exc:
        raise IntegrationFailure(str(exc), exc.trajectory) from exc
    q_min = min(state[3] for state in traj.states)
    if traj.events:
        t_star = traj.events[0].t
        record = BlowupRecord(x0, BlowupStatus.BLEW_UP, t_star, q_min, horizon)
    else:
        record = BlowupRecord(x0, BlowupStatus.SURVIVED, None, q_min, horizon)
    return traj, record


def trace(profile: DopingProfile, data: InitialData, x0: float, horizon: float,
          tol: Tolerances = Tolerances(), keep_segments: bool = True
          ) -> tuple[Trajectory, BlowupRecord]:
    """Trace the reduced 5D system until Q hits zero or the horizon."""
    _check_x0(profile, x0)
    if not horizon > 0.0:
        raise ValueError("horizon must be positive")
    return _run(reduced_problem(profile, data, x0, horizon), tol, x0, horizon,
                keep_segments)


def trace_third_order(profile: DopingProfile, data: InitialData, x0: float,
                      horizon: float, tol: Tolerances = Tolerances(),
                      keep_segments: bool = True) -> tuple[Trajectory, BlowupRecord]:
    """Same contract as trace(), via the third-order formulation (6 states)."""
    _check_x0(profile, x0)
    if not horizon > 0.0:
        raise ValueError("horizon must be positive")
    return _run(third_order_problem(profile, data, x0, horizon), tol, x0, horizon,
                keep_segments)


def trace_damped(profile: DopingProfile, data: InitialData, damping: DampingConfig,
                 x0: float, horizon: float, tol: Tolerances = Tolerances(),
                 keep_segments: bool = True) -> tuple[Trajectory, BlowupRecord]:
    """Damped variant: states (x, V, V', Q, Q', Q''); E = -V' - qV."""
    _check_x0(profile, x0)
    if not horizon > 0.0:
        raise ValueError("horizon must be positive")
    return _run(damped_problem(profile, data, damping, x0, horizon), tol, x0,
                horizon, keep_segments)


def riccati_oracle(profile: DopingProfile, data: InitialData, x0: float,
                   horizon: float, cap: float = 1e8,
                   tol: Tolerances = Tolerances()) -> float | None:
    """First time |v| + |e| reaches `cap`, or None if bounded to the horizon.

    Independent blow-up oracle: the escape time approaches the Q-zero time
    from below as cap grows (v = Q'/Q diverges there).  Step underflow near
    the singularity counts as escape at the last valid time.
    """
    _check_x0(profile, x0)
    if not cap > 0.0:
        raise ValueError("cap must be positive")
    event = EventSpec(lambda t, y: cap - abs(y[3]) - abs(y[4]),
                      direction="decreasing", terminal=True)
    problem = riccati_problem(profile, data, x0, horizon)
    try:
        traj = integrate(problem, tol, events=[event], keep_segments=False)
    except IntegrationError as exc:
        partial = exc.trajectory
        return partial.t_final  # escape at last valid time
    if traj.events:
        return traj.events[0].t
    return None


# ---------------------------------------------------------------------------
# derived fields and conservation diagnostics
# ---------------------------------------------------------------------------

def derivatives_along(traj: Trajectory, profile: DopingProfile, data: InitialData,
                      x0: float) -> list[tuple[float, float, float]]:
    """(v, e, n) at every knot: v = Q'/Q, e = -Q''/Q, n = c(x) - e.

    Works on undamped trajectories (5 or 6 states).  Raises QVanished if
    any knot has |Q| < 1e-12, which happens on blown-up runs.
    """
    dim = len(traj.states[0])
    if dim not in (5, 6):
        raise ValueError("expected an undamped characteristic trajectory")
    R = conserved_rhs_constant(profile, data, x0)
    out = []
    for state in traj.states:
        x, Q, P = state[0], state[3], state[4]
        if abs(Q) < Q_FLOOR:
            raise QVanished(f"Q vanished at a knot (|Q|={abs(Q)!r})")
        qdd = state[5] if dim == 6 else R - profile.c(x) * Q
        v = P / Q
        e = -qdd / Q
        out.append((v, e, profile.c(x) - e))
    return out


def invariant_residuals(traj: Trajectory, profile: DopingProfile,
                        data: InitialData, x0: float) -> dict:
    """Maximum residuals of the two first integrals over trajectory knots.

    max_E_residual: |E(t) - (F(x(t)) - F(x0) + E0(x0))| with F the profile
    antiderivative; None when the profile has no closed-form F.
    max_Q2_residual: |Q'' + c(x) Q - R|; needs the third-order trajectory
    (6 states), None for the reduced form where the relation is imposed.
    """
    dim = len(traj.states[0])
    if dim not in (5, 6):
        raise ValueError("expected an undamped characteristic trajectory")
    R = conserved_rhs_constant(profile, data, x0)

    e_res = None
    if profile.has_antiderivative:
        f0 = profile.antiderivative(x0)
        e0 = data.E0(x0)
        e_res = max(abs(state[2] - (profile.antiderivative(state[0]) - f0 + e0))
                    for state in traj.states)

    q2_res = None
    if dim == 6:
        q2_res = max(abs(state[5] + profile.c(state[0]) * state[3] - R)
                     for state in traj.states)
    return {"max_E_residual": e_res, "max_Q2_residual": q2_res}
