"""Analytic and semi-analytic stability quantities.

Covers the constant-background smoothness criterion and its closed-form
sensitivity function, the amplitude-dependent period of characteristic
oscillations (measured vs. second-order asymptotics), the instability
measure ranking profile points by resonance strength, the isochronicity
defect of the oscillator center, and Floquet multipliers of the
linearized oscillation over one measured period.
"""

from __future__ import annotations

import cmath
import math
from dataclasses import dataclass

from .initial_data import DataSample, InitialData
from .integrator import EventSpec, OdeProblem, Tolerances, integrate
from .profiles import DopingProfile

__all__ = [
    "CriterionPoint",
    "PeriodEstimate",
    "MonodromyResult",
    "InstabilityScan",
    "EquilibriumNoPeriod",
    "NoReturn",
    "KinkPointError",
    "crit_margin",
    "constant_criterion",
    "constant_Q_closed_form",
    "constant_Q_minimum",
    "omega_capital_omega",
    "instability_measure",
    "isochronicity_defect",
    "measure_period",
    "monodromy",
]


class EquilibriumNoPeriod(ValueError):
    """eps = 0 selects the equilibrium itself; there is no orbit to time."""


class NoReturn(RuntimeError):
    """The orbit failed to return to the section within 10 linear periods."""


class KinkPointError(ValueError):
    """Derivative-based analytics are undefined at a profile kink."""


# ---------------------------------------------------------------------------
# constant-background criterion and closed form
# ---------------------------------------------------------------------------

def crit_margin(C: float, dV0: float, dE0: float) -> float:
    """(V0')^2 + 2 E0' - C: negative means the solution stays smooth."""
    return dV0 * dV0 + 2.0 * dE0 - C


@dataclass(frozen=True)
class CriterionPoint:
    x0: float
    margin: float
    safe: bool


def constant_criterion(C: float, data: InitialData, grid) -> list[CriterionPoint]:
    """Evaluate the smoothness margin pointwise for a constant background C."""
    if not C > 0.0:
        raise ValueError("background constant C must be positive")
    out = []
    for x0 in grid:
        m = crit_margin(C, data.dV0(x0), data.dE0(x0))
        out.append(CriterionPoint(x0, m, m < 0.0))
    return out


def constant_Q_closed_form(C: float, point: DataSample, t: float) -> float:
    """Exact sensitivity function for constant background C:

        Q(t) = (C - E0')/C + (E0'/C) cos(sqrt(C) t) + (V0'/sqrt(C)) sin(sqrt(C) t)
    """
    if not C > 0.0:
        raise ValueError("background constant C must be positive")
    w = math.sqrt(C)
    return ((C - point.dE0) / C + (point.dE0 / C) * math.cos(w * t)
            + (point.dV0 / w) * math.sin(w * t))


def constant_Q_minimum(C: float, dV0: float, dE0: float) -> float:
    """Infimum of the closed form over all t; positive iff crit_margin < 0."""
    return (C - dE0) / C - math.hypot(dE0 / C, dV0 / math.sqrt(C))


# ---------------------------------------------------------------------------
# period asymptotics
# ---------------------------------------------------------------------------

def omega_capital_omega(profile: DopingProfile, x0: float) -> tuple[float, float]:
    """Linear frequency sqrt(c(x0)) and the quadratic period coefficient

        (1/48) (5 c'(x0)^2 - 3 c(x0) c''(x0)) / c(x0)^3.
    """
    if profile.is_kink(x0):
        raise KinkPointError(f"x0={x0} is a kink point of the profile")
    c0 = profile.c(x0)
    if not c0 > 0.0:
        raise ValueError(f"profile not positive at x0={x0}")
    dc0 = profile.dc(x0)
    ddc0 = profile.ddc(x0)
    omega = math.sqrt(c0)
    capital = (5.0 * dc0 * dc0 - 3.0 * c0 * ddc0) / (48.0 * c0 ** 3)
    return omega, capital


@dataclass(frozen=True)
class InstabilityScan:
    xs: tuple
    values: tuple
    maxima: tuple  # (x, m) at interior local maxima, by 3-point comparison


def instability_measure(profile: DopingProfile, grid) -> InstabilityScan:
    """m(x) = |c'(x) (Omega/omega)^3| on the grid, plus its local maxima."""
    xs = [float(x) for x in grid]
    values = []
    for x in xs:
        omega, capital = omega_capital_omega(profile, x)
        values.append(abs(profile.dc(x) * (capital / omega) ** 3))
    maxima = tuple((xs[i], values[i]) for i in range(1, len(xs) - 1)
                   if values[i - 1] < values[i] and values[i] > values[i + 1])
    return InstabilityScan(tuple(xs), tuple(values), maxima)


# ---------------------------------------------------------------------------
# isochronicity defect
# ---------------------------------------------------------------------------

def _simpson(f, a: float, b: float) -> float:
    m = 0.5 * (a + b)
    return (b - a) / 6.0 * (f(a) + 4.0 * f(m) + f(b))


def _adaptive_simpson(f, a: float, b: float, tol: float, whole: float,
                      depth: int) -> float:
    m = 0.5 * (a + b)
    left = _simpson(f, a, m)
    right = _simpson(f, m, b)
    if depth <= 0 or abs(left + right - whole) <= 15.0 * tol:
        return left + right + (left + right - whole) / 15.0
    half = 0.5 * tol
    return (_adaptive_simpson(f, a, m, half, left, depth - 1)
            + _adaptive_simpson(f, m, b, half, right, depth - 1))


def adaptive_quadrature(f, a: float, b: float, tol: float = 1e-10) -> float:
    if a == b:
        return 0.0
    sign = 1.0
    if b < a:
        a, b = b, a
        sign = -1.0
    return sign * _adaptive_simpson(f, a, b, tol, _simpson(f, a, b), 48)


def isochronicity_defect(profile: DopingProfile, x0: float, y: float) -> float:
    """tau(y) = -y^3 (Cint(y) - c(x0) y) with Cint(y) the centered primitive
    of the profile, int_0^y c(x0+s) ds.  Identically zero iff the
    oscillator center is isochronous, which forces a constant profile.
    """
    if y == 0.0:
        return 0.0
    if profile.has_antiderivative:
        cint = profile.antiderivative(x0 + y) - profile.antiderivative(x0)
    else:
        cint = adaptive_quadrature(lambda s: profile.c(x0 + s), 0.0, y)
    return -(y ** 3) * (cint - profile.c(x0) * y)


# ---------------------------------------------------------------------------
# period measurement and monodromy
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class PeriodEstimate:
    x0: float
    eps: float
    T_measured: float
    T_asymptotic: float
    omega: float
    capital_omega: float


def _orbit_problem(profile: DopingProfile, x0: float, eps: float,
                   t_end: float) -> OdeProblem:
    c = profile.c

    def rhs(t, y):
        return (y[1], -y[2], c(y[0]) * y[1])

    return OdeProblem(3, rhs, 0.0, (x0, eps, 0.0), t_end)


def measure_period(profile: DopingProfile, x0: float, eps: float,
                   tol: Tolerances = Tolerances()) -> PeriodEstimate:
    """Time the orbit started at (x, V, E) = (x0, eps, 0) around the center.

    The period is the first return to the section {E = 0, V sgn(eps) > 0};
    E crosses the section transversally (E' = c V != 0 there), and the
    matching crossing direction selects the full period rather than the
    half-period pass with opposite velocity.
    """
    if eps == 0.0:
        raise EquilibriumNoPeriod("eps must be nonzero")
    omega, capital = omega_capital_omega(profile, x0)
    t_max = 10.0 * 2.0 * math.pi / omega
    direction = "increasing" if eps > 0.0 else "decreasing"
    event = EventSpec(lambda t, y: y[2], direction=direction, terminal=True)
    traj = integrate(_orbit_problem(profile, x0, eps, t_max), tol, events=[event],
                     keep_segments=False)
    if not traj.events:
        raise NoReturn(f"no return to the section within {t_max}")
    T = traj.events[0].t
    T_asym = (2.0 * math.pi / omega) * (1.0 + capital * eps * eps)
    return PeriodEstimate(x0, eps, T, T_asym, omega, capital)


@dataclass(frozen=True)
class MonodromyResult:
    x0: float
    eps: float
    period: float
    psi: tuple  # ((psi11, psi12), (psi21, psi22)) over one period
    multipliers: tuple  # two complex eigenvalues
    max_abs_multiplier: float

    @property
    def det(self) -> float:
        (a, b), (c, d) = self.psi
        return a * d - b * c

    @property
    def trace(self) -> float:
        return self.psi[0][0] + self.psi[1][1]


def monodromy(profile: DopingProfile, x0: float, eps: float,
              tol: Tolerances = Tolerances()) -> MonodromyResult:
    """Fundamental matrix of  u'' + c(x(t)) u = 0  over one measured period.

    The orbit and both fundamental solutions (u1, u2 with unit initial
    data) are integrated simultaneously; multipliers are the eigenvalues
    of the 2x2 matrix, computed from its trace and determinant.
    """
    estimate = measure_period(profile, x0, eps, tol)
    c = profile.c

    def rhs(t, y):
        cx = c(y[0])
        return (y[1], -y[2], cx * y[1], y[4], -cx * y[3], y[6], -cx * y[5])

    problem = OdeProblem(7, rhs, 0.0, (x0, eps, 0.0, 1.0, 0.0, 0.0, 1.0),
                         estimate.T_measured)
    traj = integrate(problem, tol, keep_segments=False)
    yf = traj.final_state
    psi = ((yf[3], yf[5]), (yf[4], yf[6]))
    tr = psi[0][0] + psi[1][1]
    det = psi[0][0] * psi[1][1] - psi[0][1] * psi[1][0]
    disc = cmath.sqrt(complex(tr * tr - 4.0 * det))
    lam1 = (tr + disc) / 2.0
    lam2 = (tr - disc) / 2.0
    return MonodromyResult(x0, eps, estimate.T_measured, psi, (lam1, lam2),
                           max(abs(lam1), abs(lam2)))
