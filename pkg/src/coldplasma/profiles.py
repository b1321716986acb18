"""Background density profiles c(x) > 0 and their derivatives.

Built-in families carry closed-form first and second derivatives and a
closed-form antiderivative; custom profiles are compiled from expression
strings and differentiated symbolically (no antiderivative).  Profiles are
immutable, picklable, and safe to share across worker processes.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import expressions as ex

__all__ = [
    "Interval",
    "DopingProfile",
    "ConstantProfile",
    "LorentzBumpProfile",
    "CosineProfile",
    "InverseSquareProfile",
    "PowerLawProfile",
    "CustomProfile",
    "PositivityError",
    "PositivityViolation",
    "builtin",
    "compile_profile",
    "check_positive",
    "profile_from_spec",
]

REAL_LINE = None  # placeholder for readability in signatures


@dataclass(frozen=True)
class Interval:
    lo: float = -math.inf
    hi: float = math.inf
    open_lo: bool = False
    open_hi: bool = False

    def __post_init__(self):
        if not self.lo < self.hi:
            raise ValueError(f"empty interval [{self.lo}, {self.hi}]")

    def contains(self, x: float) -> bool:
        if self.open_lo:
            if not x > self.lo:
                return False
        elif not x >= self.lo:
            return False
        if self.open_hi:
            return x < self.hi
        return x <= self.hi


class PositivityError(ValueError):
    """c(x) <= 0 (or undefined) at a sampled point."""

    def __init__(self, x: float, value: float):
        super().__init__(f"profile is not positive at x={x!r}: c={value!r}")
        self.x = x
        self.value = value


@dataclass(frozen=True)
class PositivityViolation:
    x: float
    value: float


@dataclass(frozen=True)
class DopingProfile:
    """Base type: evaluators for c, c', c'' plus an optional antiderivative."""

    domain: Interval = field(default_factory=Interval, init=False)

    kind = "abstract"
    has_antiderivative = False

    def c(self, x: float) -> float:
        raise NotImplementedError

    def dc(self, x: float) -> float:
        raise NotImplementedError

    def ddc(self, x: float) -> float:
        raise NotImplementedError

    def antiderivative(self, x: float) -> float:
        raise ValueError(f"profile kind '{self.kind}' has no closed-form antiderivative")

    def is_kink(self, x: float) -> bool:
        return False

    def c_array(self, x: np.ndarray) -> np.ndarray:
        return np.array([self.c(float(v)) for v in np.asarray(x).ravel()]).reshape(np.shape(x))


@dataclass(frozen=True)
class ConstantProfile(DopingProfile):
    value: float

    kind = "constant"
    has_antiderivative = True

    def __post_init__(self):
        if not self.value > 0.0:
            raise ValueError(f"constant profile needs C > 0, got {self.value}")

    def c(self, x: float) -> float:
        return self.value

    def dc(self, x: float) -> float:
        return 0.0

    def ddc(self, x: float) -> float:
        return 0.0

    def antiderivative(self, x: float) -> float:
        return self.value * x

    def c_array(self, x: np.ndarray) -> np.ndarray:
        return np.full(np.shape(x), self.value, dtype=float)


@dataclass(frozen=True)
class LorentzBumpProfile(DopingProfile):
    """c(x) = 1 + A / (1 + x^2), |A| < 1."""

    amplitude: float

    kind = "lorentz_bump"
    has_antiderivative = True

    def __post_init__(self):
        if not abs(self.amplitude) < 1.0:
            raise ValueError(f"lorentz bump needs |A| < 1, got {self.amplitude}")

    def c(self, x: float) -> float:
        return 1.0 + self.amplitude / (1.0 + x * x)

    def dc(self, x: float) -> float:
        u = 1.0 + x * x
        return -2.0 * self.amplitude * x / (u * u)

    def ddc(self, x: float) -> float:
        u = 1.0 + x * x
        return self.amplitude * (6.0 * x * x - 2.0) / (u * u * u)

    def antiderivative(self, x: float) -> float:
        return x + self.amplitude * math.atan(x)

    def c_array(self, x: np.ndarray) -> np.ndarray:
        return 1.0 + self.amplitude / (1.0 + np.square(np.asarray(x, dtype=float)))


@dataclass(frozen=True)
class CosineProfile(DopingProfile):
    """c(x) = 1 + A cos(k x), |A| < 1."""

    amplitude: float
    wavenumber: float

    kind = "cosine"
    has_antiderivative = True

    def __post_init__(self):
        if not abs(self.amplitude) < 1.0:
            raise ValueError(f"cosine profile needs |A| < 1, got {self.amplitude}")
        if self.wavenumber == 0.0:
            raise ValueError("cosine profile needs k != 0")

    def c(self, x: float) -> float:
        return 1.0 + self.amplitude * math.cos(self.wavenumber * x)

    def dc(self, x: float) -> float:
        return -self.amplitude * self.wavenumber * math.sin(self.wavenumber * x)

    def ddc(self, x: float) -> float:
        k = self.wavenumber
        return -self.amplitude * k * k * math.cos(k * x)

    def antiderivative(self, x: float) -> float:
        return x + (self.amplitude / self.wavenumber) * math.sin(self.wavenumber * x)

    def c_array(self, x: np.ndarray) -> np.ndarray:
        return 1.0 + self.amplitude * np.cos(self.wavenumber * np.asarray(x, dtype=float))


@dataclass(frozen=True)
class InverseSquareProfile(DopingProfile):
    """c(x) = 1 / (K|x| + 1)^2, K > 0.  Kink at x = 0 (dc jumps)."""

    rate: float

    kind = "inverse_square"
    has_antiderivative = True

    def __post_init__(self):
        if not self.rate > 0.0:
            raise ValueError(f"inverse-square profile needs K > 0, got {self.rate}")

    def c(self, x: float) -> float:
        u = self.rate * abs(x) + 1.0
        return 1.0 / (u * u)

    def dc(self, x: float) -> float:
        if x == 0.0:
            return 0.0  # kink convention
        u = self.rate * abs(x) + 1.0
        return -2.0 * self.rate * math.copysign(1.0, x) / (u * u * u)

    def ddc(self, x: float) -> float:
        u = self.rate * abs(x) + 1.0
        return 6.0 * self.rate * self.rate / (u ** 4)

    def antiderivative(self, x: float) -> float:
        u = self.rate * abs(x) + 1.0
        return math.copysign(1.0, x) * (1.0 - 1.0 / u) / self.rate if x != 0.0 else 0.0

    def is_kink(self, x: float) -> bool:
        return x == 0.0

    def c_array(self, x: np.ndarray) -> np.ndarray:
        u = self.rate * np.abs(np.asarray(x, dtype=float)) + 1.0
        return 1.0 / np.square(u)


@dataclass(frozen=True)
class PowerLawProfile(DopingProfile):
    """c(x) = (C1 x + C2)^(-3/2) on the half-line where C1 x + C2 > 0."""

    slope: float
    offset: float

    kind = "power_law"
    has_antiderivative = True

    def __post_init__(self):
        if self.slope == 0.0:
            raise ValueError("power-law profile needs C1 != 0 (use constant instead)")
        if not self.offset > 0.0:
            raise ValueError(f"power-law profile needs C2 > 0, got {self.offset}")
        edge = -self.offset / self.slope
        if self.slope > 0.0:
            domain = Interval(edge, math.inf, open_lo=True)
        else:
            domain = Interval(-math.inf, edge, open_hi=True)
        object.__setattr__(self, "domain", domain)

    def _u(self, x: float) -> float:
        return self.slope * x + self.offset

    def c(self, x: float) -> float:
        u = self._u(x)
        return u ** -1.5 if u > 0.0 else math.nan

    def dc(self, x: float) -> float:
        u = self._u(x)
        return -1.5 * self.slope * u ** -2.5 if u > 0.0 else math.nan

    def ddc(self, x: float) -> float:
        u = self._u(x)
        return 3.75 * self.slope * self.slope * u ** -3.5 if u > 0.0 else math.nan

    def antiderivative(self, x: float) -> float:
        u = self._u(x)
        return -2.0 / (self.slope * math.sqrt(u)) if u > 0.0 else math.nan

    def c_array(self, x: np.ndarray) -> np.ndarray:
        u = self.slope * np.asarray(x, dtype=float) + self.offset
        with np.errstate(invalid="ignore"):
            return np.where(u > 0.0, np.power(np.abs(u), -1.5), np.nan)


@dataclass(frozen=True, init=False)
class CustomProfile(DopingProfile):
    """Profile compiled from an expression tree; derivatives are symbolic."""

    c_expr: ex.Expr
    dc_expr: ex.Expr
    ddc_expr: ex.Expr

    kind = "custom"
    has_antiderivative = False

    def __init__(self, c_expr: ex.Expr, domain: Interval | None = None):
        object.__setattr__(self, "c_expr", c_expr)
        object.__setattr__(self, "dc_expr", ex.differentiate(c_expr))
        object.__setattr__(self, "ddc_expr", ex.differentiate(self.dc_expr))
        object.__setattr__(self, "domain", domain if domain is not None else Interval())

    def c(self, x: float) -> float:
        return ex.compiled(self.c_expr)(x)

    def dc(self, x: float) -> float:
        if self.is_kink(x):
            return 0.0  # kink convention, matching |x| at the origin
        return ex.compiled(self.dc_expr)(x)

    def ddc(self, x: float) -> float:
        return ex.compiled(self.ddc_expr)(x)

    def is_kink(self, x: float) -> bool:
        return any(abs(ex.evaluate(arg, x)) < 1e-12 for arg in ex.abs_arguments(self.c_expr))

    def c_array(self, x: np.ndarray) -> np.ndarray:
        return ex.evaluate_array(self.c_expr, np.asarray(x, dtype=float))


_BUILTINS = {
    "constant": (ConstantProfile, 1),
    "lorentz_bump": (LorentzBumpProfile, 1),
    "cosine": (CosineProfile, 2),
    "inverse_square": (InverseSquareProfile, 1),
    "power_law": (PowerLawProfile, 2),
}


def builtin(kind: str, params: list[float]) -> DopingProfile:
    """Construct a built-in profile; raises ValueError on bad kind/params."""
    try:
        cls, arity = _BUILTINS[kind]
    except KeyError:
        raise ValueError(f"unknown builtin profile kind '{kind}'") from None
    if len(params) != arity:
        raise ValueError(f"profile '{kind}' takes {arity} parameter(s), got {len(params)}")
    return cls(*params)


def compile_profile(
    source: str | ex.Expr,
    domain: Interval | None = None,
    validate_positive: bool = False,
    n_samples: int = 201,
) -> CustomProfile:
    """Compile an expression (string or tree) into a custom profile.

    With validate_positive=True the profile is sampled over `domain`
    (which must then be finite) and a PositivityError is raised on the
    first non-positive sample.
    """
    tree = ex.parse_expression(source) if isinstance(source, str) else source
    profile = CustomProfile(tree, domain)
    if validate_positive:
        if domain is None or math.isinf(domain.lo) or math.isinf(domain.hi):
            raise ValueError("positivity validation needs a finite domain")
        violation = check_positive(profile, domain, n_samples)
        if violation is not None:
            raise PositivityError(violation.x, violation.value)
    return profile


def check_positive(
    profile: DopingProfile, interval: Interval, n_samples: int
) -> PositivityViolation | None:
    """Sample c on a uniform grid over `interval`; return the first violation."""
    if n_samples < 2:
        raise ValueError("need at least 2 sample points")
    lo, hi = interval.lo, interval.hi
    if math.isinf(lo) or math.isinf(hi):
        raise ValueError("positivity check needs a finite interval")
    for i in range(n_samples):
        x = lo + (hi - lo) * i / (n_samples - 1)
        value = profile.c(x)
        if not value > 0.0:  # catches c <= 0 and nan
            return PositivityViolation(x, value)
    return None


def profile_from_spec(spec: str) -> DopingProfile:
    """Build a profile from a CLI-style string.

    Accepted forms: constant:C | lorentz:A | cosine:A,K | invsq:K |
    powerlaw:C1,C2 | expr:<expression>.
    """
    name, sep, rest = spec.partition(":")
    if not sep:
        raise ValueError(f"bad profile spec '{spec}' (expected kind:params)")
    name = name.strip().lower()
    if name == "expr":
        return compile_profile(rest)
    aliases = {
        "constant": "constant",
        "lorentz": "lorentz_bump",
        "lorentz_bump": "lorentz_bump",
        "cosine": "cosine",
        "invsq": "inverse_square",
        "inverse_square": "inverse_square",
        "powerlaw": "power_law",
        "power_law": "power_law",
    }
    if name not in aliases:
        raise ValueError(f"unknown profile kind '{name}'")
    try:
        params = [float(p) for p in rest.split(",")] if rest else []
    except ValueError:
        raise ValueError(f"bad numeric parameters in profile spec '{spec}'") from None
    return builtin(aliases[name], params)
