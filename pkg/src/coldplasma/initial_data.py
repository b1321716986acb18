"""Cauchy data (V0(x), E0(x)) with exact first derivatives.

Derivatives are always closed-form or symbolic, never finite differences:
blow-up times are sensitive to E0' and the sensitivity-function initial
conditions must be exact.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from . import expressions as ex

__all__ = ["InitialData", "LaserPulse", "ExprData", "DataSample",
           "laser_pulse", "custom_data", "sample", "data_from_spec"]


@dataclass(frozen=True)
class InitialData:
    """Base type: evaluators V0, E0 and their derivatives dV0, dE0."""

    def V0(self, x: float) -> float:
        raise NotImplementedError

    def E0(self, x: float) -> float:
        raise NotImplementedError

    def dV0(self, x: float) -> float:
        raise NotImplementedError

    def dE0(self, x: float) -> float:
        raise NotImplementedError


@dataclass(frozen=True)
class LaserPulse(InitialData):
    """E0 = a x exp(-x^2/2), V0 = 0: the standard excitation pulse."""

    amplitude: float

    def V0(self, x: float) -> float:
        return 0.0

    def E0(self, x: float) -> float:
        return self.amplitude * x * math.exp(-0.5 * x * x)

    def dV0(self, x: float) -> float:
        return 0.0

    def dE0(self, x: float) -> float:
        return self.amplitude * (1.0 - x * x) * math.exp(-0.5 * x * x)


@dataclass(frozen=True, init=False)
class ExprData(InitialData):
    """Data from expression strings; derivatives by symbolic differentiation."""

    v_expr: ex.Expr
    e_expr: ex.Expr
    dv_expr: ex.Expr
    de_expr: ex.Expr

    def __init__(self, v_expr: ex.Expr, e_expr: ex.Expr):
        object.__setattr__(self, "v_expr", v_expr)
        object.__setattr__(self, "e_expr", e_expr)
        object.__setattr__(self, "dv_expr", ex.differentiate(v_expr))
        object.__setattr__(self, "de_expr", ex.differentiate(e_expr))

    def V0(self, x: float) -> float:
        return ex.compiled(self.v_expr)(x)

    def E0(self, x: float) -> float:
        return ex.compiled(self.e_expr)(x)

    def dV0(self, x: float) -> float:
        return ex.compiled(self.dv_expr)(x)

    def dE0(self, x: float) -> float:
        return ex.compiled(self.de_expr)(x)


@dataclass(frozen=True)
class DataSample:
    """All four data fields evaluated at one starting point."""

    x0: float
    V0: float
    E0: float
    dV0: float
    dE0: float


def laser_pulse(a: float) -> LaserPulse:
    return LaserPulse(a)


def custom_data(source_v: str, source_e: str) -> ExprData:
    """Build data from two expression strings; parse errors propagate."""
    return ExprData(ex.parse_expression(source_v), ex.parse_expression(source_e))


def sample(data: InitialData, x0: float) -> DataSample:
    return DataSample(x0, data.V0(x0), data.E0(x0), data.dV0(x0), data.dE0(x0))


def data_from_spec(spec: str) -> InitialData:
    """Build data from a CLI-style string: laser:A | expr:V=<e>;E=<e>."""
    name, sep, rest = spec.partition(":")
    if not sep:
        raise ValueError(f"bad data spec '{spec}' (expected kind:params)")
    name = name.strip().lower()
    if name == "laser":
        try:
            return LaserPulse(float(rest))
        except ValueError:
            raise ValueError(f"bad laser amplitude in '{spec}'") from None
    if name == "expr":
        parts = dict()
        for piece in rest.split(";"):
            key, eq, value = piece.partition("=")
            if not eq:
                raise ValueError(f"bad data spec piece '{piece}' (expected V=... or E=...)")
            parts[key.strip().upper()] = value
        if set(parts) != {"V", "E"}:
            raise ValueError(f"data spec must define both V and E, got {sorted(parts)}")
        return custom_data(parts["V"], parts["E"])
    raise ValueError(f"unknown data kind '{name}'")
