"""Polytropic gas algebra: sound speed, Bernoulli invariant, density closures."""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass

from .errors import CavitationError

TOL_SONIC = 1e-9


@dataclass(frozen=True)
class GasModel:
    """Ideal polytropic gas with a fixed Bernoulli constant.

    Attributes:
        gamma: adiabatic exponent, must exceed 1.
        b0: Bernoulli constant (energy per unit mass), positive.
    """

    gamma: float
    b0: float

    def __post_init__(self) -> None:
        if not (math.isfinite(self.gamma) and self.gamma > 1.0):
            raise ValueError(f"gamma must be > 1, got {self.gamma!r}")
        if not (math.isfinite(self.b0) and self.b0 > 0.0):
            raise ValueError(f"b0 must be > 0, got {self.b0!r}")

    @property
    def k0(self) -> float:
        """Critical speed squared 2(γ-1)B₀/(γ+1)."""
        return 2.0 * (self.gamma - 1.0) * self.b0 / (self.gamma + 1.0)

    @property
    def exponent(self) -> float:
        """γ/(γ-1), the power linking pressure and enthalpy."""
        return self.gamma / (self.gamma - 1.0)

    @classmethod
    def from_state(cls, gamma: float, state: "FlowState") -> "GasModel":
        """Gas whose Bernoulli constant is that of ``state``."""
        return cls(gamma, 0.5 * state.u**2 + gamma * state.p / ((gamma - 1.0) * state.rho))


@dataclass(frozen=True)
class FlowState:
    rho: float
    u: float
    p: float

    def __post_init__(self) -> None:
        if not (self.rho > 0.0 and math.isfinite(self.rho)):
            raise ValueError(f"density must be positive and finite, got {self.rho!r}")
        if not (self.p > 0.0 and math.isfinite(self.p)):
            raise ValueError(f"pressure must be positive and finite, got {self.p!r}")
        if not math.isfinite(self.u):
            raise ValueError(f"speed must be finite, got {self.u!r}")


class MachClass(enum.Enum):
    SUPERSONIC = "supersonic"
    SONIC = "sonic"
    SUBSONIC = "subsonic"


def sound_speed(gas: GasModel, s: FlowState) -> float:
    return math.sqrt(gas.gamma * s.p / s.rho)


def bernoulli(gas: GasModel, s: FlowState) -> float:
    return 0.5 * s.u * s.u + gas.gamma * s.p / ((gas.gamma - 1.0) * s.rho)


def density_from_bernoulli(gas: GasModel, u: float, p: float) -> float:
    """Density closing the Bernoulli relation at speed ``u`` and pressure ``p``."""
    head = gas.b0 - 0.5 * u * u
    if not head > 0.0:
        raise CavitationError(f"speed {u!r} reaches the vacuum limit sqrt(2*b0)")
    return gas.gamma * p / ((gas.gamma - 1.0) * head)


def state_from_bernoulli(gas: GasModel, u: float, p: float) -> FlowState:
    return FlowState(density_from_bernoulli(gas, u, p), u, p)


def mach_class(gas: GasModel, s: FlowState, tol_sonic: float = TOL_SONIC) -> MachClass:
    c2 = gas.gamma * s.p / s.rho
    gap = s.u * s.u - c2
    if gap > tol_sonic * c2:
        return MachClass.SUPERSONIC
    if gap < -tol_sonic * c2:
        return MachClass.SUBSONIC
    return MachClass.SONIC


def isentropic_density(gas: GasModel, q2: float) -> float:
    """Normalised isentropic density (1 - (γ-1)q²/2)^(1/(γ-1))."""
    base = 1.0 - 0.5 * (gas.gamma - 1.0) * q2
    if not base > 0.0:
        raise CavitationError(f"q2={q2!r} is at or beyond the vacuum bound 2/(gamma-1)")
    return base ** (1.0 / (gas.gamma - 1.0))


def entropy_measure(gas: GasModel, s: FlowState) -> float:
    """p/ρ^γ, a monotone function of the specific entropy."""
    return s.p / s.rho**gas.gamma
