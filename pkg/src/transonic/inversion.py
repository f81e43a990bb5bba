"""Exit-pressure map 𝒫: v_ex ↦ p_ex, its background derivative and Newton inversion.

The derivative at the background is diagonal in the Neumann cosine basis of
the arc.  For a unit exit-flux mode j,

    d_j = 𝒬₀ a₁ + ℛ₀ a₂ q̂_j(r_s),

where 𝒬₀ = E₀⁺, ℛ₀ = U(r1)^(γ/(γ−1)) with U = B₀ − ½(u⁺)², and q̂_j solves
(k₁q')' = λ_j k₂ q on [r_s, r1] with q'(r_s) = μ₀ q(r_s) and
k₁q'(r1) = r1^(n−1).  The exit row of the discrete problem imposes the
physical flux a_rr ∂_rψ = w, hence the r1^(n−1) weight on the mode flux.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.integrate import solve_ivp

from .elliptic_fbp import (FBPOptions, FBPResult, FreeBoundaryProblem, SectorGrid, ShockFront,
                           Field2D, k1_k2)
from .errors import ModeSolveError, NearSingularError, NoConvergenceError
from .gas import GasModel
from .perturbation import PerturbationData
from .radial import RadialSolution, mu0, shock_pressure_slope_gap
from .transport import TransportResult, run_transport

log = logging.getLogger(__name__)


# --------------------------------------------------------------------------
# profiles on the arc


def cosine_basis(ntheta: int, theta_full: float) -> np.ndarray:
    """Columns b_j(θ_k), j < ntheta, orthonormal under trapezoid weights."""
    k = np.arange(ntheta)
    j = np.arange(ntheta)
    b = np.cos(np.pi * np.outer(k, j) / (ntheta - 1))
    scale = np.full(ntheta, math.sqrt(2.0 / theta_full))
    scale[0] = scale[-1] = math.sqrt(1.0 / theta_full)
    return b * scale[None, :]


def trapezoid_weights(ntheta: int, theta_full: float) -> np.ndarray:
    h = theta_full / (ntheta - 1)
    w = np.full(ntheta, h)
    w[0] = w[-1] = 0.5 * h
    return w


@dataclass(frozen=True)
class ExitProfile:
    """Samples of a function on the arc's θ nodes."""

    theta_full: float
    values: np.ndarray

    def __post_init__(self) -> None:
        v = np.asarray(self.values, float)
        if v.ndim != 1 or v.size < 2 or not np.all(np.isfinite(v)):
            raise ValueError("profile needs at least two finite samples")
        object.__setattr__(self, "values", v)

    @property
    def ntheta(self) -> int:
        return self.values.size

    @property
    def theta(self) -> np.ndarray:
        return np.linspace(-0.5 * self.theta_full, 0.5 * self.theta_full, self.ntheta)

    def coefficients(self) -> np.ndarray:
        b = cosine_basis(self.ntheta, self.theta_full)
        return b.T @ (trapezoid_weights(self.ntheta, self.theta_full) * self.values)

    def tail(self, cutoff: int) -> float:
        """Largest |c_j| with j ≥ cutoff."""
        c = self.coefficients()
        return float(np.max(np.abs(c[cutoff:]))) if cutoff < c.size else 0.0

    @classmethod
    def from_coefficients(cls, theta_full: float, ntheta: int, coeffs) -> "ExitProfile":
        c = np.zeros(ntheta)
        coeffs = np.asarray(coeffs, float)
        c[:coeffs.size] = coeffs[:ntheta]
        return cls(theta_full, cosine_basis(ntheta, theta_full) @ c)

    @classmethod
    def constant(cls, theta_full: float, ntheta: int, value: float) -> "ExitProfile":
        return cls(theta_full, np.full(ntheta, float(value)))

    def __add__(self, other: "ExitProfile") -> "ExitProfile":
        return ExitProfile(self.theta_full, self.values + other.values)

    def __sub__(self, other: "ExitProfile") -> "ExitProfile":
        return ExitProfile(self.theta_full, self.values - other.values)

    def scaled(self, a: float) -> "ExitProfile":
        return ExitProfile(self.theta_full, a * self.values)

    def sup(self) -> float:
        return float(np.max(np.abs(self.values)))


# --------------------------------------------------------------------------
# background constants and modes


def _head(gas: GasModel, u):
    return gas.b0 - 0.5 * u * u


def a1_a2(gas: GasModel, sol: RadialSolution) -> tuple[float, float]:
    """Exit sensitivity a₁ = d(U^(γ/(γ−1)))/dv at r1 and shock sensitivity a₂ at r_s.

    Here v = U^(1/(γ−1)) u is the exit flux, so a₁ is the pressure-factor
    response to the flux; a₂ is the response of E behind the shock to the
    downstream potential perturbation at the shock.
    """
    g = gas.gamma
    u1 = float(sol.u_plus(sol.noz.r1))
    a1 = -2.0 * g * _head(gas, u1) * u1 / ((g + 1.0) * (gas.k0 - u1 * u1))
    r_s = sol.r_s
    up = float(sol.u_plus(r_s))
    um = float(sol.u_minus(r_s))
    head = _head(gas, up)
    pp = float(sol.p_plus(r_s))
    gap = shock_pressure_slope_gap(gas, sol.noz, sol)
    m0 = mu0(gas, sol.noz, sol)
    a2 = (gap / (um - up) + g * pp * m0 * up / ((g - 1.0) * head)) / head**gas.exponent
    return a1, a2


def a2_simplified(gas: GasModel, sol: RadialSolution) -> float:
    """Closed form of a₂ after cancellation, for cross-checking."""
    r_s = sol.r_s
    n = sol.noz.n
    up = float(sol.u_plus(r_s))
    um = float(sol.u_minus(r_s))
    rho = float(sol.rho_minus(r_s))
    head = _head(gas, up)
    return (n - 1) * rho * (gas.k0 - um * um) / (r_s * head**gas.exponent * (um - up))


@dataclass(frozen=True)
class ModeSolution:
    lam: float
    r: np.ndarray
    q: np.ndarray
    flux: np.ndarray   # k₁ q'

    @property
    def at_shock(self) -> float:
        return float(self.q[0])


def solve_mode(gas: GasModel, sol: RadialSolution, lam: float, exit_flux: float,
               rtol: float = 1e-12, samples: int = 201) -> ModeSolution:
    """Two-point problem (k₁q')' = λk₂q, q'(r_s) = μ₀q(r_s), k₁q'(r1) = exit_flux.

    Shoots from r_s with q = 1 and rescales, which is exact for a linear
    problem as long as the shot flux at r1 is nonzero.
    """
    if lam < 0.0:
        raise ModeSolveError(f"eigenvalue {lam!r} is negative", stage="inversion")
    r_s, r1 = sol.r_s, sol.noz.r1
    m0 = mu0(gas, sol.noz, sol)

    def rhs(r, y):
        k1, k2 = k1_k2(gas, sol, r)
        return [y[1] / k1, lam * k2 * y[0]]

    k1s, _ = k1_k2(gas, sol, r_s)
    grid = np.linspace(r_s, r1, samples)
    out = solve_ivp(rhs, (r_s, r1), [1.0, float(k1s) * m0], method="DOP853", t_eval=grid,
                    rtol=rtol, atol=1e-300)
    if not out.success or not np.all(np.isfinite(out.y)):
        raise ModeSolveError(f"mode integration failed: {out.message}", stage="inversion")
    shot = out.y[1, -1]
    if not shot > 0.0:
        raise ModeSolveError("shot exit flux is not positive", stage="inversion")
    scale = exit_flux / shot
    return ModeSolution(float(lam), grid, scale * out.y[0], scale * out.y[1])


@dataclass(frozen=True)
class ModeSystem:
    theta_full: float
    lambdas: np.ndarray
    q_shock: np.ndarray
    d: np.ndarray
    a1: float
    a2: float
    q0: float
    r0: float
    mu0: float
    kernel_floor: float

    @property
    def tail_limit(self) -> float:
        return self.q0 * self.a1

    @property
    def count(self) -> int:
        return self.d.size

    def multipliers(self, ntheta: int) -> np.ndarray:
        """d_j for j < ntheta; modes past the cutoff reuse the last multiplier."""
        if ntheta <= self.count:
            return self.d[:ntheta]
        return np.concatenate([self.d, np.full(ntheta - self.count, self.d[-1])])


def build_modes(gas: GasModel, sol: RadialSolution, theta_full: float, count: int = 32,
                floor_factor: float = 1e-8) -> ModeSystem:
    a1, a2 = a1_a2(gas, sol)
    q0 = sol.e0_plus
    r0 = _head(gas, float(sol.u_plus(sol.noz.r1))) ** gas.exponent
    weight = sol.noz.r1 ** (sol.noz.n - 1)
    lams = (np.arange(count) * np.pi / theta_full) ** 2
    qs = np.array([solve_mode(gas, sol, lam, weight).at_shock for lam in lams])
    d = q0 * a1 + r0 * a2 * qs
    floor = floor_factor * abs(q0 * a1)
    return ModeSystem(theta_full, lams, qs, d, a1, a2, q0, r0, mu0(gas, sol.noz, sol), floor)


def _check_floor(modes: ModeSystem, d: np.ndarray) -> None:
    small = np.abs(d) < modes.kernel_floor
    if np.any(small):
        j = int(np.argmax(small))
        raise NearSingularError(f"mode multiplier d_{j} = {d[j]:.3e} below the kernel floor",
                                stage="inversion")


def dvp_apply(modes: ModeSystem, w: ExitProfile) -> ExitProfile:
    d = modes.multipliers(w.ntheta)
    return ExitProfile.from_coefficients(w.theta_full, w.ntheta, d * w.coefficients())


def dvp_invert(modes: ModeSystem, rhs: ExitProfile) -> ExitProfile:
    d = modes.multipliers(rhs.ntheta)
    _check_floor(modes, d)
    return ExitProfile.from_coefficients(rhs.theta_full, rhs.ntheta, rhs.coefficients() / d)


def dvp_apply_2d(gas: GasModel, sol: RadialSolution, grid: SectorGrid, modes: ModeSystem,
                 w: ExitProfile) -> ExitProfile:
    """Background derivative through one linear solve of the discrete problem."""
    data = PerturbationData().with_exit(sol.exit_flux + w.values)
    prob = FreeBoundaryProblem(gas, sol, grid, data)
    front = ShockFront.flat(grid)
    zero = Field2D(grid, np.zeros((grid.nr, grid.ntheta)), "psi", front)
    psi = prob.solve_linear(prob.assemble(front, zero))
    return ExitProfile(w.theta_full, modes.q0 * modes.a1 * w.values
                       + modes.r0 * modes.a2 * psi.values[0])


# --------------------------------------------------------------------------
# forward map and Newton inversion


@dataclass
class SolutionBundle:
    v_ex: ExitProfile
    p_ex: ExitProfile
    fbp: FBPResult
    transport: TransportResult


def forward_P(gas: GasModel, sol: RadialSolution, grid: SectorGrid, data: PerturbationData,
              v_ex: ExitProfile | None = None, options: FBPOptions | None = None) -> SolutionBundle:
    """Exit pressure for exit flux ``v_ex`` (background flux when omitted)."""
    if v_ex is None:
        v_ex = ExitProfile.constant(grid.theta_full, grid.ntheta, sol.exit_flux)
    run = data.with_exit(v_ex.values)
    fbp = FreeBoundaryProblem(gas, sol, grid, run, options).solve()
    tr = run_transport(gas, sol, fbp, run)
    return SolutionBundle(v_ex, ExitProfile(grid.theta_full, tr.exit_pressure), fbp, tr)


@dataclass
class InversionResult:
    bundle: SolutionBundle
    iterations: int
    residuals: list = field(default_factory=list)

    @property
    def v_ex(self) -> ExitProfile:
        return self.bundle.v_ex

    @property
    def front(self) -> ShockFront:
        return self.bundle.fbp.front


def invert_P(gas: GasModel, sol: RadialSolution, grid: SectorGrid, data: PerturbationData,
             target: ExitProfile, modes: ModeSystem, v0: ExitProfile | None = None,
             tol_newton: float = 1e-9, max_newton: int = 12,
             options: FBPOptions | None = None) -> InversionResult:
    """Frozen-derivative Newton on 𝒫(v) = target, tolerance relative to p_c."""
    if target.ntheta != grid.ntheta:
        raise ValueError("target profile does not match the grid")
    if target.tail(modes.count) > tol_newton * sol.exit_pressure:
        log.warning("target has spectral content beyond mode %d", modes.count)
    v = v0 if v0 is not None else ExitProfile.constant(grid.theta_full, grid.ntheta, sol.exit_flux)
    scale = sol.exit_pressure
    history = []
    for k in range(max_newton + 1):
        bundle = forward_P(gas, sol, grid, data, v, options)
        res = bundle.p_ex - target
        size = res.sup() / scale
        history.append(size)
        log.debug("newton %d: residual %.3e", k, size)
        if size <= tol_newton:
            return InversionResult(bundle, k, history)
        if k > 0 and size >= history[-2]:
            raise NoConvergenceError(
                f"Newton residual stopped decreasing at iteration {k}: {size:.3e}", stage="inversion")
        v = v - dvp_invert(modes, res)
    raise NoConvergenceError(f"Newton did not reach {tol_newton:.1e} in {max_newton} steps",
                             stage="inversion")
