"""Radial background flows: ODE branches, shock placement by exit pressure.

The supersonic branch starts from the inflow state at ``r0``; the subsonic
branch starts from the Rankine-Hugoniot image of the supersonic state at the
shock radius.  Both carry the velocity potential as a third component, so
φ₀^± are available at RK4 accuracy without a separate quadrature.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.interpolate import CubicHermiteSpline
from scipy.optimize import brentq
from scipy.integrate import quad

from .errors import (
    CavitationError,
    NoRootError,
    NotSupersonicError,
    PressureOutOfRangeError,
    SonicSingularityError,
)
from .gas import (
    TOL_SONIC,
    FlowState,
    GasModel,
    MachClass,
    density_from_bernoulli,
    entropy_measure,
    mach_class,
    state_from_bernoulli,
)

DEFAULT_STEPS = 2000


@dataclass(frozen=True)
class NozzleRadial:
    """Annular sector r0 < |x| < r1 in R^n with a branch extension margin.

    ``delta`` defaults to 0.05 (r1 - r0).
    """

    r0: float
    r1: float
    n: int = 2
    delta: float | None = None

    def __post_init__(self) -> None:
        if not (0.0 < self.r0 < self.r1):
            raise ValueError(f"need 0 < r0 < r1, got r0={self.r0!r}, r1={self.r1!r}")
        if int(self.n) != self.n or self.n < 2:
            raise ValueError(f"dimension n must be an integer >= 2, got {self.n!r}")
        if self.delta is None:
            object.__setattr__(self, "delta", 0.05 * (self.r1 - self.r0))
        if self.delta < 0.0 or self.r0 - 2.0 * self.delta <= 0.0:
            raise ValueError(f"margin delta={self.delta!r} must satisfy 0 <= delta < r0/2")

    @property
    def default_step(self) -> float:
        return (self.r1 - self.r0) / DEFAULT_STEPS


class BranchKind(enum.Enum):
    SUPERSONIC = "supersonic"
    SUBSONIC = "subsonic"


def rhs_ode(gas: GasModel, n: int, r: float, u: float, p: float,
            tol_sonic: float = TOL_SONIC) -> tuple[float, float]:
    """Right-hand sides (du/dr, dp/dr) of the radial potential-flow system."""
    k0 = gas.k0
    gap = u * u - k0
    if abs(gap) <= tol_sonic * k0:
        raise SonicSingularityError(f"sonic state u^2={u * u!r} ~ K0={k0!r} at r={r!r}")
    g = gas.gamma
    denom = (g + 1.0) * r * gap
    du = 2.0 * (n - 1) * (g - 1.0) * u * (gas.b0 - 0.5 * u * u) / denom
    dp = -2.0 * (n - 1) * g * u * u * p / denom
    return du, dp


def rhs_arrays(gas: GasModel, n: int, r, u, p):
    """Vectorised :func:`rhs_ode` without the sonic guard."""
    g = gas.gamma
    denom = (g + 1.0) * r * (u * u - gas.k0)
    du = 2.0 * (n - 1) * (g - 1.0) * u * (gas.b0 - 0.5 * u * u) / denom
    dp = -2.0 * (n - 1) * g * u * u * p / denom
    return du, dp


def _march(gas: GasModel, n: int, r_a: float, r_b: float, u: float, p: float,
           phi: float, h: float, store: bool):
    """Classic RK4 from r_a to r_b with the largest uniform step not above h."""
    length = r_b - r_a
    steps = max(1, math.ceil(abs(length) / h - 1e-9)) if length != 0.0 else 0
    dr = length / steps if steps else 0.0
    b0 = gas.b0
    if store:
        rs = [r_a]
        us = [u]
        ps = [p]
        phis = [phi]
    for i in range(steps):
        r = r_a + i * dr
        if 0.5 * u * u >= b0:
            raise CavitationError(f"branch reached the vacuum limit at r={r!r}")
        k1u, k1p = rhs_ode(gas, n, r, u, p)
        k1f = u
        uh = u + 0.5 * dr * k1u
        k2u, k2p = rhs_ode(gas, n, r + 0.5 * dr, uh, p + 0.5 * dr * k1p)
        k2f = uh
        uh = u + 0.5 * dr * k2u
        k3u, k3p = rhs_ode(gas, n, r + 0.5 * dr, uh, p + 0.5 * dr * k2p)
        k3f = uh
        ue = u + dr * k3u
        k4u, k4p = rhs_ode(gas, n, r + dr, ue, p + dr * k3p)
        k4f = ue
        u = u + dr * (k1u + 2.0 * k2u + 2.0 * k3u + k4u) / 6.0
        p = p + dr * (k1p + 2.0 * k2p + 2.0 * k3p + k4p) / 6.0
        phi = phi + dr * (k1f + 2.0 * k2f + 2.0 * k3f + k4f) / 6.0
        if not p > 0.0:
            raise CavitationError(f"pressure lost positivity at r={r + dr!r}")
        if store:
            rs.append(r_a + (i + 1) * dr if i + 1 < steps else r_b)
            us.append(u)
            ps.append(p)
            phis.append(phi)
    if store:
        return np.array(rs), np.array(us), np.array(ps), np.array(phis)
    return u, p, phi


@dataclass(frozen=True)
class RadialBranch:
    """One smooth ODE branch sampled on an increasing grid.

    Values between samples come from cubic Hermite interpolation using the
    exact ODE right-hand side as slope data.
    """

    gas: GasModel
    n: int
    grid: np.ndarray
    u: np.ndarray
    p: np.ndarray
    phi: np.ndarray
    kind: BranchKind
    rho: np.ndarray = field(init=False)
    _splines: tuple = field(init=False, repr=False, compare=False)

    def __post_init__(self) -> None:
        g = self.gas
        rho = g.gamma * self.p / ((g.gamma - 1.0) * (g.b0 - 0.5 * self.u**2))
        object.__setattr__(self, "rho", rho)
        if self.grid.size >= 2:
            du, dp = rhs_arrays(g, self.n, self.grid, self.u, self.p)
            splines = (
                CubicHermiteSpline(self.grid, self.u, du),
                CubicHermiteSpline(self.grid, self.p, dp),
                CubicHermiteSpline(self.grid, self.phi, self.u),
            )
        else:
            splines = ()
        object.__setattr__(self, "_splines", splines)

    @property
    def lo(self) -> float:
        return float(self.grid[0])

    @property
    def hi(self) -> float:
        return float(self.grid[-1])

    def _eval(self, which: int, r):
        if not self._splines:
            vals = (self.u, self.p, self.phi)[which]
            return np.full(np.shape(r), vals[0]) if np.ndim(r) else float(vals[0])
        out = self._splines[which](r)
        return out if np.ndim(r) else float(out)

    def speed(self, r):
        return self._eval(0, r)

    def pressure(self, r):
        return self._eval(1, r)

    def potential(self, r):
        return self._eval(2, r)

    def density(self, r):
        g = self.gas
        u = self.speed(r)
        return g.gamma * self.pressure(r) / ((g.gamma - 1.0) * (g.b0 - 0.5 * u * u))

    def dspeed(self, r):
        """du/dr from the ODE evaluated at the interpolated state."""
        return rhs_arrays(self.gas, self.n, r, self.speed(r), self.pressure(r))[0]

    def dpressure(self, r):
        return rhs_arrays(self.gas, self.n, r, self.speed(r), self.pressure(r))[1]

    def bernoulli_drift(self) -> float:
        """Largest relative Bernoulli defect over the samples."""
        g = self.gas
        b = 0.5 * self.u**2 + g.gamma * self.p / ((g.gamma - 1.0) * self.rho)
        return float(np.max(np.abs(b - g.b0)) / g.b0)

    def mass_flux_drift(self) -> float:
        """Largest relative variation of r^(n-1) ρ u over the samples."""
        m = self.grid ** (self.n - 1) * self.rho * self.u
        return float((m.max() - m.min()) / abs(m).max())

    def entropy_drift(self) -> float:
        e = self.p / self.rho**self.gas.gamma
        return float((e.max() - e.min()) / e.max())

    def is_monotone(self) -> bool:
        du = np.diff(self.u)
        dp = np.diff(self.p)
        drho = np.diff(self.rho)
        if self.kind is BranchKind.SUPERSONIC:
            return bool(np.all(du > 0) and np.all(dp < 0) and np.all(drho < 0))
        return bool(np.all(du < 0) and np.all(dp > 0) and np.all(drho > 0))


def _kind_of(gas: GasModel, u: float, p: float) -> BranchKind:
    cls = mach_class(gas, state_from_bernoulli(gas, u, p))
    if cls is MachClass.SONIC:
        raise SonicSingularityError(f"initial state u={u!r} lies in the sonic band")
    return BranchKind.SUPERSONIC if cls is MachClass.SUPERSONIC else BranchKind.SUBSONIC


def integrate_branch(gas: GasModel, noz: NozzleRadial, start_r: float, end_r: float,
                     u0: float, p0: float, h: float | None = None,
                     phi0: float = 0.0) -> RadialBranch:
    """Integrate one branch from ``start_r`` to ``end_r`` (either direction).

    The returned samples are ordered by increasing radius.  ``phi0`` is the
    potential at ``start_r``.
    """
    h = noz.default_step if h is None else h
    if not h > 0.0:
        raise ValueError("step must be positive")
    kind = _kind_of(gas, u0, p0)
    rs, us, ps, phis = _march(gas, noz.n, start_r, end_r, u0, p0, phi0, h, store=True)
    if end_r < start_r:
        rs, us, ps, phis = rs[::-1], us[::-1], ps[::-1], phis[::-1]
    branch = RadialBranch(gas, noz.n, rs, us, ps, phis, kind)
    if rs.size > 1 and not branch.is_monotone():
        raise SonicSingularityError("branch lost monotonicity; the sonic band was crossed")
    return branch


def _join(a: RadialBranch, b: RadialBranch) -> RadialBranch:
    """Concatenate branches sharing the end node a.hi == b.lo."""
    return RadialBranch(
        a.gas, a.n,
        np.concatenate([a.grid, b.grid[1:]]),
        np.concatenate([a.u, b.u[1:]]),
        np.concatenate([a.p, b.p[1:]]),
        np.concatenate([a.phi, b.phi[1:]]),
        a.kind,
    )


def prandtl_jump(gas: GasModel, u_minus: float, p_minus: float) -> tuple[float, float]:
    """Downstream (u, p) of a normal shock with Bernoulli constant ``gas.b0``."""
    rho = density_from_bernoulli(gas, u_minus, p_minus)
    k0 = gas.k0
    return k0 / u_minus, rho * u_minus * u_minus + p_minus - rho * k0


@dataclass(frozen=True)
class RadialSolution:
    """Background transonic flow with a shock at ``r_s``.

    ``supersonic`` covers [min(r0, r_s - 2δ), max(r1, r_s + 2δ)]; ``subsonic``
    covers [r_s - 2δ, r1].  The shock radius is a sample of both.
    """

    gas: GasModel
    noz: NozzleRadial
    inflow: FlowState
    r_s: float
    supersonic: RadialBranch
    subsonic: RadialBranch

    # upstream
    def u_minus(self, r):
        return self.supersonic.speed(r)

    def p_minus(self, r):
        return self.supersonic.pressure(r)

    def rho_minus(self, r):
        return self.supersonic.density(r)

    def phi_minus(self, r):
        return self.supersonic.potential(r)

    def du_minus(self, r):
        return self.supersonic.dspeed(r)

    # downstream
    def u_plus(self, r):
        return self.subsonic.speed(r)

    def p_plus(self, r):
        return self.subsonic.pressure(r)

    def rho_plus(self, r):
        return self.subsonic.density(r)

    def phi_plus(self, r):
        return self.subsonic.potential(r)

    def du_plus(self, r):
        return self.subsonic.dspeed(r)

    def shock_pressure(self, r):
        """ρ⁻u⁻² + p⁻ − ρ⁻K₀ along the supersonic branch."""
        u = self.u_minus(r)
        rho = self.rho_minus(r)
        return rho * u * u + self.p_minus(r) - rho * self.gas.k0

    @property
    def upstream_state(self) -> FlowState:
        return FlowState(float(self.rho_minus(self.r_s)), float(self.u_minus(self.r_s)),
                         float(self.p_minus(self.r_s)))

    @property
    def downstream_state(self) -> FlowState:
        return FlowState(float(self.rho_plus(self.r_s)), float(self.u_plus(self.r_s)),
                         float(self.p_plus(self.r_s)))

    @property
    def exit_pressure(self) -> float:
        return float(self.p_plus(self.noz.r1))

    @property
    def exit_flux(self) -> float:
        """v_c = (B₀ − ½u⁺(r1)²)^(1/(γ−1)) u⁺(r1), the exit normal flux."""
        g = self.gas
        u = float(self.u_plus(self.noz.r1))
        return (g.b0 - 0.5 * u * u) ** (1.0 / (g.gamma - 1.0)) * u

    @property
    def e0_plus(self) -> float:
        """Downstream transported quantity p/(B₀ − ½u²)^(γ/(γ−1)), a constant."""
        g = self.gas
        u = float(self.u_plus(self.r_s))
        return float(self.shock_pressure(self.r_s)) / (g.b0 - 0.5 * u * u) ** g.exponent


def _check_inflow(gas: GasModel, inflow: FlowState) -> None:
    if mach_class(gas, inflow) is not MachClass.SUPERSONIC:
        raise NotSupersonicError("inflow state must be supersonic", stage="radial")


def background_solution(gas: GasModel, noz: NozzleRadial, inflow: FlowState, r_s: float,
                        h: float | None = None) -> RadialSolution:
    """Radial transonic flow with the shock at ``r_s``."""
    if not (noz.r0 < r_s < noz.r1):
        raise ValueError(f"shock radius {r_s!r} outside ({noz.r0}, {noz.r1})")
    _check_inflow(gas, inflow)
    h = noz.default_step if h is None else h
    d2 = 2.0 * noz.delta
    sup = integrate_branch(gas, noz, noz.r0, r_s, inflow.u, inflow.p, h)
    tail_end = max(noz.r1, r_s + d2)
    if tail_end > r_s:
        tail = integrate_branch(gas, noz, r_s, tail_end, sup.u[-1], sup.p[-1], h, sup.phi[-1])
        sup = _join(sup, tail)
    head_start = min(noz.r0, r_s - d2)
    if head_start < noz.r0:
        head = integrate_branch(gas, noz, noz.r0, head_start, inflow.u, inflow.p, h)
        sup = _join(head, sup)
    i_s = int(np.searchsorted(sup.grid, r_s))
    u_m, p_m, phi_m = float(sup.u[i_s]), float(sup.p[i_s]), float(sup.phi[i_s])
    u_p, p_p = prandtl_jump(gas, u_m, p_m)
    sub = integrate_branch(gas, noz, r_s, noz.r1, u_p, p_p, h, phi_m)
    if d2 > 0.0:
        back = integrate_branch(gas, noz, r_s, r_s - d2, u_p, p_p, h, phi_m)
        sub = _join(back, sub)
    return RadialSolution(gas, noz, inflow, float(r_s), sup, sub)


def exit_pressure(gas: GasModel, noz: NozzleRadial, inflow: FlowState, r_s: float,
                  h: float | None = None) -> float:
    """p₀⁺(r1) for a shock at ``r_s``; same arithmetic as :func:`background_solution`."""
    if not (noz.r0 < r_s < noz.r1):
        raise ValueError(f"shock radius {r_s!r} outside ({noz.r0}, {noz.r1})")
    _check_inflow(gas, inflow)
    h = noz.default_step if h is None else h
    u, p, _ = _march(gas, noz.n, noz.r0, r_s, inflow.u, inflow.p, 0.0, h, store=False)
    u, p = prandtl_jump(gas, u, p)
    _, p, _ = _march(gas, noz.n, r_s, noz.r1, u, p, 0.0, h, store=False)
    return p


def pressure_range(gas: GasModel, noz: NozzleRadial, inflow: FlowState,
                   h: float | None = None) -> tuple[float, float]:
    """(p_min, p_max): exit pressures for shocks just inside r1 and r0."""
    off = 1e-6 * (noz.r1 - noz.r0)
    return (exit_pressure(gas, noz, inflow, noz.r1 - off, h),
            exit_pressure(gas, noz, inflow, noz.r0 + off, h))


def locate_shock(gas: GasModel, noz: NozzleRadial, inflow: FlowState, p_c: float,
                 tol_r: float = 1e-10, tol_p: float | None = None,
                 h: float | None = None) -> float:
    """Shock radius whose exit pressure is ``p_c``, by bisection."""
    p_min, p_max = pressure_range(gas, noz, inflow, h)
    if not (p_min < p_c < p_max):
        raise PressureOutOfRangeError(
            f"exit pressure {p_c!r} outside the admissible range ({p_min!r}, {p_max!r})")
    tol_p = 1e-9 * abs(p_c) if tol_p is None else tol_p
    off = 1e-6 * (noz.r1 - noz.r0)
    lo, hi = noz.r0 + off, noz.r1 - off
    mid = 0.5 * (lo + hi)
    while True:
        mid = 0.5 * (lo + hi)
        if not (lo < mid < hi):
            break
        pm = exit_pressure(gas, noz, inflow, mid, h)
        # exit pressure decreases with r_s
        if pm > p_c:
            lo = mid
        else:
            hi = mid
        if hi - lo <= tol_r and abs(pm - p_c) <= tol_p:
            break
    return 0.5 * (lo + hi)


def mu0(gas: GasModel, noz: NozzleRadial, sol: RadialSolution) -> float:
    """Zeroth-order coefficient of the linearised shock condition (positive)."""
    r_s = sol.r_s
    um = float(sol.u_minus(r_s))
    up = float(sol.u_plus(r_s))
    g = gas.gamma
    num = 2.0 * (noz.n - 1) * g * gas.k0 / ((g + 1.0) * r_s * um)
    return num / (um - up)


def shock_pressure_slope_gap(gas: GasModel, noz: NozzleRadial, sol: RadialSolution) -> float:
    """d/dr of (shock pressure along the supersonic branch − p₀⁺) at r_s (negative)."""
    r = sol.r_s
    u = float(sol.u_minus(r))
    p = float(sol.p_minus(r))
    g = gas.gamma
    num = (noz.n - 1) * g * p * (u * u + (g - 1.0) / (g + 1.0) * gas.k0)
    return -num / ((g - 1.0) * r * (gas.b0 - 0.5 * u * u))


def richardson_order(gas: GasModel, noz: NozzleRadial, inflow: FlowState,
                     h: float) -> float:
    """Observed convergence order of the supersonic march over [r0, r1]."""
    ends = [
        _march(gas, noz.n, noz.r0, noz.r1, inflow.u, inflow.p, 0.0, hh, store=False)[0]
        for hh in (h, h / 2.0, h / 4.0)
    ]
    return math.log2(abs(ends[0] - ends[1]) / abs(ends[1] - ends[2]))


# isentropic comparison model ---------------------------------------------

def _isentropic_flux(gamma: float, q):
    return (1.0 - 0.5 * (gamma - 1.0) * q * q) ** (1.0 / (gamma - 1.0)) * q


def isentropic_roots(gamma: float, n: int, r: float, flux_const: float) -> tuple[float, float]:
    """Subsonic and supersonic speeds q with r^(n-1) ρ(q²) q = flux_const."""
    q_star = math.sqrt(2.0 / (gamma + 1.0))
    q_vac = math.sqrt(2.0 / (gamma - 1.0))
    target = flux_const / r ** (n - 1)
    cap = _isentropic_flux(gamma, q_star)
    if target > cap:
        raise NoRootError(f"flux {flux_const!r} exceeds the choking capacity at r={r!r}")
    if target == 0.0:
        return 0.0, q_vac
    sub = brentq(lambda q: _isentropic_flux(gamma, q) - target, 0.0, q_star, xtol=1e-15, rtol=1e-15)
    sup = brentq(lambda q: _isentropic_flux(gamma, q) - target, q_star, q_vac, xtol=1e-15, rtol=1e-15)
    return sub, sup


def isentropic_radial_family(gas: GasModel, noz: NozzleRadial, flux_const: float,
                             r_s: float) -> tuple[float, float]:
    """Exit speed and pressure of the isentropic radial flow shocked at ``r_s``.

    The potential is the smaller of the subsonic potential and the shifted
    supersonic one, matched at ``r_s``; the returned data are those of the
    branch active at r1.  Pressure uses p = ρ^γ/γ.
    """
    g = gas.gamma
    if flux_const < 0.0:
        raise ValueError("flux_const must be non-negative")
    if not (noz.r0 < r_s < noz.r1):
        raise ValueError(f"shock radius {r_s!r} outside ({noz.r0}, {noz.r1})")
    isentropic_roots(g, noz.n, noz.r0, flux_const)  # choking is decided at the throat side
    sub_exit, sup_exit = isentropic_roots(g, noz.n, noz.r1, flux_const)
    if flux_const == 0.0:
        return 0.0, 1.0 / g
    w_sub = lambda r: isentropic_roots(g, noz.n, r, flux_const)[0]
    w_sup = lambda r: isentropic_roots(g, noz.n, r, flux_const)[1]
    # both potentials agree at r_s; compare them at r1
    phi_plus = quad(w_sub, r_s, noz.r1, epsabs=1e-13)[0]
    phi_minus = quad(w_sup, r_s, noz.r1, epsabs=1e-13)[0]
    q = sub_exit if phi_plus <= phi_minus else sup_exit
    rho = (1.0 - 0.5 * (g - 1.0) * q * q) ** (1.0 / (g - 1.0))
    return q, rho**g / g


def standard_case() -> tuple[GasModel, NozzleRadial, FlowState]:
    """γ=1.4, n=2, r ∈ (1, 2), inflow (ρ, u, p) = (1, 2, 1)."""
    inflow = FlowState(1.0, 2.0, 1.0)
    return GasModel.from_state(1.4, inflow), NozzleRadial(1.0, 2.0, 2), inflow


__all__ = [
    "BranchKind", "NozzleRadial", "RadialBranch", "RadialSolution", "background_solution",
    "entropy_measure", "exit_pressure", "integrate_branch", "isentropic_radial_family",
    "isentropic_roots", "locate_shock", "mu0", "prandtl_jump", "pressure_range",
    "rhs_arrays", "rhs_ode", "richardson_order", "shock_pressure_slope_gap", "standard_case",
]
