"""Invariant checks shared by the ``check`` subcommand and the test-suite."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .elliptic_fbp import FBPOptions, SectorGrid, solve_fbp
from .gas import FlowState, GasModel, MachClass, entropy_measure, mach_class
from .inversion import build_modes
from .jump import rh_jump_radial, rh_residuals
from .radial import (NozzleRadial, RadialSolution, background_solution, exit_pressure,
                     isentropic_radial_family, locate_shock, mu0, shock_pressure_slope_gap)
from .transport import run_transport

GAMMAS = (1.2, 1.4, 5.0 / 3.0)


@dataclass(frozen=True)
class Invariant:
    name: str
    passed: bool
    value: float
    threshold: float
    detail: str = ""

    def as_dict(self) -> dict:
        return {"name": self.name, "passed": self.passed, "value": self.value,
                "threshold": self.threshold, "detail": self.detail}


def random_supersonic_states(rng: np.random.Generator, count: int):
    """(γ, state) pairs with Mach number in [1.05, 5]."""
    out = []
    for _ in range(count):
        g = float(rng.choice(GAMMAS))
        rho = float(rng.uniform(0.2, 5.0))
        p = float(rng.uniform(0.2, 5.0))
        mach = float(rng.uniform(1.05, 5.0))
        out.append((g, FlowState(rho, mach * math.sqrt(g * p / rho), p)))
    return out


def rh_exactness(rng: np.random.Generator, count: int) -> Invariant:
    worst = 0.0
    ok = True
    for g, up in random_supersonic_states(rng, count):
        gas = GasModel.from_state(g, up)
        res = rh_jump_radial(gas, up)
        dn = res.downstream
        mass, mom, energy = rh_residuals(gas, up, dn, res.normal_speed_up, res.normal_speed_down)
        scale = (up.rho * up.u, up.rho * up.u**2 + up.p, gas.b0)
        worst = max(worst, abs(mass) / scale[0], abs(mom) / scale[1], abs(energy) / scale[2])
        ok &= mach_class(gas, dn) is MachClass.SUBSONIC
        ok &= entropy_measure(gas, dn) > entropy_measure(gas, up)
    return Invariant("rh_exactness", ok and worst <= 1e-12, worst, 1e-12,
                     f"{count} random states; downstream subsonic and entropy increase")


def exit_pressure_monotone(gas, noz, inflow, r_grid, h=None) -> Invariant:
    p = np.array([exit_pressure(gas, noz, inflow, r, h) for r in r_grid])
    gap = float(np.max(np.diff(p)))
    return Invariant("exit_pressure_decreasing", gap < 0.0, gap, 0.0,
                     "largest consecutive increment of p_exit over the r_s grid")


def locate_round_trip(gas, noz, inflow, rng: np.random.Generator, count: int, lo: float,
                      hi: float, h=None) -> Invariant:
    worst = 0.0
    for r_s in rng.uniform(lo, hi, count):
        found = locate_shock(gas, noz, inflow, exit_pressure(gas, noz, inflow, r_s, h), h=h)
        worst = max(worst, abs(found - r_s))
    return Invariant("locate_shock_round_trip", worst <= 1e-8, worst, 1e-8)


def branch_checks(sol: RadialSolution) -> list[Invariant]:
    noz = sol.noz
    sup, sub = sol.supersonic, sol.subsonic
    phys_sup = (sup.grid >= noz.r0) & (sup.grid <= sol.r_s)
    phys_sub = sub.grid >= sol.r_s
    sup_ok = bool(np.all(np.diff(sup.u[phys_sup]) > 0) and np.all(np.diff(sup.p[phys_sup]) < 0))
    sub_ok = bool(np.all(np.diff(sub.u[phys_sub]) < 0) and np.all(np.diff(sub.p[phys_sub]) > 0))
    drift = max(sup.bernoulli_drift(), sub.bernoulli_drift())
    return [
        Invariant("supersonic_branch_monotone", sup_ok, float(sup_ok), 1.0, "u increasing, p decreasing"),
        Invariant("subsonic_branch_monotone", sub_ok, float(sub_ok), 1.0, "u decreasing, p increasing"),
        Invariant("bernoulli_drift", drift <= 1e-9, drift, 1e-9, "relative, default step"),
    ]


def shock_checks(gas: GasModel, sol: RadialSolution) -> list[Invariant]:
    up, dn = sol.upstream_state, sol.downstream_state
    mass, mom, energy = rh_residuals(gas, up, dn, up.u, dn.u)
    worst = max(abs(mass) / (up.rho * up.u), abs(mom) / (up.rho * up.u**2 + up.p),
                abs(energy) / gas.b0)
    ds = entropy_measure(gas, dn) - entropy_measure(gas, up)
    return [
        Invariant("background_rh_residual", worst <= 1e-12, worst, 1e-12),
        Invariant("entropy_increase", ds > 0.0, ds, 0.0),
    ]


def mu0_fd(gas: GasModel, sol: RadialSolution, h: float = 1e-4) -> float:
    """Central difference of d/dr(K₀/u⁻ − u⁺) over (u⁻ − u⁺) at r_s."""
    g = lambda r: gas.k0 / sol.u_minus(r) - sol.u_plus(r)
    r = sol.r_s
    return float((g(r + h) - g(r - h)) / (2.0 * h) / (sol.u_minus(r) - sol.u_plus(r)))


def slope_gap_fd(gas: GasModel, sol: RadialSolution, h: float = 1e-4) -> float:
    d = lambda r: sol.shock_pressure(r) - sol.p_plus(r)
    return float((d(sol.r_s + h) - d(sol.r_s - h)) / (2.0 * h))


def closed_form_checks(gas: GasModel, sol: RadialSolution) -> list[Invariant]:
    m = mu0(gas, sol.noz, sol)
    m_err = abs(m - mu0_fd(gas, sol)) / abs(m)
    s = shock_pressure_slope_gap(gas, sol.noz, sol)
    s_err = abs(s - slope_gap_fd(gas, sol)) / abs(s)
    return [
        Invariant("mu0_positive", m > 0.0, m, 0.0),
        Invariant("mu0_closed_form", m_err <= 1e-6, m_err, 1e-6, "relative gap to finite differences"),
        Invariant("slope_gap_negative", s < 0.0, s, 0.0),
        Invariant("slope_gap_closed_form", s_err <= 1e-5, s_err, 1e-5, "relative gap to finite differences"),
    ]


def isentropic_checks(gas, noz, inflow, r_lo, r_hi, flux, count=7) -> list[Invariant]:
    rs = np.linspace(r_lo, r_hi, count)
    iso = np.array([isentropic_radial_family(gas, noz, flux, r) for r in rs])
    spread = float(np.max(np.ptp(iso, axis=0)))
    p = np.array([exit_pressure(gas, noz, inflow, r) for r in rs])
    var = float(np.ptp(p) / np.mean(p))
    return [
        Invariant("isentropic_exit_constant", spread <= 1e-12, spread, 1e-12),
        Invariant("nonisentropic_exit_varies", var > 0.01, var, 0.01, "relative range of p_exit"),
    ]


def zero_perturbation_checks(gas, sol, grid: SectorGrid, options: FBPOptions | None = None):
    fbp = solve_fbp(gas, sol, grid, options=options)
    tr = run_transport(gas, sol, fbp)
    p0 = sol.p_plus(grid.radii(fbp.front.f))
    psi = fbp.psi.sup()
    df = fbp.front.deviation(sol.r_s)
    dp = float(np.max(np.abs(tr.pressure.values - p0)))
    return [
        Invariant("zero_data_psi", psi <= 1e-10, psi, 1e-10),
        Invariant("zero_data_front", df <= 1e-10, df, 1e-10),
        Invariant("zero_data_pressure", dp <= 1e-9, dp, 1e-9),
    ]


def mode_floor_check(gas, sol, theta_full, count) -> Invariant:
    modes = build_modes(gas, sol, theta_full, count)
    low = float(np.min(np.abs(modes.d)))
    return Invariant("mode_multiplier_floor", low >= modes.kernel_floor, low, modes.kernel_floor)


def check_suite(gas: GasModel, noz: NozzleRadial, inflow: FlowState, sol: RadialSolution,
                grid: SectorGrid | None, seed: int, sweep=(1.2, 1.8, 50), modes: int = 32,
                isentropic_flux: float = 0.3, h=None) -> list[Invariant]:
    rng = np.random.default_rng(seed)
    lo, hi, count = sweep
    out = [rh_exactness(rng, 200)]
    out.append(exit_pressure_monotone(gas, noz, inflow, np.linspace(lo, hi, count), h))
    out.append(locate_round_trip(gas, noz, inflow, rng, 5, lo, hi, h))
    out += branch_checks(sol)
    out += shock_checks(gas, sol)
    out += closed_form_checks(gas, sol)
    out += isentropic_checks(gas, noz, inflow, lo, hi, isentropic_flux)
    if grid is not None:
        out += zero_perturbation_checks(gas, sol, grid)
        out.append(mode_floor_check(gas, sol, grid.theta_full, modes))
    return out
