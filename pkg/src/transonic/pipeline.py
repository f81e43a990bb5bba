"""Run orchestration: dispatch a validated config to the solver stages."""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .config import RunConfig
from .elliptic_fbp import FBPOptions, Field2D, SectorGrid
from .errors import ValidationError
from .inversion import ExitProfile, build_modes, invert_P
from .invariants import (Invariant, branch_checks, check_suite, closed_form_checks,
                         shock_checks)
from .output import SCHEMA, ensure_dir, write_csv, write_json
from .perturbation import (DeformationFamily, PerturbationData, UpstreamFamily, cosine_mode,
                           upstream_density)
from .radial import (NozzleRadial, RadialSolution, background_solution, exit_pressure,
                     isentropic_radial_family, locate_shock, mu0, pressure_range,
                     shock_pressure_slope_gap)

log = logging.getLogger(__name__)

RESIDUAL_LIMIT = 1e-8


@dataclass
class RunReport:
    mode: str
    config: dict
    results: dict = field(default_factory=dict)
    invariants: list[Invariant] = field(default_factory=list)
    tables: dict = field(default_factory=dict)
    fields: dict = field(default_factory=dict)

    @property
    def failed(self) -> list[Invariant]:
        return [i for i in self.invariants if not i.passed]

    @property
    def ok(self) -> bool:
        return not self.failed

    def as_dict(self) -> dict:
        return {
            "schema": SCHEMA,
            "mode": self.mode,
            "status": "pass" if self.ok else "fail",
            "config": self.config,
            "results": self.results,
            "invariants": [i.as_dict() for i in self.invariants],
        }


def _nozzle(cfg: RunConfig) -> NozzleRadial:
    nz = cfg.nozzle
    return NozzleRadial(nz.r0, nz.r1, nz.n, nz.delta)


def _shock_radius(cfg: RunConfig, gas, noz, inflow) -> float:
    if cfg.background.p_c is not None:
        return locate_shock(gas, noz, inflow, cfg.background.p_c, h=cfg.numerics.step)
    if cfg.background.r_s is None:
        raise ValidationError("background", "give r_s or p_c")
    return cfg.background.r_s


def _branch_rows(sol: RadialSolution):
    rows = []
    for name, br in (("supersonic", sol.supersonic), ("subsonic", sol.subsonic)):
        rho = br.density(br.grid)
        for k in range(br.grid.size):
            rows.append((name, br.grid[k], br.u[k], br.p[k], rho[k], br.phi[k]))
    return rows


def _background_results(gas, sol: RadialSolution) -> dict:
    return {
        "r_s": sol.r_s,
        "b0": gas.b0,
        "k0": gas.k0,
        "exit_pressure": sol.exit_pressure,
        "exit_flux": sol.exit_flux,
        "e0_plus": sol.e0_plus,
        "mu0": mu0(gas, sol.noz, sol),
        "slope_gap": shock_pressure_slope_gap(gas, sol.noz, sol),
        "upstream": [sol.upstream_state.rho, sol.upstream_state.u, sol.upstream_state.p],
        "downstream": [sol.downstream_state.rho, sol.downstream_state.u, sol.downstream_state.p],
    }


def _perturbation(cfg: RunConfig) -> PerturbationData:
    pt, nz = cfg.perturbation, cfg.nozzle
    return PerturbationData(
        DeformationFamily(pt.deformation, pt.deformation_amplitude, pt.deformation_mode,
                          nz.r0, nz.r1, nz.theta),
        UpstreamFamily(pt.upstream, pt.upstream_amplitude, pt.upstream_mode,
                       nz.r0, nz.r1, nz.theta),
    )


def exit_target(cfg: RunConfig, sol: RadialSolution, grid: SectorGrid) -> ExitProfile:
    ex = cfg.exit
    p_c = ex.p_c if ex.p_c is not None else sol.exit_pressure
    if ex.kind == "samples":
        return ExitProfile(grid.theta_full, np.array(ex.samples))
    if ex.kind == "cosine":
        shape = cosine_mode(ex.mode, grid.theta, grid.theta_full)
        return ExitProfile(grid.theta_full, p_c * (1.0 + ex.amplitude * shape))
    return ExitProfile.constant(grid.theta_full, grid.ntheta, p_c)


def run_background(cfg: RunConfig) -> RunReport:
    gas, noz, inflow = cfg.gas_model, _nozzle(cfg), cfg.inflow_state
    sol = background_solution(gas, noz, inflow, _shock_radius(cfg, gas, noz, inflow),
                              cfg.numerics.step)
    rep = RunReport(cfg.mode, cfg.to_dict(), _background_results(gas, sol))
    rep.invariants += branch_checks(sol) + shock_checks(gas, sol) + closed_form_checks(gas, sol)
    rep.tables["branches"] = (("branch", "r", "u", "p", "rho", "phi"), _branch_rows(sol))
    return rep


def run_locate(cfg: RunConfig) -> RunReport:
    gas, noz, inflow = cfg.gas_model, _nozzle(cfg), cfg.inflow_state
    p_c = cfg.exit.p_c if cfg.exit.p_c is not None else cfg.background.p_c
    if p_c is None:
        raise ValidationError("exit.p_c", "locate-shock needs a target exit pressure")
    h = cfg.numerics.step
    r_s = locate_shock(gas, noz, inflow, p_c, h=h)
    p_min, p_max = pressure_range(gas, noz, inflow, h)
    back = exit_pressure(gas, noz, inflow, r_s, h)
    sol = background_solution(gas, noz, inflow, r_s, h)
    rep = RunReport(cfg.mode, cfg.to_dict(), _background_results(gas, sol))
    rep.results.update({"p_target": p_c, "p_min": p_min, "p_max": p_max})
    err = abs(back - p_c) / p_c
    rep.invariants.append(Invariant("locate_round_trip", err <= 1e-8, err, 1e-8))
    rep.invariants += branch_checks(sol) + shock_checks(gas, sol)
    rep.tables["branches"] = (("branch", "r", "u", "p", "rho", "phi"), _branch_rows(sol))
    return rep


def run_sweep(cfg: RunConfig) -> RunReport:
    gas, noz, inflow = cfg.gas_model, _nozzle(cfg), cfg.inflow_state
    sw, h = cfg.sweep, cfg.numerics.step
    rows = []
    for r_s in np.linspace(sw.r_s_min, sw.r_s_max, sw.count):
        sol = background_solution(gas, noz, inflow, float(r_s), h)
        rows.append((r_s, sol.exit_pressure, mu0(gas, noz, sol),
                     shock_pressure_slope_gap(gas, noz, sol)))
    arr = np.array(rows)
    rep = RunReport(cfg.mode, cfg.to_dict(), {"p_exit_range": [arr[:, 1].min(), arr[:, 1].max()]})
    inc = float(np.max(np.diff(arr[:, 1])))
    rep.invariants += [
        Invariant("exit_pressure_decreasing", inc < 0.0, inc, 0.0),
        Invariant("mu0_positive", bool(np.all(arr[:, 2] > 0)), float(arr[:, 2].min()), 0.0),
        Invariant("slope_gap_negative", bool(np.all(arr[:, 3] < 0)), float(arr[:, 3].max()), 0.0),
    ]
    rep.tables["sweep"] = (("r_s", "p_exit", "mu0", "slope_gap"), rows)
    return rep


def run_demo_isentropic(cfg: RunConfig) -> RunReport:
    gas, noz, inflow = cfg.gas_model, _nozzle(cfg), cfg.inflow_state
    sw = cfg.sweep
    rows = []
    for r_s in np.linspace(sw.r_s_min, sw.r_s_max, sw.count):
        q, p_iso = isentropic_radial_family(gas, noz, sw.isentropic_flux, float(r_s))
        rows.append((r_s, q, p_iso, exit_pressure(gas, noz, inflow, float(r_s), cfg.numerics.step)))
    arr = np.array(rows)
    spread = float(max(np.ptp(arr[:, 1]), np.ptp(arr[:, 2])))
    var = float(np.ptp(arr[:, 3]) / np.mean(arr[:, 3]))
    rep = RunReport(cfg.mode, cfg.to_dict(), {"isentropic_spread": spread, "nonisentropic_variation": var})
    rep.invariants += [
        Invariant("isentropic_exit_constant", spread <= 1e-12, spread, 1e-12),
        Invariant("nonisentropic_exit_varies", var > 0.01, var, 0.01),
    ]
    rep.tables["isentropic"] = (("r_s", "q_exit_isentropic", "p_exit_isentropic", "p_exit"), rows)
    return rep


def run_solve(cfg: RunConfig) -> RunReport:
    gas, noz, inflow = cfg.gas_model, _nozzle(cfg), cfg.inflow_state
    if noz.n != 2:
        raise ValidationError("nozzle.n", "the 2D solve needs n = 2")
    num = cfg.numerics
    sol = background_solution(gas, noz, inflow, _shock_radius(cfg, gas, noz, inflow), num.step)
    grid = SectorGrid.for_solution(sol, num.nr, num.ntheta, cfg.nozzle.theta)
    data = _perturbation(cfg)
    target = exit_target(cfg, sol, grid)
    modes = build_modes(gas, sol, grid.theta_full, num.modes)
    opts = FBPOptions(tol_outer=num.tol_outer, max_outer=num.max_outer, sigma=num.sigma,
                      tol_lin=num.tol_lin)
    inv = invert_P(gas, sol, grid, data, target, modes, tol_newton=num.tol_newton,
                   max_newton=num.max_newton, options=opts)
    b = inv.bundle
    fbp, tr = b.fbp, b.transport
    res = fbp.residuals
    rep = RunReport(cfg.mode, cfg.to_dict(), _background_results(gas, sol))
    rep.results.update({
        "newton_iterations": inv.iterations,
        "newton_residuals": inv.residuals,
        "front_deviation": fbp.front.deviation(sol.r_s),
        "front_mean": float(np.mean(fbp.front.f)),
        "psi_sup": fbp.psi.sup(),
        "pressure_deviation": float(np.max(np.abs(tr.pressure.values
                                                  - sol.p_plus(grid.radii(fbp.front.f))))),
        "perturbation_sizes": list(fbp.sizes),
        "fbp_residuals": res,
        "fbp_iterations": fbp.iterations,
        "contraction": fbp.contraction,
        "wall_slip": tr.field.wall_slip,
        "radial_speed_min": tr.field.radial_speed_min,
        "dupsilon_min": tr.field.dupsilon_min,
        "mode_tail_limit": modes.tail_limit,
    })

    up_p = data.upstream.evaluate(sol, fbp.front.f, grid.theta)[2]
    up_rho = _upstream_rho(gas, sol, data, fbp.front.f, grid.theta)
    dn_p = tr.pressure.values[0]
    head = (dn_p / tr.e_nodes[0]) ** (1.0 / gas.exponent)
    dn_rho = gas.gamma * dn_p / ((gas.gamma - 1.0) * head)
    ds = float(np.min(dn_p / dn_rho**gas.gamma - up_p / up_rho**gas.gamma))
    rep.invariants += [
        Invariant("newton_converged", inv.residuals[-1] <= num.tol_newton, inv.residuals[-1],
                  num.tol_newton),
        Invariant("newton_monotone", bool(np.all(np.diff(inv.residuals) < 0)),
                  float(len(inv.residuals)), 0.0, "residual sequence strictly decreasing"),
    ]
    for key in ("pde", "wall", "shock", "exit", "potential_jump"):
        rep.invariants.append(Invariant(f"fbp_{key}_residual", res[key] <= RESIDUAL_LIMIT,
                                        res[key], RESIDUAL_LIMIT))
    rep.invariants += [
        Invariant("obliqueness", res["min_obliqueness"] >= 0.5, res["min_obliqueness"], 0.5),
        Invariant("mu_f_ratio", res["min_mu_ratio"] >= 0.5, res["min_mu_ratio"], 0.5),
        Invariant("front_in_window", fbp.front.deviation(sol.r_s) <= 2.0 * noz.delta,
                  fbp.front.deviation(sol.r_s), 2.0 * noz.delta),
        Invariant("pressure_positive", bool(np.all(tr.pressure.values > 0.0)),
                  float(tr.pressure.values.min()), 0.0),
        Invariant("foot_map_monotone", tr.feet_monotone, float(tr.feet_monotone), 1.0),
        Invariant("entropy_increase_at_shock", ds > 0.0, ds, 0.0),
        Invariant("mode_multiplier_floor", bool(np.all(np.abs(modes.d) >= modes.kernel_floor)),
                  float(np.min(np.abs(modes.d))), modes.kernel_floor),
    ]
    rep.tables["branches"] = (("branch", "r", "u", "p", "rho", "phi"), _branch_rows(sol))
    rep.tables["front"] = (("theta", "f"), list(zip(grid.theta, fbp.front.f)))
    rep.tables["exit_profiles"] = (("theta", "v_ex", "p_ex", "p_target"),
                                   list(zip(grid.theta, b.v_ex.values, b.p_ex.values, target.values)))
    rows = [("newton", k, v) for k, v in enumerate(inv.residuals)]
    rows += [("fbp_dpsi", h["iteration"], h["dpsi"]) for h in fbp.history]
    rows += [("fbp_dfront", h["iteration"], h["dfront"]) for h in fbp.history]
    rep.tables["residuals"] = (("stage", "iteration", "value"), rows)
    rep.tables["modes"] = (("j", "lambda", "q_shock", "d"),
                           [(j, modes.lambdas[j], modes.q_shock[j], modes.d[j])
                            for j in range(modes.count)])
    rep.fields["psi"] = fbp.psi
    rep.fields["pressure"] = tr.pressure
    return rep


def _upstream_rho(gas, sol, data, f, theta):
    _, grad, p = data.upstream.evaluate(sol, f, theta)
    return upstream_density(gas, grad, p, data.psi_map.jacobian(f, theta))


def run_check(cfg: RunConfig) -> RunReport:
    gas, noz, inflow = cfg.gas_model, _nozzle(cfg), cfg.inflow_state
    num, sw = cfg.numerics, cfg.sweep
    sol = background_solution(gas, noz, inflow, _shock_radius(cfg, gas, noz, inflow), num.step)
    grid = (SectorGrid.for_solution(sol, num.nr, num.ntheta, cfg.nozzle.theta)
            if noz.n == 2 else None)
    rep = RunReport(cfg.mode, cfg.to_dict(), _background_results(gas, sol))
    rep.invariants = check_suite(gas, noz, inflow, sol, grid, cfg.seed,
                                 (sw.r_s_min, sw.r_s_max, sw.count), num.modes,
                                 sw.isentropic_flux, num.step)
    return rep


RUNNERS = {
    "background": run_background,
    "locate-shock": run_locate,
    "solve": run_solve,
    "sweep": run_sweep,
    "check": run_check,
    "demo-isentropic": run_demo_isentropic,
}


def run(cfg: RunConfig) -> RunReport:
    log.info("running %s", cfg.mode)
    return RUNNERS[cfg.mode](cfg)


def write_field(path: Path, fld: Field2D, r_s: float) -> Path:
    g = fld.grid
    rows = [(fld.quantity, g.nr, g.ntheta, g.theta_half, r_s), ("r", "theta", "value")]
    rows += [tuple(row) for row in fld.rows()]
    return write_csv(path, ("quantity", "nr", "ntheta", "theta_half", "r_s"), rows)


def emit_plot_data(report: RunReport, out_dir: str | Path) -> list[Path]:
    """Write the report's tables as CSV files plus report.json."""
    out = ensure_dir(out_dir)
    paths = []
    for name, (header, rows) in report.tables.items():
        paths.append(write_csv(out / f"{name}.csv", header, rows))
    r_s = report.results.get("r_s", float("nan"))
    for name, fld in report.fields.items():
        paths.append(write_field(out / f"{name}_field.csv", fld, r_s))
    paths.append(write_json(out / "report.json", report.as_dict()))
    return paths
