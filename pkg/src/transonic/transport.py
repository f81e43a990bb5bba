"""Transport of E = p/(B₀ − ½|u|²)^(γ/(γ−1)) along streamlines and pressure recovery.

Streamlines are traced in the coordinates (r̃, θ) with r̃ = υ(r, θ), where

    υ = (k (φ⁻ − φ) + r_s)(1 − χ(r)) + r χ(r)

flattens the shock (φ⁻ = φ there) onto r̃ = r_s and leaves the exit at
r̃ = r1.  χ is a quintic smoothstep and k scales the inner part to an eighth
of the annulus.  In these coordinates a streamline is a graph θ(r̃) with
slope W₂ = (V·θ̂/r)/(V·∇υ), V = m⁻ᵀm⁻¹∇φ, so the backward trace from
(r̃, θ) is parametrised by t with X₁(t) = 2r̃ − t exactly.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.interpolate import CubicSpline

from .elliptic_fbp import FBPResult, Field2D, SectorGrid, ShockFront, node_gradient
from .errors import RadialFloorError, StepFailureError
from .gas import GasModel
from .jump import UpstreamSample, e_init
from .perturbation import PerturbationData, upstream_density
from .radial import RadialSolution

TRACE_DIVISIONS = 4000
BLOWUP_GUARD = 1e3


def _smoothstep(r, a, b):
    t = np.clip((np.asarray(r) - a) / (b - a), 0.0, 1.0)
    return t**3 * (10.0 - 15.0 * t + 6.0 * t * t)


@dataclass(frozen=True)
class CharField:
    """Streamline slope W₂ = dθ/dr̃ on a uniform (r̃, θ) grid.

    ``upsilon`` holds r̃ at the nodes of the elliptic grid, used to move
    fields between the two grids.  ``wall_slip`` is the largest |W₂| found on
    the walls before slip is imposed exactly.
    """

    rt: np.ndarray
    theta: np.ndarray
    w2: np.ndarray
    upsilon: np.ndarray
    radial_speed_min: float
    omega0: float
    dupsilon_min: float
    wall_slip: float

    @property
    def r_s(self) -> float:
        return float(self.rt[0])

    @property
    def r1(self) -> float:
        return float(self.rt[-1])

    @property
    def theta_half(self) -> float:
        return float(self.theta[-1])

    def slope(self, x, y):
        """Bilinear interpolation of W₂ at mapped points (x, y)."""
        rt, th, w = self.rt, self.theta, self.w2
        dx = rt[1] - rt[0]
        dy = th[1] - th[0]
        fx = (x - rt[0]) / dx
        fy = (y - th[0]) / dy
        i = np.clip(np.floor(fx).astype(int), 0, len(rt) - 2)
        j = np.clip(np.floor(fy).astype(int), 0, len(th) - 2)
        tx = fx - i
        ty = fy - j
        return ((1.0 - tx) * ((1.0 - ty) * w[i, j] + ty * w[i, j + 1])
                + tx * ((1.0 - ty) * w[i + 1, j] + ty * w[i + 1, j + 1]))


@dataclass(frozen=True)
class Characteristic:
    t: np.ndarray
    x: np.ndarray
    source: tuple[float, float]

    @property
    def foot(self) -> float:
        return float(self.x[-1, 1])


def _upsilon(sol: RadialSolution, data: PerturbationData, r, theta, phi):
    r1, r_s = sol.noz.r1, sol.r_s
    phi_m, _, _ = data.upstream.evaluate(sol, r, theta)
    k = (r1 - r_s) / (8.0 * float(sol.phi_minus(r1) - sol.phi_plus(r1)))
    chi = _smoothstep(r, r_s + 0.1 * (r1 - r_s), r1 - 0.5 * (r1 - r_s))
    return (k * (phi_m - phi) + r_s) * (1.0 - chi) + r * chi


def flow_direction(sol: RadialSolution, grid: SectorGrid, front: ShockFront,
                   psi: Field2D, data: PerturbationData):
    """(∇φ, m, V) at the elliptic nodes, polar frame."""
    r = grid.radii(front.f)
    th = np.broadcast_to(grid.theta[None, :], r.shape)
    grad = node_gradient(grid, front, psi.values)
    grad[..., 0] += sol.u_plus(r)
    m = data.psi_map.jacobian(r, th)
    minv = np.linalg.inv(m)
    v = np.einsum("...ki,...kj,...j->...i", minv, minv, grad)
    return grad, m, v


def build_char_field(gas: GasModel, sol: RadialSolution, fbp: FBPResult,
                     data: PerturbationData | None = None,
                     floor_fraction: float = 0.1) -> CharField:
    """Streamline slopes of the converged flow in the shock-flattened coordinates."""
    data = data if data is not None else PerturbationData()
    grid, front, psi = fbp.psi.grid, fbp.front, fbp.psi
    r = grid.radii(front.f)
    th = np.broadcast_to(grid.theta[None, :], r.shape)
    _, _, v = flow_direction(sol, grid, front, psi, data)
    ups = _upsilon(sol, data, r, th, sol.phi_plus(r) + psi.values)
    dups = node_gradient(grid, front, ups)
    speed = np.sum(dups * v, axis=-1)

    # background floor: ∂_r υ₀ · u⁺ on the flat-front grid
    r0g = grid.radii(np.full(grid.ntheta, grid.r_s))
    ups0 = _upsilon(sol, PerturbationData(), r0g, 0.0 * r0g, sol.phi_plus(r0g))
    d0 = node_gradient(grid, ShockFront.flat(grid), ups0)[..., 0]
    omega0 = floor_fraction * float(np.min(d0 * sol.u_plus(r0g)))
    if np.any(speed < omega0) or np.any(np.diff(ups, axis=0) <= 0.0):
        raise RadialFloorError(
            f"radial transport speed {speed.min():.3e} below floor {omega0:.3e}", stage="transport")

    w2 = (v[..., 1] / r) / speed
    wall_slip = float(max(np.max(np.abs(w2[:, 0])), np.max(np.abs(w2[:, -1]))))
    w2[:, 0] = 0.0
    w2[:, -1] = 0.0

    rt = np.linspace(grid.r_s, grid.r1, grid.nr)
    w_u = np.empty((grid.nr, grid.ntheta))
    for j in range(grid.ntheta):
        w_u[:, j] = np.interp(rt, ups[:, j], w2[:, j])
    return CharField(rt, grid.theta.copy(), w_u, ups, float(speed.min()), omega0,
                     float(np.min(dups[..., 0])), wall_slip)


def _trace(field: CharField, x0, y0, steps: int, store: bool = False):
    """Backward RK4 from (x0, y0) to r̃ = r_s in ``steps`` equal steps per trace."""
    x0 = np.asarray(x0, float)
    y = np.asarray(y0, float).copy()
    h = (x0 - field.r_s) / steps
    lo, hi = -field.theta_half, field.theta_half
    path = [y.copy()] if store else None
    for k in range(steps):
        # X₁ is linear in t, so X₁ at step k is known in closed form
        xa = x0 - k * h
        xm = xa - 0.5 * h
        xb = x0 - (k + 1) * h
        k1 = field.slope(xa, y)
        k2 = field.slope(xm, y - 0.5 * h * k1)
        k3 = field.slope(xm, y - 0.5 * h * k2)
        k4 = field.slope(xb, y - h * k3)
        if np.max(np.abs(k1)) > BLOWUP_GUARD:
            raise StepFailureError("streamline slope exceeded the blow-up guard", stage="transport")
        y = np.clip(y - h * (k1 + 2.0 * k2 + 2.0 * k3 + k4) / 6.0, lo, hi)
        if store:
            path.append(y.copy())
    if not np.all(np.isfinite(y)):
        raise StepFailureError("non-finite streamline position", stage="transport")
    return (y, np.array(path)) if store else (y, None)


def _steps(field: CharField, r) -> int:
    h_max = (field.r1 - field.r_s) / TRACE_DIVISIONS
    return max(1, math.ceil((r - field.r_s) / h_max - 1e-9))


def trace_characteristic(field: CharField, r: float, theta: float) -> Characteristic:
    """Backward trace from mapped point (r̃, θ) to the shock."""
    if not (field.r_s <= r <= field.r1) or abs(theta) > field.theta_half:
        raise StepFailureError(f"start point ({r}, {theta}) outside the domain", stage="transport")
    n = _steps(field, field.r1)
    _, path = _trace(field, np.array([r]), np.array([theta]), n, store=True)
    t = r + np.linspace(0.0, r - field.r_s, n + 1)
    x = np.column_stack([2.0 * r - t, path[:, 0]])
    return Characteristic(t, x, (r, theta))


def trace_feet(field: CharField) -> np.ndarray:
    """Foot angle on the shock for every node of the uniform (r̃, θ) grid.

    All traces share X₁ levels, so a single backward sweep from the exit row
    carries every characteristic; each row joins when the sweep reaches it.
    """
    nr, nt = field.w2.shape
    sub = max(1, math.ceil(TRACE_DIVISIONS / (nr - 1)))
    h = (field.r1 - field.r_s) / ((nr - 1) * sub)
    lo, hi = -field.theta_half, field.theta_half
    feet = np.empty((nr, nt))
    feet[0] = field.theta
    y = np.empty((0,))
    owner = np.empty((0,), int)
    for i in range(nr - 1, 0, -1):
        y = np.concatenate([y, field.theta])
        owner = np.concatenate([owner, np.full(nt, i)])
        x0 = field.rt[i]
        for k in range(sub):
            xa = x0 - k * h
            xm = xa - 0.5 * h
            xb = xa - h
            k1 = field.slope(np.full_like(y, xa), y)
            if np.max(np.abs(k1)) > BLOWUP_GUARD:
                raise StepFailureError("streamline slope exceeded the blow-up guard",
                                       stage="transport")
            k2 = field.slope(np.full_like(y, xm), y - 0.5 * h * k1)
            k3 = field.slope(np.full_like(y, xm), y - 0.5 * h * k2)
            k4 = field.slope(np.full_like(y, xb), y - h * k3)
            y = np.clip(y - h * (k1 + 2.0 * k2 + 2.0 * k3 + k4) / 6.0, lo, hi)
    if not np.all(np.isfinite(y)):
        raise StepFailureError("non-finite streamline position", stage="transport")
    for i in range(1, nr):
        feet[i] = y[owner == i]
    return feet


def shock_e_init(gas: GasModel, sol: RadialSolution, fbp: FBPResult,
                 data: PerturbationData | None = None) -> np.ndarray:
    """E just behind the shock at the front nodes."""
    data = data if data is not None else PerturbationData()
    grid, front = fbp.psi.grid, fbp.front
    f, th = front.f, grid.theta
    _, grad_m, p_m = data.upstream.evaluate(sol, f, th)
    m = data.psi_map.jacobian(f, th)
    rho_m = upstream_density(gas, grad_m, p_m, m)
    grad_p = node_gradient(grid, front, fbp.psi.values)[0]
    grad_p[:, 0] += sol.u_plus(f)
    return e_init(gas, UpstreamSample(grad_m, p_m, rho_m), grad_p, m)


def transport_E(field: CharField, e_int, feet: np.ndarray | None = None) -> Field2D:
    """E on the uniform (r̃, θ) grid: the shock value at each characteristic's foot.

    ``e_int`` is either a callable θ ↦ E or samples on the θ nodes (spline-interpolated).
    """
    if not callable(e_int):
        e_int = CubicSpline(field.theta, np.asarray(e_int, float))
    if feet is None:
        feet = trace_feet(field)
    nr, nt = feet.shape
    grid = SectorGrid(nr, nt, 2.0 * field.theta_half, field.r_s, field.r1)
    return Field2D(grid, np.asarray(e_int(feet), float), "E")


def to_elliptic_grid(field: CharField, values: np.ndarray) -> np.ndarray:
    """Move a field from the uniform (r̃, θ) grid onto the elliptic nodes."""
    out = np.empty_like(field.upsilon)
    for j in range(out.shape[1]):
        out[:, j] = np.interp(field.upsilon[:, j], field.rt, values[:, j])
    return out


def reconstruct_pressure(gas: GasModel, sol: RadialSolution, fbp: FBPResult,
                         e_nodes: np.ndarray, data: PerturbationData | None = None) -> Field2D:
    """p = (B₀ − ½|m⁻¹∇φ|²)^(γ/(γ−1)) · E on the elliptic nodes."""
    data = data if data is not None else PerturbationData()
    grid, front = fbp.psi.grid, fbp.front
    grad, m, _ = flow_direction(sol, grid, front, fbp.psi, data)
    vel = np.einsum("...ij,...j->...i", np.linalg.inv(m), grad)
    head = gas.b0 - 0.5 * np.sum(vel * vel, axis=-1)
    return Field2D(grid, head**gas.exponent * e_nodes, "p", front)


def eulerian_upwind(field: CharField, e_int, refine: int = 4) -> np.ndarray:
    """First-order upwind march of ∂_r̃E + W₂∂_θE = 0 on a refined grid.

    Returns the refined solution sampled back at the coarse nodes.
    """
    if not callable(e_int):
        e_int = CubicSpline(field.theta, np.asarray(e_int, float))
    nr, nt = field.w2.shape
    rt = np.linspace(field.r_s, field.r1, refine * (nr - 1) + 1)
    th = np.linspace(-field.theta_half, field.theta_half, refine * (nt - 1) + 1)
    dth = th[1] - th[0]
    e = np.asarray(e_int(th), float)
    out = np.empty((nr, nt))
    out[0] = e[::refine]
    for i in range(1, len(rt)):
        dr = rt[i] - rt[i - 1]
        w_max = np.max(np.abs(field.slope(np.full_like(th, rt[i - 1]), th)))
        sub = max(1, math.ceil(w_max * dr / (0.9 * dth)))
        hs = dr / sub
        for k in range(sub):
            w = field.slope(np.full_like(th, rt[i - 1] + k * hs), th)
            back = np.empty_like(e)
            fwd = np.empty_like(e)
            back[1:] = (e[1:] - e[:-1]) / dth
            back[0] = 0.0
            fwd[:-1] = (e[1:] - e[:-1]) / dth
            fwd[-1] = 0.0
            e = e - hs * np.where(w > 0.0, w * back, w * fwd)
        if i % refine == 0:
            out[i // refine] = e[::refine]
    return out


def wall_distance_constant(field: CharField, n: int = 100, seed: int = 0) -> float:
    """Largest ratio between wall distances along a trace and at its start.

    Start points are drawn uniformly inside the mapped domain; distance to
    the walls is the arc length X₁ (Θ/2 − |X₂|).
    """
    rng = np.random.default_rng(seed)
    th = field.theta_half
    r = rng.uniform(field.r_s, field.r1, n)
    t0 = rng.uniform(-0.98 * th, 0.98 * th, n)
    _, path = _trace(field, r, t0, _steps(field, field.r1), store=True)
    frac = np.linspace(0.0, 1.0, path.shape[0])[:, None]
    x1 = r[None, :] - frac * (r[None, :] - field.r_s)
    d = x1 * (th - np.abs(path))
    ratio = d / d[0]
    if np.any(ratio <= 0.0):
        return math.inf
    return float(max(np.max(ratio), np.max(1.0 / ratio)))


@dataclass(frozen=True)
class TransportResult:
    field: CharField
    e_mapped: Field2D
    e_nodes: np.ndarray
    e_shock: np.ndarray
    pressure: Field2D
    feet: np.ndarray

    @property
    def feet_monotone(self) -> bool:
        return bool(np.all(np.diff(self.feet, axis=1) >= 0.0))

    @property
    def exit_pressure(self) -> np.ndarray:
        return self.pressure.values[-1].copy()


def run_transport(gas: GasModel, sol: RadialSolution, fbp: FBPResult,
                  data: PerturbationData | None = None) -> TransportResult:
    field = build_char_field(gas, sol, fbp, data)
    e_shock = shock_e_init(gas, sol, fbp, data)
    feet = trace_feet(field)
    e_mapped = transport_E(field, e_shock, feet)
    e_nodes = to_elliptic_grid(field, e_mapped.values)
    p = reconstruct_pressure(gas, sol, fbp, e_nodes, data)
    if np.any(p.values <= 0.0):
        raise RadialFloorError("reconstructed pressure is not positive", stage="transport")
    return TransportResult(field, e_mapped, e_nodes, e_shock, p, feet)
