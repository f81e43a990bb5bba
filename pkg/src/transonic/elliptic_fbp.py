"""Free-boundary problem for the subsonic potential increment ψ = φ − φ₀⁺.

Discretisation
--------------
The physical region {f(θ) < r < r1, |θ| < Θ/2} is flattened onto the
computational rectangle (ξ, θ) ∈ [0, 1] × [-Θ/2, Θ/2] by
``r = f(θ) + ξ (r1 − f(θ))``.  A divergence-form equation div(a∇u − F) = 0
becomes ∂_q(K ∂_q u − Ĝ) = 0 with K = J P a Pᵀ, Ĝ = J P F, J = r ∂_ξr and
P the rows ∇ξ, ∇θ in the polar frame.

Interior and wall nodes carry a conservative box balance: face fluxes are
built from two-point differences normal to the face and averaged nodal
differences along it.  Wall faces carry zero total flux, which for the
principal part is the ghost-node reflection u₋₁ = u₁.  The shock row
(ξ = 0) and the exit row (ξ = 1) use the same one-sided second-order
stencils as the nodal gradient, so boundary residuals measured through
:func:`node_gradient` are the discrete rows themselves.

Nonlinearity is handled by freezing a_jk(x, Dψ) and F at the previous
iterate; since a(η)η = A(∇φ₀⁺+η) − A(∇φ₀⁺) exactly, a fixed point solves the
nonlinear discrete equations.  The shock row is ∂_rψ − μ_f ψ = g with the
full nonlinear remainder lagged into g.
"""

from __future__ import annotations

import functools
import logging
import math
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .errors import (
    CavitationError,
    EllipticityLossError,
    FrontEscapeError,
    NoConvergenceError,
    ObliquenessError,
    PerturbationTooLargeError,
    SolverDivergenceError,
    TrustRegionError,
)
from .gas import GasModel
from .jump import GAUSS_NODES, GAUSS_WEIGHTS, mu_f, shock_normal_data
from .perturbation import PerturbationData, upstream_density
from .radial import RadialSolution, mu0

log = logging.getLogger(__name__)

DIRECT_LIMIT = 512 * 128


# --------------------------------------------------------------------------
# grid, front, fields


@dataclass(frozen=True)
class SectorGrid:
    """Uniform computational grid on (ξ, θ) ∈ [0, 1] × [-Θ/2, Θ/2]."""

    nr: int
    ntheta: int
    theta_full: float
    r_s: float
    r1: float

    def __post_init__(self) -> None:
        if self.nr < 5 or self.ntheta < 5:
            raise ValueError(f"grid {self.nr}x{self.ntheta} too small (need at least 5x5)")
        if not (0.0 < self.theta_full < 2.0 * math.pi):
            raise ValueError(f"arc angle {self.theta_full!r} must lie in (0, 2π)")
        if not self.r_s < self.r1:
            raise ValueError("shock radius must lie below the exit radius")

    @property
    def theta_half(self) -> float:
        return 0.5 * self.theta_full

    @property
    def xi(self) -> np.ndarray:
        return np.linspace(0.0, 1.0, self.nr)

    @property
    def theta(self) -> np.ndarray:
        return np.linspace(-self.theta_half, self.theta_half, self.ntheta)

    @property
    def dxi(self) -> float:
        return 1.0 / (self.nr - 1)

    @property
    def dtheta(self) -> float:
        return self.theta_full / (self.ntheta - 1)

    @property
    def size(self) -> int:
        return self.nr * self.ntheta

    def radii(self, f) -> np.ndarray:
        """Physical radius of every node for a front ``f``; shape (nr, ntheta)."""
        f = np.asarray(f, float)
        return f[None, :] + self.xi[:, None] * (self.r1 - f[None, :])

    def theta_weights(self) -> np.ndarray:
        """Trapezoid weights on the θ nodes."""
        w = np.full(self.ntheta, self.dtheta)
        w[0] = w[-1] = 0.5 * self.dtheta
        return w

    @classmethod
    def for_solution(cls, sol: RadialSolution, nr: int, ntheta: int,
                     theta_full: float) -> "SectorGrid":
        return cls(nr, ntheta, theta_full, sol.r_s, sol.noz.r1)


@dataclass(frozen=True)
class ShockFront:
    """Front samples f(θ_j) on the grid's θ nodes."""

    f: np.ndarray
    dtheta: float

    def slope(self) -> np.ndarray:
        return np.gradient(self.f, self.dtheta, edge_order=2)

    def deviation(self, r_s: float) -> float:
        return float(np.max(np.abs(self.f - r_s)))

    @classmethod
    def flat(cls, grid: SectorGrid, r: float | None = None) -> "ShockFront":
        return cls(np.full(grid.ntheta, grid.r_s if r is None else r), grid.dtheta)


@dataclass(frozen=True)
class Field2D:
    grid: SectorGrid
    values: np.ndarray
    quantity: str = "psi"
    front: ShockFront | None = None

    def __post_init__(self) -> None:
        if self.values.shape != (self.grid.nr, self.grid.ntheta):
            raise ValueError(f"field shape {self.values.shape} does not match the grid")
        if not np.all(np.isfinite(self.values)):
            raise ValueError(f"field {self.quantity!r} has non-finite values")

    @property
    def radii(self) -> np.ndarray:
        f = self.front.f if self.front is not None else np.full(self.grid.ntheta, self.grid.r_s)
        return self.grid.radii(f)

    def sup(self) -> float:
        return float(np.max(np.abs(self.values)))

    def rows(self):
        """(r, θ, value) triples in r-major order."""
        r = self.radii
        th = np.broadcast_to(self.grid.theta[None, :], r.shape)
        return np.column_stack([r.ravel(), th.ravel(), self.values.ravel()])


# --------------------------------------------------------------------------
# difference operators


def _d1_node(n: int, h: float) -> sp.csr_matrix:
    """Central differences inside, second-order one-sided at both ends."""
    m = sp.lil_matrix((n, n))
    for i in range(1, n - 1):
        m[i, i - 1] = -0.5 / h
        m[i, i + 1] = 0.5 / h
    m[0, 0], m[0, 1], m[0, 2] = -1.5 / h, 2.0 / h, -0.5 / h
    m[n - 1, n - 1], m[n - 1, n - 2], m[n - 1, n - 3] = 1.5 / h, -2.0 / h, 0.5 / h
    return m.tocsr()


def _d1_face(n: int, h: float) -> sp.csr_matrix:
    return sp.diags([-np.ones(n - 1) / h, np.ones(n - 1) / h], [0, 1], shape=(n - 1, n)).tocsr()


def _avg_face(n: int) -> sp.csr_matrix:
    return sp.diags([0.5 * np.ones(n - 1), 0.5 * np.ones(n - 1)], [0, 1], shape=(n - 1, n)).tocsr()


@dataclass(frozen=True)
class _Operators:
    dxi_node: sp.csr_matrix
    dth_node: sp.csr_matrix
    dxi_x: sp.csr_matrix
    avg_x: sp.csr_matrix
    dth_t: sp.csr_matrix
    avg_t: sp.csr_matrix
    div_x: sp.csr_matrix
    div_t: sp.csr_matrix
    pde_mask: sp.csr_matrix
    shock_rows: np.ndarray
    exit_rows: np.ndarray
    wall_rows: np.ndarray
    interior_rows: np.ndarray


@functools.lru_cache(maxsize=16)
def _operators(nr: int, nt: int, dxi: float, dth: float) -> _Operators:
    i_r = sp.identity(nr, format="csr")
    i_t = sp.identity(nt, format="csr")
    div_x1 = sp.lil_matrix((nr, nr - 1))
    for i in range(1, nr - 1):
        div_x1[i, i] = 1.0 / dxi
        div_x1[i, i - 1] = -1.0 / dxi
    widths = np.full(nt, dth)
    widths[0] = widths[-1] = 0.5 * dth
    div_t1 = sp.lil_matrix((nt, nt - 1))
    for j in range(nt):
        if j < nt - 1:
            div_t1[j, j] = 1.0 / widths[j]
        if j > 0:
            div_t1[j, j - 1] = -1.0 / widths[j]
    mask = np.ones(nr * nt)
    mask[:nt] = 0.0
    mask[-nt:] = 0.0
    idx = np.arange(nr * nt).reshape(nr, nt)
    return _Operators(
        dxi_node=sp.kron(_d1_node(nr, dxi), i_t, format="csr"),
        dth_node=sp.kron(i_r, _d1_node(nt, dth), format="csr"),
        dxi_x=sp.kron(_d1_face(nr, dxi), i_t, format="csr"),
        avg_x=sp.kron(_avg_face(nr), i_t, format="csr"),
        dth_t=sp.kron(i_r, _d1_face(nt, dth), format="csr"),
        avg_t=sp.kron(i_r, _avg_face(nt), format="csr"),
        div_x=sp.kron(div_x1.tocsr(), i_t, format="csr"),
        div_t=sp.kron(i_r, div_t1.tocsr(), format="csr"),
        pde_mask=sp.diags(mask).tocsr(),
        shock_rows=idx[0].copy(),
        exit_rows=idx[-1].copy(),
        wall_rows=np.concatenate([idx[1:-1, 0], idx[1:-1, -1]]),
        interior_rows=idx[1:-1, 1:-1].ravel(),
    )


def operators(grid: SectorGrid) -> _Operators:
    return _operators(grid.nr, grid.ntheta, grid.dxi, grid.dtheta)


# --------------------------------------------------------------------------
# geometry and coefficients


@dataclass(frozen=True)
class _Geometry:
    r: np.ndarray       # physical radius
    theta: np.ndarray
    r_xi: np.ndarray    # ∂r/∂ξ
    r_th: np.ndarray    # ∂r/∂θ at fixed ξ


def _geometry(xi, theta, f, fp, r1) -> _Geometry:
    r = f + xi * (r1 - f)
    return _Geometry(r, theta, r1 - f + 0.0 * xi, fp * (1.0 - xi), )


def _locations(grid: SectorGrid, front: ShockFront):
    """Geometry at nodes, ξ-faces and θ-faces (flattened, matching operator order)."""
    f = front.f
    fp = front.slope()
    xi = grid.xi
    th = grid.theta
    nodes = _geometry(xi[:, None], th[None, :], f[None, :], fp[None, :], grid.r1)
    xi_h = 0.5 * (xi[1:] + xi[:-1])
    xfaces = _geometry(xi_h[:, None], th[None, :], f[None, :], fp[None, :], grid.r1)
    th_h = 0.5 * (th[1:] + th[:-1])
    f_h = 0.5 * (f[1:] + f[:-1])
    fp_h = np.diff(f) / grid.dtheta
    tfaces = _geometry(xi[:, None], th_h[None, :], f_h[None, :], fp_h[None, :], grid.r1)
    flat = lambda g: _Geometry(*(np.broadcast_to(a, np.broadcast_shapes(
        g.r.shape, g.theta.shape, g.r_xi.shape, g.r_th.shape)).ravel()
        for a in (g.r, g.theta, g.r_xi, g.r_th)))
    return flat(nodes), flat(xfaces), flat(tfaces)


def physical_gradient(geo: _Geometry, u_xi, u_th) -> np.ndarray:
    """Polar-frame gradient (∂_r u, r⁻¹∂_θ u) from computational derivatives."""
    g = np.empty(np.shape(u_xi) + (2,))
    ur = u_xi / geo.r_xi
    g[..., 0] = ur
    g[..., 1] = (u_th - geo.r_th * ur) / geo.r
    return g


def k1_k2(gas: GasModel, sol: RadialSolution, r):
    """Radial and angular diffusion coefficients of the background operator."""
    g = gas.gamma
    n = sol.noz.n
    u = sol.u_plus(r)
    head = gas.b0 - 0.5 * u * u
    k1 = (g + 1.0) * r ** (n - 1) * (gas.k0 - u * u) / (
        2.0 * (g - 1.0) * head ** ((g - 2.0) / (g - 1.0)))
    k2 = r ** (n - 3) * head ** (1.0 / (g - 1.0))
    return k1, k2


def ellipticity_bound(gas: GasModel, sol: RadialSolution, r):
    """Lower bound for the smallest eigenvalue of a(x, 0)."""
    g = gas.gamma
    u = sol.u_plus(r)
    head = gas.b0 - 0.5 * u * u
    return (g + 1.0) / (2.0 * (g - 1.0)) * head ** ((2.0 - g) / (g - 1.0)) * (gas.k0 - u * u)


def _flux_jacobian(gas: GasModel, zeta):
    """∂A_j/∂ζ_k for m = I at gradient ζ; shape (..., 2, 2)."""
    g = gas.gamma
    head = gas.b0 - 0.5 * np.sum(zeta * zeta, axis=-1)
    if np.any(head <= 0.0):
        raise CavitationError("gradient reaches the vacuum limit")
    rho = head ** (1.0 / (g - 1.0))
    c = head ** ((2.0 - g) / (g - 1.0)) / (g - 1.0)
    out = -c[..., None, None] * zeta[..., :, None] * zeta[..., None, :]
    out[..., 0, 0] += rho
    out[..., 1, 1] += rho
    return out


def coeff_a(gas: GasModel, sol: RadialSolution, r, eta, floor: float | None = None):
    """Secant diffusion matrix ∫₀¹ ∂_ηA(I, ∇φ₀⁺ + sη) ds, by 8-point Gauss.

    ``r`` has shape (...) and ``eta`` shape (..., 2); the result is (..., 2, 2).
    With ``floor`` given, raises :class:`EllipticityLossError` when any
    smallest eigenvalue falls to or below it.
    """
    eta = np.asarray(eta, float)
    base = np.zeros(eta.shape)
    base[..., 0] = sol.u_plus(r)
    a = np.zeros(eta.shape + (2,))
    for s, w in zip(GAUSS_NODES, GAUSS_WEIGHTS):
        a += w * _flux_jacobian(gas, base + s * eta)
    if floor is not None:
        lam = smallest_eigenvalue(a)
        if np.any(lam <= floor):
            raise EllipticityLossError(
                f"diffusion matrix lost ellipticity: min eigenvalue {lam.min():.3e} <= {floor:.3e}")
    return a


def smallest_eigenvalue(a):
    tr = a[..., 0, 0] + a[..., 1, 1]
    det = a[..., 0, 0] * a[..., 1, 1] - a[..., 0, 1] * a[..., 1, 0]
    return 0.5 * tr - np.sqrt(np.maximum(0.25 * tr * tr - det, 0.0))


def flux_A(gas: GasModel, m, zeta):
    """det m · ρ̂(|m⁻¹ζ|²) m⁻ᵀ m⁻¹ ζ with ρ̂(q²) = (B₀ − q²/2)^(1/(γ−1))."""
    minv = np.linalg.inv(m)
    vel = np.einsum("...ij,...j->...i", minv, zeta)
    head = gas.b0 - 0.5 * np.sum(vel * vel, axis=-1)
    if np.any(head <= 0.0):
        raise CavitationError("gradient reaches the vacuum limit")
    rho = head ** (1.0 / (gas.gamma - 1.0))
    back = np.einsum("...ji,...j->...i", minv, vel)
    return (np.linalg.det(m) * rho)[..., None] * back


def _transform(geo: _Geometry, a, F):
    """K = J P a Pᵀ and Ĝ = J P F on the computational rectangle."""
    jac = geo.r * geo.r_xi
    p = np.zeros(geo.r.shape + (2, 2))
    p[..., 0, 0] = 1.0 / geo.r_xi
    p[..., 0, 1] = -geo.r_th / (geo.r * geo.r_xi)
    p[..., 1, 1] = 1.0 / geo.r
    K = jac[..., None, None] * np.einsum("...ai,...ij,...bj->...ab", p, a, p)
    G = jac[..., None] * np.einsum("...ai,...i->...a", p, F)
    return K, G


# --------------------------------------------------------------------------
# problem definition


@dataclass(frozen=True)
class FBPOptions:
    tol_outer: float = 1e-10
    max_outer: int = 60
    sigma: float = 0.1
    trust_factor: float = 6.0
    ellipticity_fraction: float = 0.1
    tol_lin: float = 1e-9
    check_obliqueness: bool = True


@dataclass
class LinearSystem:
    matrix: sp.csr_matrix
    rhs: np.ndarray
    g1: np.ndarray
    g3: np.ndarray
    mu: np.ndarray
    obliqueness: np.ndarray
    min_eigenvalue: float
    rh_normal: np.ndarray


@dataclass
class FBPResult:
    front: ShockFront
    psi: Field2D
    iterations: int
    history: list = field(default_factory=list)
    sizes: tuple = (0.0, 0.0, 0.0)
    amplification: float = 0.0
    residuals: dict = field(default_factory=dict)

    @property
    def contraction(self) -> float:
        """Largest late-stage ratio of successive ψ updates."""
        steps = [h["dpsi"] for h in self.history]
        ratios = [b / a for a, b in zip(steps, steps[1:]) if a > 0.0]
        return max(ratios[-3:]) if ratios else 0.0


def node_gradient(grid: SectorGrid, front: ShockFront, values) -> np.ndarray:
    """Polar-frame gradient of a nodal field; shape (nr, ntheta, 2)."""
    ops = operators(grid)
    u = np.asarray(values, float).ravel()
    nodes, _, _ = _locations(grid, front)
    g = physical_gradient(nodes, ops.dxi_node @ u, ops.dth_node @ u)
    return g.reshape(grid.nr, grid.ntheta, 2)


class FreeBoundaryProblem:
    """Discrete free-boundary problem for fixed background, grid and data."""

    def __init__(self, gas: GasModel, sol: RadialSolution, grid: SectorGrid,
                 data: PerturbationData | None = None, options: FBPOptions | None = None):
        if grid.r_s != sol.r_s or grid.r1 != sol.noz.r1:
            raise ValueError("grid does not match the background solution")
        if sol.noz.n != 2:
            raise ValueError("the 2D solver handles n = 2 only")
        self.gas = gas
        self.sol = sol
        self.grid = grid
        self.data = data if data is not None else PerturbationData()
        self.options = options if options is not None else FBPOptions()
        self.ops = operators(grid)
        self.mu0 = mu0(gas, sol.noz, sol)
        r_bg = grid.radii(np.full(grid.ntheta, sol.r_s))
        self.floor = self.options.ellipticity_fraction * float(
            np.min(ellipticity_bound(gas, sol, r_bg)))
        self.jump_slope = float(sol.u_minus(sol.r_s) - sol.u_plus(sol.r_s))
        self.v_ex = self.data.exit_flux(sol, grid.ntheta)
        self.v_c = sol.exit_flux
        self.psi_scale = float(sol.u_plus(sol.noz.r1)) * (sol.noz.r1 - sol.r_s)

    # -- data sizes ---------------------------------------------------------
    def perturbation_sizes(self) -> tuple[float, float, float]:
        """Sup-norm surrogates (ς₁, ς₂, ς₄) of the perturbation data."""
        sol, grid, data = self.sol, self.grid, self.data
        d2 = 2.0 * sol.noz.delta
        th = grid.theta
        r_dom = np.linspace(sol.r_s - d2, grid.r1, 64)
        m = data.psi_map.jacobian(r_dom[:, None], th[None, :])
        s1 = float(np.max(np.abs(m - np.eye(2))))
        r_up = np.linspace(sol.r_s - d2, sol.r_s + d2, 33)
        rr, tt = np.meshgrid(r_up, th, indexing="ij")
        phi, grad, p = data.upstream.evaluate(sol, rr, tt)
        u0 = sol.u_minus(rr)
        dgrad = np.linalg.norm(grad - np.stack([u0, 0.0 * u0], axis=-1), axis=-1) / u0
        dp = np.abs(p - sol.p_minus(rr)) / sol.p_minus(rr)
        dphi = np.abs(phi - sol.phi_minus(rr)) / (sol.inflow.u * (sol.noz.r1 - sol.noz.r0))
        s2 = float(np.max(dgrad + dp + dphi))
        s4 = float(np.max(np.abs(self.v_ex - self.v_c)) / self.v_c)
        return s1, s2, s4

    # -- assembly -------------------------------------------------------------
    def _shock_data(self, front: ShockFront, psi_flat, nodes: _Geometry, dxi_n, dth_n):
        gas, sol, grid = self.gas, self.sol, self.grid
        nt = grid.ntheta
        f = front.f
        th = grid.theta
        phi_m, grad_m, p_m = self.data.upstream.evaluate(sol, f, th)
        m_s = self.data.psi_map.jacobian(f, th)
        rho_m = upstream_density(gas, grad_m, p_m, m_s)
        sl = slice(0, nt)
        geo0 = _Geometry(nodes.r[sl], nodes.theta[sl], nodes.r_xi[sl], nodes.r_th[sl])
        dpsi = physical_gradient(geo0, dxi_n[sl], dth_n[sl])
        grad_p = dpsi.copy()
        grad_p[:, 0] += sol.u_plus(f)
        un_m, un_p, ks = shock_normal_data(gas, grad_m, grad_p, p_m, rho_m, m_s)
        mu = mu_f(gas, sol, f)
        h_star = (grad_p[:, 0] - un_p) - (gas.k0 / sol.u_minus(f) - ks / un_m)
        psi_minus = phi_m - sol.phi_minus(f)
        g1 = h_star - mu * psi_minus
        obl = self._obliqueness(front, grad_m, grad_p, dpsi, ks, un_m)
        return g1, mu, obl, un_p - ks / un_m

    def _obliqueness(self, front, grad_m, grad_p, dpsi, ks, un_m):
        """b₁·ν_f with b₁ = r̂ − β₁ + β₂ from the split shock condition."""
        sol, gas = self.sol, self.gas
        f = front.f
        g = gas.gamma
        u_m0 = sol.u_minus(f)
        w0 = np.stack([u_m0 - sol.u_plus(f), 0.0 * f], axis=-1)
        j2 = np.zeros(f.shape + (2, 2))
        for s, w in zip(GAUSS_NODES, GAUSS_WEIGHTS):
            v = w0 - s * dpsi
            nv = np.linalg.norm(v, axis=-1)
            nu = v / nv[:, None]
            j2 += w * (-(np.eye(2) - nu[:, :, None] * nu[:, None, :]) / nv[:, None, None])
        beta1 = -np.einsum("...ki,...k->...i", j2, grad_p)
        jump = grad_m - grad_p
        tang = dpsi.copy()
        tang[:, 0] = 0.0
        beta2 = ((g - 1.0) * u_m0 / ((g + 1.0) * np.sum(jump * jump, axis=-1)))[:, None] * tang
        beta2 += (ks / un_m)[:, None] * j2[:, 0, :]
        b1 = -beta1 + beta2
        b1[:, 0] += 1.0
        nf = np.stack([np.ones_like(f), -front.slope() / f], axis=-1)
        nf /= np.linalg.norm(nf, axis=-1)[:, None]
        return np.sum(b1 * nf, axis=-1)

    def assemble(self, front: ShockFront, frozen: Field2D | np.ndarray) -> LinearSystem:
        """Frozen-coefficient linear system for the next iterate."""
        gas, sol, grid, ops = self.gas, self.sol, self.grid, self.ops
        psi = np.asarray(getattr(frozen, "values", frozen), float).ravel()
        if np.any(front.f <= sol.noz.r0) or np.any(front.f >= grid.r1):
            raise FrontEscapeError("front left the nozzle")
        nodes, xf, tf = _locations(grid, front)
        dxi_n = ops.dxi_node @ psi
        dth_n = ops.dth_node @ psi
        psi_map = self.data.psi_map

        def face_terms(geo, u_xi, u_th):
            eta = physical_gradient(geo, u_xi, u_th)
            a = coeff_a(gas, sol, geo.r, eta, floor=self.floor)
            if psi_map.trivial:
                F = np.zeros_like(eta)
            else:
                m = psi_map.jacobian(geo.r, geo.theta)
                zeta = eta.copy()
                zeta[..., 0] += sol.u_plus(geo.r)
                F = flux_A(gas, np.broadcast_to(np.eye(2), m.shape), zeta) - flux_A(gas, m, zeta)
            K, G = _transform(geo, a, F)
            return K, G, float(np.min(smallest_eigenvalue(a)))

        Kx, Gx, lam_x = face_terms(xf, ops.dxi_x @ psi, ops.avg_x @ dth_n)
        Kt, Gt, lam_t = face_terms(tf, ops.avg_t @ dxi_n, ops.dth_t @ psi)
        D = sp.diags
        flux_x = D(Kx[:, 0, 0]) @ ops.dxi_x + D(Kx[:, 0, 1]) @ ops.avg_x @ ops.dth_node
        flux_t = D(Kt[:, 1, 1]) @ ops.dth_t + D(Kt[:, 1, 0]) @ ops.avg_t @ ops.dxi_node
        L = ops.div_x @ flux_x + ops.div_t @ flux_t
        rhs = ops.div_x @ Gx[:, 0] + ops.div_t @ Gt[:, 1]

        nt = grid.ntheta
        g1, mu, obl, rh_normal = self._shock_data(front, psi, nodes, dxi_n, dth_n)
        if self.options.check_obliqueness and np.any(obl < 0.5):
            raise ObliquenessError(f"shock condition not oblique enough: min b1.nu = {obl.min():.3f}")
        r_xi0 = nodes.r_xi[:nt]
        shock = D(1.0 / r_xi0) @ ops.dxi_node[ops.shock_rows] - sp.csr_matrix(
            (mu, (np.arange(nt), ops.shock_rows)), shape=(nt, grid.size))

        ex = slice(grid.size - nt, grid.size)
        geo_e = _Geometry(nodes.r[ex], nodes.theta[ex], nodes.r_xi[ex], nodes.r_th[ex])
        eta_e = physical_gradient(geo_e, dxi_n[ex], dth_n[ex])
        a_e = coeff_a(gas, sol, geo_e.r, eta_e, floor=self.floor)
        exit_ = (D(a_e[:, 0, 0] / geo_e.r_xi) @ ops.dxi_node[ops.exit_rows]
                 + D(a_e[:, 0, 1] / geo_e.r) @ ops.dth_node[ops.exit_rows])
        g3 = self.v_ex - self.v_c

        bc = sp.vstack([shock, sp.csr_matrix((grid.size - 2 * nt, grid.size)), exit_])
        A = (ops.pde_mask @ L + bc).tocsr()
        b = ops.pde_mask @ rhs
        b[:nt] = g1
        b[-nt:] = g3
        lam = min(lam_x, lam_t, float(np.min(smallest_eigenvalue(a_e))))
        return LinearSystem(A, b, g1, g3, mu, obl, lam, rh_normal)

    def solve_linear(self, system: LinearSystem, front: ShockFront | None = None) -> Field2D:
        A, b = system.matrix, system.rhs
        if not np.any(b):
            u = np.zeros_like(b)
        elif A.shape[0] <= DIRECT_LIMIT:
            u = spla.spsolve(A.tocsc(), b)
        else:
            d = A.diagonal()
            pre = spla.LinearOperator(A.shape, matvec=lambda x: x / d)
            u, info = spla.gmres(A, b, M=pre, rtol=1e-12, restart=200, maxiter=2000)
            if info != 0:
                raise SolverDivergenceError(f"iterative solver stopped with code {info}")
        if not np.all(np.isfinite(u)):
            raise SolverDivergenceError("linear solve produced non-finite values")
        res = A @ u - b
        scale = np.abs(A.diagonal()) * max(np.max(np.abs(u)), self.psi_scale)
        rel = float(np.max(np.abs(res) / scale))
        if rel > self.options.tol_lin:
            raise SolverDivergenceError(f"linear residual {rel:.2e} above tolerance")
        return Field2D(self.grid, u.reshape(self.grid.nr, self.grid.ntheta), "psi", front)

    def picard_step(self, front: ShockFront, current: Field2D | np.ndarray) -> Field2D:
        return self.solve_linear(self.assemble(front, current), front)

    def shock_mismatch(self, front: ShockFront, psi: Field2D) -> np.ndarray:
        """(φ⁻ − φ₀⁺ − ψ) on the front: zero when the potential is continuous."""
        f = front.f
        phi_m, _, _ = self.data.upstream.evaluate(self.sol, f, self.grid.theta)
        return phi_m - self.sol.phi_plus(f) - psi.values[0]

    def front_update(self, front: ShockFront, psi: Field2D) -> ShockFront:
        """Newton step on the potential mismatch with the background derivative."""
        f = front.f - self.shock_mismatch(front, psi) / self.jump_slope
        sol = self.sol
        if np.any(np.abs(f - sol.r_s) > 2.0 * sol.noz.delta):
            raise FrontEscapeError(
                f"front moved {np.max(np.abs(f - sol.r_s)):.3e} from r_s, beyond the margin")
        if np.any(mu_f(self.gas, sol, f) < 0.5 * self.mu0):
            raise FrontEscapeError("front left the region where mu_f >= mu0/2")
        return ShockFront(f, front.dtheta)

    def residuals(self, front: ShockFront, psi: Field2D) -> dict:
        """Row residuals of the frozen system at (front, ψ), in ψ units."""
        system = self.assemble(front, psi)
        A = system.matrix
        res = np.abs(A @ psi.values.ravel() - system.rhs) / np.abs(A.diagonal())
        ops = self.ops
        return {
            "pde": float(np.max(res[ops.interior_rows])),
            "wall": float(np.max(res[ops.wall_rows])),
            "shock": float(np.max(res[ops.shock_rows])),
            "exit": float(np.max(res[ops.exit_rows])),
            "potential_jump": float(np.max(np.abs(self.shock_mismatch(front, psi)))),
            "rh_normal": float(np.max(np.abs(system.rh_normal))),
            "min_obliqueness": float(np.min(system.obliqueness)),
            "min_mu_ratio": float(np.min(system.mu) / self.mu0),
            "min_eigenvalue": system.min_eigenvalue,
        }

    def solve(self, psi0: Field2D | None = None, front0: ShockFront | None = None) -> FBPResult:
        grid, opts = self.grid, self.options
        sizes = self.perturbation_sizes()
        total = sum(sizes)
        if max(sizes) > opts.sigma:
            raise PerturbationTooLargeError(
                f"perturbation sizes {tuple(round(s, 6) for s in sizes)} exceed sigma={opts.sigma}; "
                "the free-boundary iteration is only set up for small data")
        front = front0 if front0 is not None else ShockFront.flat(grid)
        psi = psi0 if psi0 is not None else Field2D(grid, np.zeros((grid.nr, grid.ntheta)), "psi", front)
        history = []
        radius = None
        amp = 0.0
        for k in range(1, opts.max_outer + 1):
            new = self.picard_step(front, psi)
            size = new.sup()
            if radius is None:
                amp = size / total if total > 0.0 else 0.0
                radius = opts.trust_factor * max(amp, 1.0) * opts.sigma * self.psi_scale
            if size > radius:
                raise TrustRegionError(f"iterate size {size:.3e} left the trust region {radius:.3e}")
            new_front = self.front_update(front, new)
            dpsi = float(np.max(np.abs(new.values - psi.values)))
            df = float(np.max(np.abs(new_front.f - front.f)))
            history.append({"iteration": k, "dpsi": dpsi, "dfront": df, "psi_sup": size})
            log.debug("outer %d: dpsi=%.3e df=%.3e", k, dpsi, df)
            psi = Field2D(grid, new.values, "psi", new_front)
            front = new_front
            if dpsi <= opts.tol_outer * self.psi_scale and df <= opts.tol_outer * (grid.r1 - grid.r_s):
                break
        else:
            raise NoConvergenceError(f"free-boundary iteration did not converge in {opts.max_outer} steps")
        res = self.residuals(front, psi)
        res["size_ratio"] = psi.sup() / total if total > 0.0 else 0.0
        return FBPResult(front, psi, k, history, sizes, amp, res)


def assemble_linear_system(problem: FreeBoundaryProblem, front: ShockFront,
                           frozen: Field2D) -> LinearSystem:
    return problem.assemble(front, frozen)


def solve_linear(problem: FreeBoundaryProblem, system: LinearSystem) -> Field2D:
    return problem.solve_linear(system)


def picard_step(problem: FreeBoundaryProblem, front: ShockFront, current: Field2D) -> Field2D:
    return problem.picard_step(front, current)


def front_update(problem: FreeBoundaryProblem, front: ShockFront, psi: Field2D) -> ShockFront:
    return problem.front_update(front, psi)


def solve_fbp(gas: GasModel, sol: RadialSolution, grid: SectorGrid,
              data: PerturbationData | None = None, options: FBPOptions | None = None) -> FBPResult:
    return FreeBoundaryProblem(gas, sol, grid, data, options).solve()
