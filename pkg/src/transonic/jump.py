"""Shock relations: radial Rankine-Hugoniot closure, residuals, K_s, μ_f, E_int.

Vectors and matrices here are expressed in the local orthonormal polar frame
(r̂, θ̂).  A deformation Jacobian ``m`` follows the convention
``m[i, j] = ∂Ψ_j/∂x_i`` so that the physical gradient of a pulled-back
potential is ``m⁻¹ ∇φ``; it is therefore the transpose of the usual Jacobian.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import DegenerateShockError, DomainError, NotSupersonicError
from .gas import FlowState, GasModel, MachClass, density_from_bernoulli, mach_class
from .radial import RadialSolution

_GL_X, _GL_W = np.polynomial.legendre.leggauss(8)
GAUSS_NODES = 0.5 * (_GL_X + 1.0)
GAUSS_WEIGHTS = 0.5 * _GL_W


@dataclass(frozen=True)
class JumpResult:
    upstream: FlowState
    downstream: FlowState
    normal_speed_up: float
    normal_speed_down: float


def rh_jump_radial(gas: GasModel, up: FlowState) -> JumpResult:
    """Normal shock from a supersonic upstream state.

    The critical speed is formed from the upstream state's own Bernoulli
    constant, so the jump is exact even when ``gas.b0`` carries rounding.
    """
    if mach_class(gas, up) is MachClass.SUBSONIC:
        raise NotSupersonicError(f"upstream state {up} is subsonic")
    g = gas.gamma
    b_up = 0.5 * up.u * up.u + g * up.p / ((g - 1.0) * up.rho)
    k = 2.0 * (g - 1.0) * b_up / (g + 1.0)
    u_dn = k / up.u
    p_dn = up.rho * up.u * up.u + up.p - up.rho * k
    rho_dn = density_from_bernoulli(GasModel(g, b_up), u_dn, p_dn)
    down = FlowState(rho_dn, u_dn, p_dn)
    return JumpResult(up, down, up.u, u_dn)


def rh_residuals(gas: GasModel, up: FlowState, down: FlowState,
                 normal_speed_up: float, normal_speed_down: float) -> tuple[float, float, float]:
    """(mass, momentum, energy) brackets across a shock with the given normal speeds."""
    g = gas.gamma
    mass = up.rho * normal_speed_up - down.rho * normal_speed_down
    mom = (up.rho * normal_speed_up**2 + up.p) - (down.rho * normal_speed_down**2 + down.p)
    h_up = 0.5 * normal_speed_up**2 + g * up.p / ((g - 1.0) * up.rho)
    h_dn = 0.5 * normal_speed_down**2 + g * down.p / ((g - 1.0) * down.rho)
    return mass, mom, h_up - h_dn


def _normal_speed_upstream(grad_minus, grad_plus, m):
    """Physical upstream normal speed across the pulled-back shock.

    Batched over leading axes: gradients are (..., 2), m is (..., 2, 2).
    """
    xi = np.asarray(grad_minus, dtype=float)
    eta = np.asarray(grad_plus, dtype=float)
    m = np.asarray(m, dtype=float)
    jump = xi - eta
    jnorm = np.linalg.norm(jump, axis=-1)
    if np.any(jnorm == 0.0):
        raise DegenerateShockError("upstream and downstream gradients coincide")
    minv = np.linalg.inv(m)
    mj = np.einsum("...ij,...j->...i", minv, jump)
    mjnorm = np.linalg.norm(mj, axis=-1)
    nu = jump / jnorm[..., None]
    # Q* = |ξ-η|/|m⁻¹(ξ-η)| m⁻ᵀ m⁻¹
    q = (jnorm / mjnorm)[..., None, None] * np.einsum("...ki,...kj->...ij", minv, minv)
    return np.einsum("...ij,...j,...i->...", q, xi, nu), q, nu


def k_s(gas: GasModel, grad_phi_minus, grad_phi_plus, p_minus, rho_minus, jac_psi):
    """Critical speed squared for the normal component across a curved shock."""
    un, _, _ = _normal_speed_upstream(grad_phi_minus, grad_phi_plus, jac_psi)
    g = gas.gamma
    return 2.0 * (g - 1.0) / (g + 1.0) * (
        0.5 * un * un + g * np.asarray(p_minus) / ((g - 1.0) * np.asarray(rho_minus)))


def shock_normal_data(gas: GasModel, grad_phi_minus, grad_phi_plus, p_minus, rho_minus,
                      jac_psi):
    """Upstream and downstream physical normal speeds and K_s.

    Returns (un_minus, un_plus, ks) where un_plus is the downstream normal
    speed implied by the pulled-back gradients (not the Prandtl image).
    """
    un_m, q, nu = _normal_speed_upstream(grad_phi_minus, grad_phi_plus, jac_psi)
    un_p = np.einsum("...ij,...j,...i->...", q, np.asarray(grad_phi_plus, float), nu)
    g = gas.gamma
    ks = 2.0 * (g - 1.0) / (g + 1.0) * (
        0.5 * un_m * un_m + g * np.asarray(p_minus) / ((g - 1.0) * np.asarray(rho_minus)))
    return un_m, un_p, ks


def _check_front(sol: RadialSolution, f) -> np.ndarray:
    f = np.asarray(f, dtype=float)
    d2 = 2.0 * sol.noz.delta
    if np.any(np.abs(f - sol.r_s) > d2 * (1.0 + 1e-12)):
        raise DomainError(f"front radius outside [r_s - 2δ, r_s + 2δ] = "
                          f"[{sol.r_s - d2}, {sol.r_s + d2}]")
    return f


def mu_f(gas: GasModel, sol: RadialSolution, f_theta):
    """Shock-condition coefficient for a front at radius ``f_theta``.

    Ratio of the segment averages of d/dr(K₀/u⁻ − u⁺) and (u⁻ − u⁺) between
    r_s and ``f_theta``, by 8-point Gauss-Legendre quadrature.
    """
    f = _check_front(sol, f_theta)
    r = sol.r_s + GAUSS_NODES.reshape((-1,) + (1,) * f.ndim) * (f - sol.r_s)
    um = sol.u_minus(r)
    num = -gas.k0 * sol.du_minus(r) / (um * um) - sol.du_plus(r)
    den = um - sol.u_plus(r)
    w = GAUSS_WEIGHTS.reshape((-1,) + (1,) * f.ndim)
    out = np.sum(w * num, axis=0) / np.sum(w * den, axis=0)
    return out if f.ndim else float(out)


@dataclass(frozen=True)
class UpstreamSample:
    """Upstream gradient (polar frame), pressure and density at shock points."""

    grad: np.ndarray
    p: np.ndarray
    rho: np.ndarray


def e_init(gas: GasModel, up: UpstreamSample, grad_phi_plus, jac_psi):
    """Transported quantity E just behind the shock.

    Pressure from the normal momentum balance divided by the Bernoulli
    enthalpy factor of the downstream physical speed.  Arguments are batched.
    """
    grad_phi_minus, p_minus, rho_minus = up.grad, up.p, up.rho
    un, _, _ = _normal_speed_upstream(grad_phi_minus, grad_phi_plus, jac_psi)
    ks = k_s(gas, grad_phi_minus, grad_phi_plus, p_minus, rho_minus, jac_psi)
    rho_m = np.asarray(rho_minus, dtype=float)
    p_s = rho_m * un * un + np.asarray(p_minus) - rho_m * ks
    vel = np.einsum("...ij,...j->...i", np.linalg.inv(np.asarray(jac_psi, float)),
                    np.asarray(grad_phi_plus, float))
    head = gas.b0 - 0.5 * np.sum(vel * vel, axis=-1)
    return p_s / head**gas.exponent


__all__ = [
    "GAUSS_NODES", "GAUSS_WEIGHTS", "JumpResult", "e_init", "k_s", "mu_f",
    "rh_jump_radial", "rh_residuals", "shock_normal_data", "UpstreamSample",
]
