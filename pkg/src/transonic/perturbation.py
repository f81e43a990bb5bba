"""Named analytic perturbation families for the 2D problem.

The cross-section is the arc θ ∈ [-Θ/2, Θ/2].  Angular shapes are Neumann
cosines ``cos(jπ(θ + Θ/2)/Θ)``, so every family satisfies slip at the walls.
Radial profiles use s(r) = ((r - r0)/(r1 - r0))², which vanishes at the
entrance.  Jacobians follow the ``m[i, j] = ∂Ψ_j/∂x_i`` convention in the
polar frame (see :mod:`transonic.jump`).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .radial import RadialSolution

DEFORMATIONS = ("identity", "radial")
UPSTREAMS = ("radial", "cosine")


def cosine_mode(j: int, theta, theta_full: float):
    return np.cos(j * np.pi * (np.asarray(theta) + 0.5 * theta_full) / theta_full)


def cosine_mode_slope(j: int, theta, theta_full: float):
    k = j * np.pi / theta_full
    return -k * np.sin(k * (np.asarray(theta) + 0.5 * theta_full))


def _ramp(r, r0, r1):
    t = (np.asarray(r) - r0) / (r1 - r0)
    return t * t, 2.0 * t / (r1 - r0)


@dataclass(frozen=True)
class DeformationFamily:
    """Ψ(r, θ) = (r (1 + ε s(r) c_j(θ)), θ), or the identity.

    Walls map to walls; the exit arc is bent by the cosine.
    """

    kind: str = "identity"
    amplitude: float = 0.0
    mode: int = 1
    r0: float = 1.0
    r1: float = 2.0
    theta_full: float = np.pi / 6

    def __post_init__(self) -> None:
        if self.kind not in DEFORMATIONS:
            raise ValueError(f"unknown deformation family {self.kind!r}; choose from {DEFORMATIONS}")

    @property
    def trivial(self) -> bool:
        return self.kind == "identity" or self.amplitude == 0.0

    def jacobian(self, r, theta) -> np.ndarray:
        r, theta = np.broadcast_arrays(np.asarray(r, float), np.asarray(theta, float))
        m = np.zeros(r.shape + (2, 2))
        m[..., 0, 0] = 1.0
        m[..., 1, 1] = 1.0
        if self.trivial:
            return m
        eps = self.amplitude
        s, ds = _ramp(r, self.r0, self.r1)
        c = cosine_mode(self.mode, theta, self.theta_full)
        dc = cosine_mode_slope(self.mode, theta, self.theta_full)
        m[..., 0, 0] = 1.0 + eps * c * (s + r * ds)
        m[..., 1, 0] = eps * s * dc
        m[..., 1, 1] = 1.0 + eps * s * c
        return m


@dataclass(frozen=True)
class UpstreamFamily:
    """Supersonic data φ⁻, p⁻: the radial branch plus an optional cosine bump.

    φ⁻ = φ₀⁻ + ε L s(r) c_j(θ) with L = (r1 - r0)·u_in, and
    p⁻ = p₀⁻ (1 + ε s(r) c_j(θ)).
    """

    kind: str = "radial"
    amplitude: float = 0.0
    mode: int = 1
    r0: float = 1.0
    r1: float = 2.0
    theta_full: float = np.pi / 6

    def __post_init__(self) -> None:
        if self.kind not in UPSTREAMS:
            raise ValueError(f"unknown upstream family {self.kind!r}; choose from {UPSTREAMS}")

    @property
    def trivial(self) -> bool:
        return self.kind == "radial" or self.amplitude == 0.0

    def evaluate(self, sol: RadialSolution, r, theta):
        """(φ⁻, ∇φ⁻ in the polar frame, p⁻) at the given points."""
        r, theta = np.broadcast_arrays(np.asarray(r, float), np.asarray(theta, float))
        phi = sol.phi_minus(r)
        grad = np.zeros(r.shape + (2,))
        grad[..., 0] = sol.u_minus(r)
        p = sol.p_minus(r)
        if self.trivial:
            return phi, grad, p
        eps = self.amplitude
        scale = (self.r1 - self.r0) * sol.inflow.u
        s, ds = _ramp(r, self.r0, self.r1)
        c = cosine_mode(self.mode, theta, self.theta_full)
        dc = cosine_mode_slope(self.mode, theta, self.theta_full)
        phi = phi + eps * scale * s * c
        grad[..., 0] += eps * scale * ds * c
        grad[..., 1] += eps * scale * s * dc / r
        p = p * (1.0 + eps * s * c)
        return phi, grad, p


@dataclass(frozen=True)
class PerturbationData:
    """Everything the free-boundary solve needs besides the background.

    ``v_ex`` holds exit normal-flux samples on the θ grid; ``None`` means the
    background value v_c everywhere.
    """

    psi_map: DeformationFamily = DeformationFamily()
    upstream: UpstreamFamily = UpstreamFamily()
    v_ex: np.ndarray | None = None

    def with_exit(self, v_ex) -> "PerturbationData":
        return PerturbationData(self.psi_map, self.upstream,
                                None if v_ex is None else np.asarray(v_ex, float))

    def exit_flux(self, sol: RadialSolution, ntheta: int) -> np.ndarray:
        if self.v_ex is None:
            return np.full(ntheta, sol.exit_flux)
        if self.v_ex.shape != (ntheta,):
            raise ValueError(f"exit data has shape {self.v_ex.shape}, grid needs ({ntheta},)")
        return self.v_ex


def upstream_density(gas, grad_minus, p_minus, m):
    """ρ⁻ from the Bernoulli law with the physical speed m⁻¹∇φ⁻."""
    vel = np.einsum("...ij,...j->...i", np.linalg.inv(m), grad_minus)
    head = gas.b0 - 0.5 * np.sum(vel * vel, axis=-1)
    return gas.gamma * p_minus / ((gas.gamma - 1.0) * head)
