import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, strategies as st

from transonic.errors import DegenerateShockError, DomainError, NotSupersonicError
from transonic.gas import FlowState, GasModel, MachClass, entropy_measure, mach_class
from transonic.jump import UpstreamSample, e_init, k_s, mu_f, rh_jump_radial, rh_residuals
from transonic.radial import mu0

GAS = GasModel(1.4, 5.5)
E0_PLUS = 0.007870008566248839
I2 = np.eye(2)


def _exact_jump():
    g = Fraction(7, 5)
    rho, u, p = Fraction(1), Fraction(2), Fraction(1)
    b0 = u * u / 2 + g * p / ((g - 1) * rho)
    k0 = 2 * (g - 1) * b0 / (g + 1)
    u2 = k0 / u
    p2 = rho * u * u + p - rho * k0
    rho2 = g * p2 / ((g - 1) * (b0 - u2 * u2 / 2))
    return rho2, u2, p2


def test_radial_jump_example():
    rho2, u2, p2 = _exact_jump()
    assert (rho2, u2, p2) == (Fraction(24, 11), Fraction(11, 12), Fraction(19, 6))
    res = rh_jump_radial(GAS, FlowState(1.0, 2.0, 1.0))
    d = res.downstream
    assert (d.rho, d.u, d.p) == pytest.approx((24 / 11, 11 / 12, 19 / 6), rel=1e-14)
    # mass 2, momentum 5, Bernoulli 5.5 on both sides
    assert d.rho * d.u == pytest.approx(2.0, rel=1e-14)
    assert d.rho * d.u**2 + d.p == pytest.approx(5.0, rel=1e-14)
    assert max(abs(x) for x in rh_residuals(GAS, res.upstream, d, 2.0, d.u)) <= 1e-14


def test_sonic_fixed_point_and_subsonic_rejected():
    u = math.sqrt(GAS.k0)
    p = 1.0
    rho = GAS.gamma * p / (0.4 * (GAS.b0 - 0.5 * u * u))
    res = rh_jump_radial(GAS, FlowState(rho, u, p))
    assert res.downstream.u == pytest.approx(u, rel=1e-12)
    assert res.downstream.p == pytest.approx(p, rel=1e-12)
    with pytest.raises(NotSupersonicError):
        rh_jump_radial(GAS, FlowState(1.0, 0.5, 1.0))


def test_residuals_identity_and_linearity():
    s = FlowState(1.0, 2.0, 1.0)
    assert rh_residuals(GAS, s, s, 2.0, 2.0) == (0.0, 0.0, 0.0)
    d = rh_jump_radial(GAS, s).downstream
    bumped = FlowState(d.rho, d.u, 1.01 * d.p)
    _, mom, _ = rh_residuals(GAS, s, bumped, 2.0, d.u)
    assert mom == pytest.approx(-0.01 * d.p, rel=1e-12)


@given(g=st.sampled_from([1.2, 1.4, 5 / 3]), rho=st.floats(0.2, 5.0), p=st.floats(0.2, 5.0),
       mach=st.floats(1.05, 5.0))
def test_jump_properties(g, rho, p, mach):
    up = FlowState(rho, mach * math.sqrt(g * p / rho), p)
    gas = GasModel.from_state(g, up)
    res = rh_jump_radial(gas, up)
    dn = res.downstream
    mass, mom, en = rh_residuals(gas, up, dn, res.normal_speed_up, res.normal_speed_down)
    assert abs(mass) <= 1e-12 * rho * up.u
    assert abs(mom) <= 1e-12 * (rho * up.u**2 + p)
    assert abs(en) <= 1e-12 * gas.b0
    assert res.normal_speed_up * res.normal_speed_down == pytest.approx(gas.k0, rel=1e-12)
    assert mach_class(gas, dn) is MachClass.SUBSONIC
    assert entropy_measure(gas, dn) > entropy_measure(gas, up)


def test_k_s_reduces_to_k0():
    assert k_s(GAS, [2.0, 0.0], [11 / 12, 0.0], 1.0, 1.0, I2) == pytest.approx(GAS.k0, rel=1e-15)
    with pytest.raises(DegenerateShockError):
        k_s(GAS, [2.0, 0.0], [2.0, 0.0], 1.0, 1.0, I2)


def test_k_s_quadratic_in_tangential_perturbation():
    errs = []
    for eps in (1e-2, 5e-3):
        ks = k_s(GAS, [2.0, 0.0], [11 / 12, eps], 1.0, 1.0, I2)
        errs.append(abs(ks - GAS.k0))
    assert math.log2(errs[0] / errs[1]) == pytest.approx(2.0, abs=0.05)


def test_k_s_scaled_jacobian_direct():
    eps = 0.03
    m = (1 + eps) * I2
    xi, eta = np.array([2.0, 0.1]), np.array([0.9, 0.05])
    # direct: ν = (ξ-η)/|ξ-η|, Q* = |ξ-η|/|m⁻¹(ξ-η)| m⁻ᵀm⁻¹ = (1+ε)⁻¹ I
    nu = (xi - eta) / np.linalg.norm(xi - eta)
    un = xi @ nu / (1 + eps)
    expected = 2 * 0.4 / 2.4 * (0.5 * un * un + 1.4 * 1.0 / (0.4 * 1.0))
    assert k_s(GAS, xi, eta, 1.0, 1.0, m) == pytest.approx(expected, rel=1e-14)


def test_mu_f(std, sol):
    gas, noz, _ = std
    m0 = mu0(gas, noz, sol)
    assert mu_f(gas, sol, 1.5) == pytest.approx(m0, rel=1e-10)
    offs = np.array([0.02, 0.01, 0.005])
    gaps = np.abs(mu_f(gas, sol, 1.5 + offs) - m0)
    assert np.all(gaps / offs < 1.0)
    assert np.all(mu_f(gas, sol, 1.5 + np.linspace(-0.05, 0.05, 11)) >= 0.5 * m0)
    with pytest.raises(DomainError):
        mu_f(gas, sol, 1.8)


def _sample(sol, r, grad_m=None, p=None):
    grad_m = np.array([sol.u_minus(r), 0.0]) if grad_m is None else grad_m
    p = sol.p_minus(r) if p is None else p
    rho = sol.rho_minus(r)
    return UpstreamSample(grad_m, np.float64(p), np.float64(rho))


def test_e_init_background(std, sol):
    gas = std[0]
    e = e_init(gas, _sample(sol, 1.5), np.array([sol.u_plus(1.5), 0.0]), I2)
    assert e == pytest.approx(E0_PLUS, rel=1e-12)
    assert sol.e0_plus == pytest.approx(E0_PLUS, rel=1e-12)


def test_e_init_linear_bound(std, sol):
    gas = std[0]
    gaps = []
    for eps in (1e-2, 1e-3):
        up = _sample(sol, 1.5, np.array([sol.u_minus(1.5) * (1 + eps), eps]), sol.p_minus(1.5) * (1 + eps))
        e = e_init(gas, up, np.array([sol.u_plus(1.5), eps]), (1 + eps) * I2)
        gaps.append(abs(e - E0_PLUS) / E0_PLUS)
    assert gaps[0] / gaps[1] == pytest.approx(10.0, rel=0.2)


def test_e_init_direct_evaluation(std, sol):
    gas = std[0]
    rng = np.random.default_rng(3)
    gm = np.array([sol.u_minus(1.5), 0.0]) + rng.normal(0, 0.02, 2)
    gp = np.array([sol.u_plus(1.5), 0.0]) + rng.normal(0, 0.02, 2)
    m = I2 + rng.normal(0, 0.02, (2, 2))
    p, rho = sol.p_minus(1.5), sol.rho_minus(1.5)
    minv = np.linalg.inv(m)
    jump = gm - gp
    nu = jump / np.linalg.norm(jump)
    q = np.linalg.norm(jump) / np.linalg.norm(minv @ jump) * minv.T @ minv
    un = nu @ q @ gm
    ks = 2 * 0.4 / 2.4 * (0.5 * un**2 + 1.4 * p / (0.4 * rho))
    v = minv @ gp
    expected = (rho * un**2 + p - rho * ks) / (gas.b0 - 0.5 * v @ v) ** 3.5
    got = e_init(gas, UpstreamSample(gm, np.float64(p), np.float64(rho)), gp, m)
    assert got == pytest.approx(expected, rel=1e-12)
