import math

import numpy as np
import pytest

from hardylab.extremizers import (
    CutoffSpec,
    UEpsilonFamily,
    VEpsilonFamily,
    j_alpha,
    taylor_f,
    taylor_f3,
    taylor_threshold,
    truncate,
    truncated_v_epsilon,
    u_epsilon_profile,
    v_epsilon_profile,
)
from hardylab.functionals import HardyParams, hardy_integrals, hardy_quotient
from hardylab.geometry import ModelSpace
from hardylab.quadrature import QuadratureSpec

P2 = HardyParams(2.0, -2.0, 1)
TIGHT = QuadratureSpec(abs_tol=1e-300, rel_tol=1e-11)


def test_v_epsilon_continuity_and_exponents():
    fam = VEpsilonFamily(1.0, 0.1, P2)
    v = v_epsilon_profile(fam)
    assert v.value(np.array([1.0 - 1e-12, 1.0 + 1e-12])) == pytest.approx([1.0, 1.0], rel=1e-9)
    assert fam.c_eps > abs(P2.delta)
    assert VEpsilonFamily(1.0, 1e-9, P2).c_eps == pytest.approx(0.5, abs=1e-8)
    assert fam.envelope == pytest.approx(((1 + 0.1) / 2) ** 2)


@pytest.mark.parametrize("eps", [0.5, 0.1, 0.02])
def test_untruncated_quotient_below_envelope(eps):
    model = ModelSpace.cylinder_section(1)
    fam = VEpsilonFamily.for_model(model, P2, eps)
    q = hardy_quotient(model, P2, v_epsilon_profile(fam), TIGHT)
    assert 0.25 < q < fam.envelope


def test_truncation_identity_and_empty():
    fam = VEpsilonFamily(1.0, 0.1, P2)
    v = v_epsilon_profile(fam)
    assert truncate(v, iota=0.0) is v
    with pytest.raises(ValueError):
        truncate(v, iota=1.0)
    t = truncate(v, iota=0.5)
    lo, hi = t.support
    assert v.value(np.array([lo]))[0] == pytest.approx(0.5, rel=1e-9)
    assert v.value(np.array([hi]))[0] == pytest.approx(0.5, rel=1e-9)


def test_truncation_converges_in_energy():
    # |grad(v - v_iota)|^p integrates to num(v) - num(v_iota)
    model = ModelSpace.cylinder_section(1)
    fam = VEpsilonFamily.for_model(model, P2, 0.25)
    v = v_epsilon_profile(fam)
    full = hardy_integrals(model, P2, v, TIGHT)[0].value
    gaps = [full - hardy_integrals(model, P2, truncate(v, iota=2.0 ** -j), TIGHT)[0].value for j in (4, 8, 16, 32)]
    assert all(g > 0 for g in gaps)
    assert all(b < a for a, b in zip(gaps, gaps[1:]))
    assert gaps[-1] < 1e-3 * gaps[0]


def test_truncated_family_between_bounds():
    model = ModelSpace.torus_subtorus(2, 1)
    for eps in (0.25, 0.05):
        fam = VEpsilonFamily.for_model(model, P2, eps)
        q = hardy_quotient(model, P2, truncated_v_epsilon(fam), TIGHT)
        assert 0.25 < q < fam.envelope


def test_u_epsilon_plateau_and_log_derivative():
    fam = UEpsilonFamily(0.05, 0.75, 10.0, P2, CutoffSpec(1.0))
    u = u_epsilon_profile(fam)
    r = np.array([1e-3, 0.1, 0.4])
    want = r ** (-P2.delta + 0.05) * np.log(10.0 / r) ** 0.75
    np.testing.assert_allclose(u.value(r), want, rtol=1e-12)
    # r u'/u = -delta + eps - theta / log(D/r)
    h = 1e-6
    fd = (np.log(u.value(r * (1 + h))) - np.log(u.value(r * (1 - h)))) / (2 * h)
    np.testing.assert_allclose(fd, -P2.delta + 0.05 - 0.75 / np.log(10.0 / r), rtol=1e-7)
    with pytest.raises(ValueError):
        UEpsilonFamily(0.05, 0.5, 10.0, P2)


def test_u_epsilon_energy_finite():
    model = ModelSpace.cylinder_axis(1)
    P = HardyParams(2.0, -3.0, 1)
    u = u_epsilon_profile(UEpsilonFamily(0.01, 0.75, 20.0, P))
    num, den = hardy_integrals(model, P, u, TIGHT)
    assert num.converged and math.isfinite(num.value) and num.value > 0


def test_j_alpha_slope_and_recursion():
    model = ModelSpace.cylinder_axis(1)
    eps = [2.0 ** -j for j in (8, 9, 10, 11)]
    vals = [j_alpha(model, 0.5, e, 2.0, 2 * math.e * math.pi) for e in eps]
    slope = np.polyfit(np.log(eps), np.log(vals), 1)[0]
    assert slope == pytest.approx(-1.5, rel=0.02)
    bounded = [j_alpha(model, -2.0, e, 2.0, 2 * math.e * math.pi) for e in eps]
    assert bounded[-1] / bounded[-2] == pytest.approx(1.0, abs=0.05)
    # J_a - p eps/(a+1) J_{a+1} stays bounded while J_a itself blows up
    resid = [j_alpha(model, 0.5, e, 2.0, 10.0) - 2 * e / 1.5 * j_alpha(model, 1.5, e, 2.0, 10.0) for e in eps]
    assert max(abs(x) for x in resid) < 1e-2 * vals[-1]
    assert abs(resid[-1] - resid[-2]) < 0.05 * max(1.0, abs(resid[-2]))


def _fd_derivatives(p, delta, a, h=1e-3):
    f = lambda t: float(taylor_f(p, delta, a, t))
    f0 = f(0.0)
    d1 = (8 * (f(h) - f(-h)) - (f(2 * h) - f(-2 * h))) / (12 * h)
    d2 = (f(h) - 2 * f0 + f(-h)) / h ** 2
    return f0, d1, d2


@pytest.mark.parametrize("p,beta,k", [(2, -2, 1), (3, -4, 1), (1.5, -4.0, 2), (4.0, -7.5, 3)])
def test_taylor_function_expansion(p, beta, k):
    P = HardyParams(p, beta, k)
    tc = taylor_threshold(P)
    f0, d1, d2 = _fd_derivatives(p, P.delta, tc.a)
    assert f0 == pytest.approx(1.0, abs=1e-14)
    assert d1 == pytest.approx(0.0, abs=1e-6)
    assert d2 == pytest.approx((p - 1) / (p * P.delta ** 2), rel=1e-5)
    t = np.linspace(0.0, tc.frak_T, 1000)
    assert np.all(tc.f(t) >= tc.lower_bound(t) - 1e-12)
    assert np.all(taylor_f3(p, P.delta, tc.a, t[:-1]) > 0)
    assert np.all(tc.quadratic(t) > 0)


def test_taylor_third_derivative_matches_finite_differences():
    p, delta, a = 3.0, -1.0, -1.2
    t, h = np.array([0.05, 0.1, 0.15]), 1e-3
    f = lambda s: taylor_f(p, delta, a, s)
    fd = (f(t + 2 * h) - 2 * f(t + h) + 2 * f(t - h) - f(t - 2 * h)) / (2 * h ** 3)
    np.testing.assert_allclose(taylor_f3(p, delta, a, t), fd, rtol=1e-4)


def test_taylor_threshold_quadratic_case():
    # p = 2, delta = -1/2, a = -1: f''' = 12 - 24 t vanishes at t = 1/2
    tc = taylor_threshold(P2)
    assert tc.a == -1.0
    assert tc.frak_T == pytest.approx(0.5, abs=1e-12)
    assert tc.cal_T == pytest.approx(math.e ** 2, rel=1e-11)
