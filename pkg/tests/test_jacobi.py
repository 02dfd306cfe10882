import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from hardylab.jacobi import (
    JacobiSystem,
    dominance_trial,
    elementary_symmetric,
    focal_time,
    heintze_karcher_envelope,
    hypersurface_bound,
    integrate_jacobi,
    newton_chain,
)


def test_flat_det_is_power_of_t():
    sys = JacobiSystem.constant(np.zeros((2, 2)), np.zeros((1, 1)))
    res = integrate_jacobi(sys, 2.0, 0.05)
    np.testing.assert_allclose(res.det, res.t, atol=1e-8)


def test_scalar_flat_normal_block():
    sys = JacobiSystem.constant(np.zeros((1, 1)), np.zeros((0, 0)))
    res = integrate_jacobi(sys, 1.0, 0.1)
    assert res.det[-1] == pytest.approx(1.0, abs=1e-10)


def test_unit_curvature_product():
    sys = JacobiSystem.constant(np.eye(2), np.zeros((1, 1)))
    res = integrate_jacobi(sys, 1.0, 0.05)
    assert res.det[-1] == pytest.approx(math.cos(1) * math.sin(1), abs=1e-8)
    assert res.det[-1] == pytest.approx(0.45465, abs=1e-5)


def test_focal_time_of_sphere():
    sys = JacobiSystem.constant(np.eye(1), np.zeros((0, 0)))
    res = integrate_jacobi(sys, 4.0, 0.01)
    assert res.focal_time == pytest.approx(math.pi, abs=1e-4)
    assert focal_time(np.array([0.0, 1.0]), np.array([0.0, 1.0])) == math.inf


def test_time_dependent_curvature_matches_constant():
    R = np.diag([0.5, 1.0])
    W = np.array([[0.3]])
    a = integrate_jacobi(JacobiSystem.constant(R, W), 1.5, 0.05)
    b = integrate_jacobi(JacobiSystem(2, 1, lambda t: R, W), 1.5, 0.05)
    assert a.det[-1] == pytest.approx(b.det[-1], rel=1e-7)


def test_log_derivative_matches_finite_differences():
    sys = JacobiSystem.constant(np.diag([0.2, 0.7, 0.4]), np.diag([0.3, -0.3]))
    res = integrate_jacobi(sys, 1.2, 0.01)
    fd = np.gradient(np.log(res.det[1:]), res.t[1:])
    # fd[j] sits at t[j+1]
    np.testing.assert_allclose(res.log_derivative[20:-5], fd[19:-5], rtol=1e-3, atol=1e-4)


def test_rejects_asymmetric_input():
    with pytest.raises(ValueError):
        JacobiSystem.constant(np.array([[0.0, 1.0], [0.0, 0.0]]), np.zeros((1, 1)))
    with pytest.raises(ValueError):
        JacobiSystem.constant(np.eye(2), np.array([[0.0, 1.0], [0.0, 0.0]]))


def test_envelope_examples():
    t = np.array([0.3, 1.1])
    np.testing.assert_allclose(heintze_karcher_envelope(0.0, [0.0, 0.0], 3, t), t ** 2)
    assert heintze_karcher_envelope(0.0, [1.0], 1, 0.5) == pytest.approx(0.5)
    assert heintze_karcher_envelope(1.0, [0.0], 2, math.pi / 4) == pytest.approx(0.5)


def test_hypersurface_bound_flat():
    # K = 0, lambda = 0: the bound is 0
    assert hypersurface_bound(0.0, 0.0, 3, 0.7) == pytest.approx(0.0)
    # K = 1, lambda = 0: (m-1)(-sin)/cos
    assert hypersurface_bound(1.0, 0.0, 3, 0.5) == pytest.approx(-2 * math.tan(0.5))


def test_elementary_symmetric_by_expansion():
    lam = [1.0, 2.0, 3.0]
    # coefficients of prod(1 + lam x)
    assert list(elementary_symmetric(lam)) == [1.0, 6.0, 11.0, 6.0]


def test_newton_examples():
    c = newton_chain([1.0, 1.0])
    assert c.ratios == (2.0, 2.0) and c.equality and c.monotone
    c = newton_chain([1.0, 2.0])
    # sigma_1 / sigma_2 = 3/2, then n^2 / sigma_1 = 4/3
    assert c.ratios == pytest.approx((1.5, 4 / 3))
    assert c.monotone and not c.equality
    assert newton_chain([2.0, 2.0, 2.0]).equality
    with pytest.raises(ValueError):
        newton_chain([1.0, -1.0])


@settings(max_examples=200, deadline=None)
@given(st.lists(st.floats(1e-3, 1e3), min_size=1, max_size=7))
def test_newton_chain_monotone(lam):
    assert newton_chain(lam).monotone


@pytest.mark.parametrize("K", [0.0, 0.5, 1.0])
def test_dominance_trials_small_batch(K):
    rng = np.random.Generator(np.random.PCG64(7))
    for _ in range(10):
        slack, _, lam = dominance_trial(rng, K, 3, 2)
        assert abs(np.sum(lam)) < 1e-12
        assert slack >= -1e-6
