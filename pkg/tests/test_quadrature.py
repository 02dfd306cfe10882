import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.integrate import quad

from hardylab.geometry import ModelSpace
from hardylab.quadrature import (
    QuadratureSpec,
    Refusal,
    Segment,
    gauss_rule,
    graded_breaks,
    h_tables,
    integrate_interval,
    integrate_radial,
    integrate_segments,
)


@pytest.mark.parametrize("order", [4, 8, 12])
def test_gauss_rule_exact_for_polynomials(order):
    x, w = gauss_rule(order)
    for d in range(2 * order):
        want = 0.0 if d % 2 else 2.0 / (d + 1)
        assert np.sum(w * x ** d) == pytest.approx(want, abs=1e-13)


def test_graded_breaks_geometric_at_ends():
    br = graded_breaks(0.0, 1.0, 10, 0.15)
    assert br[0] == 0.0 and br[-1] == 1.0
    assert np.all(np.diff(br) > 0)
    assert br[1] < 1e-5


@pytest.mark.parametrize("a,want", [(-0.5, 2.0), (-0.9, 10.0), (0.0, 1.0), (1.5, 0.4)])
def test_endpoint_power_singularities(a, want):
    res = integrate_interval(lambda x: x ** a, 0.0, 1.0, QuadratureSpec(rel_tol=1e-9))
    assert res.converged
    assert res.value == pytest.approx(want, rel=1e-8)


def test_log_singularity():
    res = integrate_interval(lambda x: np.log(x), 0.0, 1.0)
    assert res.value == pytest.approx(-1.0, rel=1e-8)


def test_divergent_interval_is_flagged():
    res = integrate_interval(lambda x: 1.0 / x, 0.0, 1.0)
    assert res.diverged and not res.converged


def test_radial_examples():
    res = integrate_radial(ModelSpace.euclidean_point(2), lambda t: np.ones_like(t), interval=(0.0, 1.0))
    assert res.value == pytest.approx(0.5, rel=1e-10)
    res = integrate_radial(ModelSpace.cylinder_axis(2, transverse_mass=3.0), lambda t: np.ones_like(t))
    assert res.value == pytest.approx(6.0, rel=1e-10)
    torus = ModelSpace.torus_subtorus(2, 1)
    ok = integrate_radial(torus, lambda t: t ** -0.5, interval=(0.0, 1.0))
    assert not ok.diverged and ok.value == pytest.approx(2.0, rel=1e-8)
    for l in (1.0, 1.5):
        bad = integrate_radial(torus, lambda t: t ** -l, interval=(0.0, 1.0))
        assert bad.diverged


@settings(max_examples=25, deadline=None)
@given(s1=st.floats(-3.0, 3.0), s2=st.floats(-0.8, 2.0))
def test_h_tables_match_scipy(s1, s2):
    D, L = 3.0, 1.2
    H1, H2 = h_tables(D, L, s1, s2, l=2.5)
    # independent route: w = log(D/t), t = D e^-w
    w0 = math.log(D / L)
    want1, _ = quad(lambda w: w ** s1 * math.exp(-(s2 + 1) * w), w0, math.inf, limit=200)
    want1 *= D ** (s2 + 1)
    want2, _ = quad(lambda t: math.log(D / t) ** s1 * t ** s2, L, 2.5)
    assert H1 == pytest.approx(want1, rel=1e-7)
    assert H2 == pytest.approx(want2, rel=1e-7)


def test_h_tables_examples():
    H1, H2 = h_tables(2.0, 1.0, 0.0, 0.0, 2.0)
    assert H1 == pytest.approx(1.0, rel=1e-10) and H2 == pytest.approx(1.0, rel=1e-10)
    H1, _ = h_tables(math.e, 1.0, -2.0, -1.0)
    assert H1 == pytest.approx(1.0, rel=1e-8)
    H1, _ = h_tables(math.e, 1.0, 0.0, -1.0)
    assert isinstance(H1, Refusal)
    _, H2 = h_tables(math.e, 1.0, -1.5, 0.0)
    assert isinstance(H2, Refusal)


def test_exponential_tail_in_log_radius():
    # int_{-inf}^0 e^{2y} dy = 1/2 and int_0^inf e^{-3y} dy = 1/3
    segs = [Segment(-math.inf, 0.0, "tail_left"), Segment(0.0, math.inf, "tail_right")]
    f = lambda y: np.exp(-np.abs(y) * np.where(y < 0, 2.0, 3.0))
    res = integrate_segments(f, segs, QuadratureSpec(rel_tol=1e-11))
    assert res.value == pytest.approx(0.5 + 1.0 / 3.0, rel=1e-10)


def test_very_slow_exponential_tail():
    # rate 1e-8: the tail integral is 1e8
    seg = Segment(-math.inf, 0.0, "tail_left", None, (), 1e-8)
    res = integrate_segments(lambda y: np.exp(1e-8 * y), [seg], QuadratureSpec(rel_tol=1e-10))
    assert res.value == pytest.approx(1e8, rel=1e-8)
