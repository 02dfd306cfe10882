import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from hardylab.geometry import DomainError, ModelSpace, density, laplacian_r, s_K, s_K_array

MODELS = [
    ModelSpace.euclidean_point(3),
    ModelSpace.euclidean_subspace(5, 2),
    ModelSpace.cylinder_section(2),
    ModelSpace.cylinder_axis(1),
    ModelSpace.cylinder_axis(3),
    ModelSpace.hemisphere(2),
    ModelSpace.hemisphere(4),
    ModelSpace.torus_subtorus(2, 1),
    ModelSpace.torus_subtorus(4, 1),
]


def test_density_examples():
    assert density(ModelSpace.torus_subtorus(2, 1), 0.5) == pytest.approx(1.0)
    assert density(ModelSpace.cylinder_axis(1), 0.3) == pytest.approx(1.0)
    assert density(ModelSpace.hemisphere(2), math.pi / 3) == pytest.approx(0.5, abs=1e-15)


def test_laplacian_examples():
    assert laplacian_r(ModelSpace.cylinder_section(2), 1.0) == 0.0
    assert laplacian_r(ModelSpace.hemisphere(2), math.pi / 4) == pytest.approx(-1.0)
    assert laplacian_r(ModelSpace.torus_subtorus(3, 1), 0.25) == pytest.approx(4.0)


def test_radius_ranges():
    assert ModelSpace.cylinder_axis(2).r_max == math.pi
    assert ModelSpace.hemisphere(3).r_max == math.pi / 2
    assert math.isinf(ModelSpace.cylinder_section(1).r_max)
    assert ModelSpace.torus_subtorus(2, 1).r_max < math.pi
    with pytest.raises(ValueError):
        ModelSpace.torus_subtorus(2, 1, eta=4.0)
    with pytest.raises(ValueError):
        ModelSpace("euclidean_point", 2, 2, math.inf)


@pytest.mark.parametrize("model", MODELS, ids=lambda m: m.describe())
def test_laplacian_is_log_derivative_of_density(model):
    top = min(model.r_max, 4.0)
    t = np.linspace(0.05, 0.95 * top, 40)
    h = 1e-6
    fd = (np.log(model.density(t + h)) - np.log(model.density(t - h))) / (2 * h)
    np.testing.assert_allclose(model.laplacian_r(t), fd, rtol=1e-6, atol=1e-6)


@pytest.mark.parametrize("model", MODELS, ids=lambda m: m.describe())
def test_density_small_radius_limit(model):
    t = np.array([1e-3, 1e-5])
    ratio = model.density(t) / t ** (model.k - 1)
    np.testing.assert_allclose(ratio, 1.0, rtol=1e-5)
    assert np.all(model.density(np.linspace(1e-3, 0.99 * min(model.r_max, 3.0), 50)) > 0)


@pytest.mark.parametrize("model", MODELS, ids=lambda m: m.describe())
def test_log_density_excess_and_defect(model):
    top = min(model.r_max, 4.0)
    t = np.linspace(0.01, 0.95 * top, 30)
    y = np.log(t)
    np.testing.assert_allclose(model.log_density_excess(y), np.log(model.density(t)) - (model.k - 1) * y,
                               atol=1e-12)
    np.testing.assert_allclose(model.r_laplacian_defect(y), t * model.laplacian_r(t) + 1 - model.k,
                               atol=1e-10)
    # far below the float range of r the excess stays finite
    assert np.all(np.isfinite(model.log_density_excess(np.array([-1e6, -1e12]))))


def test_domain_errors():
    with pytest.raises(DomainError):
        ModelSpace.cylinder_axis(2).density(math.pi)
    with pytest.raises(DomainError):
        ModelSpace.hemisphere(2).laplacian_r(0.0)
    with pytest.raises(DomainError):
        ModelSpace.torus_subtorus(2, 1).log_density_excess(np.log(3.5))


def test_record_round_trip():
    for model in MODELS:
        assert ModelSpace.from_record(model.to_record()) == model
    assert ModelSpace.from_record({"kind": "torus", "m": 3, "n": 1}).kind == "torus_subtorus"


def _taylor_sinh_cosh(x, terms=30):
    s = c = 0.0
    for j in range(terms):
        c += x ** (2 * j) / math.factorial(2 * j)
        s += x ** (2 * j + 1) / math.factorial(2 * j + 1)
    return s, c


def test_s_K_examples():
    assert s_K(0, 2.5) == (2.5, 1.0)
    v, d = s_K(1, math.pi / 2)
    assert v == pytest.approx(1.0) and d == pytest.approx(0.0, abs=1e-15)
    v, d = s_K(-1, 1.0)
    sv, cv = _taylor_sinh_cosh(1.0)
    assert v == pytest.approx(sv, abs=1e-12) and d == pytest.approx(cv, abs=1e-12)
    assert v == pytest.approx(1.1752011936438014)


@settings(max_examples=60, deadline=None)
@given(K=st.floats(-4, 4), t=st.floats(0.01, 2.0))
def test_s_K_solves_its_ode(K, t):
    h = 1e-4
    s0, _, dds = s_K_array(K, np.array([t]))
    sp, _, _ = s_K_array(K, np.array([t + h]))
    sm, _, _ = s_K_array(K, np.array([t - h]))
    second = (sp - 2 * s0 + sm) / h ** 2
    assert second[0] == pytest.approx(-K * s0[0], abs=1e-5 * max(1.0, abs(s0[0])))
    assert dds[0] == pytest.approx(-K * s0[0], abs=1e-12)
    v, d = s_K(K, t)
    assert v == pytest.approx(s0[0], rel=1e-12)


def test_volume_of_sphere_from_density():
    from scipy.integrate import quad

    for n in (1, 2, 3, 4):
        model = ModelSpace.cylinder_axis(n)
        got, _ = quad(lambda t: model.density(t), 0, math.pi)
        # |S^n| / |S^(n-1)|
        want = math.sqrt(math.pi) * math.gamma(n / 2) / math.gamma((n + 1) / 2)
        assert got == pytest.approx(want, rel=1e-10)
