import math

import numpy as np
import pytest

from hardylab.functionals import HardyParams, hardy_quotient
from hardylab.geometry import ModelSpace
from hardylab.sharpness import (
    SweepReport,
    _LogGridQuotient,
    fit_linear_limit,
    fit_loglog_slope,
    fit_power_limit,
    laplacian_check,
    make_rng,
    rayleigh_descent,
    sweep_flat_case,
    sweep_sharp_constant,
    taylor_trials,
    worker_count,
)

P2 = HardyParams(2.0, -2.0, 1)


def test_fits_recover_synthetic_limits():
    eps = np.array([2.0 ** -j for j in range(3, 10)])
    assert fit_linear_limit(eps, 0.25 + 0.5 * eps)[0] == pytest.approx(0.25, abs=1e-14)
    vals = 0.3 + 2.0 * eps ** 0.5 - 3.0 * eps
    assert fit_power_limit(eps, vals, 0.5) == pytest.approx(0.3, abs=1e-12)
    assert fit_loglog_slope(eps, 4.0 * eps ** -1.5) == pytest.approx(-1.5, abs=1e-12)


def test_sweep_report_rows():
    rep = SweepReport({}, {}, [0.1, 0.05], [0.3, 0.27], 0.25, [0.31, 0.28])
    rows = rep.rows()
    assert list(rows[0]) == ["epsilon", "quotient", "envelope", "constant", "gap"]
    assert rows[1]["gap"] == pytest.approx(0.02)


def test_short_sharp_sweep():
    model = ModelSpace.torus_subtorus(2, 1)
    ladder = tuple(2.0 ** -j for j in range(6, 11))
    rep = sweep_sharp_constant(model, P2, ladder)
    assert rep.verdicts["strictness_confirmed"] and rep.verdicts["envelope_confirmed"]
    assert rep.fitted_limit == pytest.approx(0.25, rel=1e-3)


def test_discrete_gradient_matches_finite_differences():
    model = ModelSpace.torus_subtorus(2, 1)
    x = np.linspace(math.log(3.0) - 20, math.log(3.0), 65)
    Q = _LogGridQuotient(model, HardyParams(3.0, -2.0, 1), x)
    rng = make_rng(1)
    w = rng.uniform(0.5, 1.5, size=63)
    q0, g = Q.gradient(w)
    h = 1e-6
    # central differences lose about q0 * 1e-16 / h to rounding
    noise = 100 * q0 * 1e-16 / h
    for i in (0, 10, 40, 62):
        e = np.zeros_like(w)
        e[i] = h
        fd = (Q.quotient(w + e)[0] - Q.quotient(w - e)[0]) / (2 * h)
        assert g[i] == pytest.approx(fd, rel=1e-5, abs=noise)


def test_descent_properties():
    model = ModelSpace.torus_subtorus(2, 1)
    a = rayleigh_descent(model, P2, 256)
    b = rayleigh_descent(model, P2, 256, scale=25.0)
    assert a.inf_estimate >= 0.25
    assert b.inf_estimate == pytest.approx(a.inf_estimate, rel=1e-8)
    # the returned grid profile has the reported quotient
    assert hardy_quotient(model, P2, a.profile) == pytest.approx(a.inf_estimate, rel=1e-6)
    rough = rayleigh_descent(model, P2, 256, u0=lambda r: r * (3 - r) * (1.2 + np.sin(4 * np.log(r))))
    assert rough.history[0] > 1.0
    assert rough.inf_estimate == pytest.approx(a.inf_estimate, rel=1e-4)
    assert all(y <= x for x, y in zip(rough.history, rough.history[1:]))
    with pytest.raises(ValueError):
        rayleigh_descent(model, P2, 32)


def test_flat_case_on_euclidean_ball():
    model = ModelSpace.euclidean_point(3)
    rep = sweep_flat_case(model, HardyParams(1.5, -1.5, 3))
    assert rep.fitted_limit == pytest.approx(1.0, rel=1e-3)
    with pytest.raises(ValueError):
        sweep_flat_case(ModelSpace.cylinder_axis(2), HardyParams(1.5, -1.5, 2))


def test_laplacian_and_taylor_checks():
    assert all(r["violations"] == 0 for r in laplacian_check(points=200))
    rows = taylor_trials(trials=5, seed=4)
    assert all(r["violations"] == 0 and r["frak_T"] > 0 for r in rows)


def test_worker_count_env(monkeypatch):
    monkeypatch.setenv("HARDYLAB_THREADS", "3")
    assert worker_count() == 3
    monkeypatch.setenv("HARDYLAB_THREADS", "junk")
    assert worker_count() == 1


def test_threaded_sweep_matches_serial(monkeypatch):
    model = ModelSpace.cylinder_section(1)
    ladder = tuple(2.0 ** -j for j in range(3, 7))
    serial = sweep_sharp_constant(model, P2, ladder).quotients
    monkeypatch.setenv("HARDYLAB_THREADS", "4")
    assert sweep_sharp_constant(model, P2, ladder).quotients == serial
