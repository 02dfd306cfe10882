"""Sharpness experiments: extremizer sweeps, limit fits and a discrete minimizer.

Each sweep evaluates a quotient along a ladder of parameters, fits the
limit and records verdict flags.  The Rayleigh descent is an independent
route to the same infimum: it minimizes the Hardy quotient over
piecewise-linear profiles in log-radius.
"""

import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import solve_banded

from hardylab.extremizers import (
    CutoffPowerLogProfile,
    CutoffSpec,
    UEpsilonFamily,
    VEpsilonFamily,
    truncate,
    truncated_v_epsilon,
    u_epsilon_profile,
    j_alpha,
    taylor_threshold,
)
from hardylab.geometry import ModelSpace
from hardylab.jacobi import dominance_trial, newton_chain
from hardylab.functionals import (
    BumpProfile,
    GridProfile,
    HardyParams,
    PowerLogPiece,
    PowerLogProfile,
    hardy_quotient,
    improved_integrals,
    log_hardy_constant,
    log_hardy_quotient,
    pointwise_sides,
    remainder_constant,
    remainder_integral,
    sharp_constant,
)
from hardylab.quadrature import QuadratureSpec, gauss_rule

DEFAULT_LADDER = tuple(2.0 ** -j for j in range(3, 13))
# the remainder ratio converges like eps^(p theta - 1); a deep ladder is cheap in log-radius
REMAINDER_LADDER = tuple(2.0 ** -j for j in (16, 24, 32, 48, 64, 96, 128, 192, 256))
THETA_EXPONENTS = (1, 2, 3)
# three decades: 2^-4 .. 2^-14
GAMMA_LADDER = tuple(2.0 ** -j for j in range(4, 16, 2))
LOG_HARDY_LADDER = tuple(2.0 ** -j for j in range(1, 7))
TIGHT = QuadratureSpec(abs_tol=1e-300, rel_tol=1e-12, max_refinements=10)


def worker_count():
    try:
        return max(1, int(os.environ.get("HARDYLAB_THREADS", "1")))
    except ValueError:
        return 1


def _map(fn, items):
    items = list(items)
    n = worker_count()
    if n == 1 or len(items) < 2:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=n) as pool:
        return list(pool.map(fn, items))


@dataclass
class SweepReport:
    model: dict
    params: dict
    epsilons: list
    quotients: list
    constant: float
    envelopes: list = field(default_factory=list)
    remainder_quotients: list = field(default_factory=list)
    fitted_limit: float = math.nan
    fitted_slope: float = math.nan
    verdicts: dict = field(default_factory=dict)
    extra: dict = field(default_factory=dict)

    @property
    def confirmed(self):
        return all(v is True for v in self.verdicts.values())

    def rows(self):
        env = self.envelopes or [math.nan] * len(self.epsilons)
        return [
            {"epsilon": e, "quotient": q, "envelope": v, "constant": self.constant, "gap": q - self.constant}
            for e, q, v in zip(self.epsilons, self.quotients, env)
        ]

    def to_dict(self):
        return {
            "model": self.model,
            "params": self.params,
            "epsilons": list(self.epsilons),
            "quotients": list(self.quotients),
            "envelopes": list(self.envelopes),
            "remainder_quotients": list(self.remainder_quotients),
            "constant": self.constant,
            "fitted_limit": self.fitted_limit,
            "fitted_slope": self.fitted_slope,
            "verdicts": dict(self.verdicts),
            "extra": self.extra,
        }


def _params_record(params):
    return {"p": params.p, "beta": params.beta, "k": params.k}


def fit_linear_limit(x, values, last=4):
    """Intercept and slope of a straight line through the last points."""
    x = np.asarray(x, dtype=float)[-last:]
    v = np.asarray(values, dtype=float)[-last:]
    slope, intercept = np.polyfit(x, v, 1)
    return float(intercept), float(slope)


def fit_power_limit(eps, values, gamma, last=4):
    """Limit L of values = L + a eps^gamma + b eps^(2 gamma) by least squares."""
    e = np.asarray(eps, dtype=float)[-last:]
    v = np.asarray(values, dtype=float)[-last:]
    A = np.column_stack([np.ones_like(e), e ** gamma, e ** (2 * gamma)])
    coef, *_ = np.linalg.lstsq(A, v, rcond=None)
    return float(coef[0])


def fit_loglog_slope(eps, values, last=4):
    e = np.log(np.asarray(eps, dtype=float)[-last:])
    v = np.log(np.asarray(values, dtype=float)[-last:])
    return float(np.polyfit(e, v, 1)[0])


def _monotone(values):
    d = np.diff(values)
    return bool(np.all(d <= 0) or np.all(d >= 0))


# -- sharp constant -----------------------------------------------------------

def sweep_sharp_constant(model, params, ladder=DEFAULT_LADDER, spec=TIGHT, rel_tol=0.01):
    """Hardy quotients of the truncated v_eps family along an eps ladder."""
    sharp = sharp_constant(params)
    fams = [VEpsilonFamily.for_model(model, params, e) for e in ladder]
    quotients = _map(lambda f: hardy_quotient(model, params, truncated_v_epsilon(f), spec), fams)
    envelopes = [f.envelope for f in fams]
    limit, slope = fit_linear_limit(ladder, quotients)
    limit = min(limit, envelopes[-1])
    rep = SweepReport(model.to_record(), _params_record(params), list(ladder), quotients, sharp, envelopes,
                      fitted_limit=limit, fitted_slope=slope)
    strict = all(q > sharp for q in quotients)
    pinched = all(q < v for q, v in zip(quotients, envelopes))
    if not _monotone(quotients):
        rep.verdicts["sharp_constant_confirmed"] = "inconclusive"
    else:
        rep.verdicts["sharp_constant_confirmed"] = abs(limit - sharp) <= rel_tol * sharp
    rep.verdicts["strictness_confirmed"] = strict
    rep.verdicts["envelope_confirmed"] = pinched
    return rep


# -- remainder constant ------------------------------------------------------

def remainder_outer(model, cutoff=CutoffSpec()):
    # sup r over the region carrying the test profiles
    return model.r_max if model.bounded else cutoff.eta


def default_remainder_D(model, params):
    tc = taylor_threshold(params)
    return 2 * tc.cal_T * remainder_outer(model), tc


def remainder_ratio(model, params, D, theta, eps, gamma=2.0, cutoff=CutoffSpec(), spec=TIGHT):
    """I[u_eps] / R_gamma[u_eps] together with both integrals."""
    u = u_epsilon_profile(UEpsilonFamily(eps, theta, D, params, cutoff))
    I, R2 = improved_integrals(model, params, u, D, spec)
    R = R2 if gamma == 2.0 else remainder_integral(model, params, u, D, gamma, spec)
    return I.value / R.value, I, R


def sweep_remainder(model, params, D=None, theta_ladder=None, eps_ladder=REMAINDER_LADDER, spec=TIGHT,
                    rel_tol=0.05, cutoff=CutoffSpec()):
    """I[u_eps]/R_2[u_eps] on a (theta, eps) grid, extrapolated to eps -> 0 and theta -> 1/p."""
    p = params.p
    if D is None:
        D, tc = default_remainder_D(model, params)
    else:
        tc = taylor_threshold(params)
        if D < tc.cal_T * remainder_outer(model, cutoff):
            raise ValueError("D must be at least T * sup r for the improved inequality")
    if theta_ladder is None:
        theta_ladder = [(1 + 2.0 ** -j) / p for j in THETA_EXPONENTS]
    target = remainder_constant(params)
    grid = [(th, e) for th in theta_ladder for e in eps_ladder]
    vals = _map(lambda te: remainder_ratio(model, params, D, te[0], te[1], cutoff=cutoff, spec=spec)[0], grid)
    table = np.array(vals).reshape(len(theta_ladder), len(eps_ladder))
    limits = [fit_power_limit(eps_ladder, row, p * th - 1) for th, row in zip(theta_ladder, table)]
    slope, intercept = np.polyfit(theta_ladder, limits, 1)
    extrapolated = float(intercept + slope / p)
    tol = 1e-9 * max(1.0, target)
    rep = SweepReport(model.to_record(), _params_record(params), list(eps_ladder), list(table[0]), target,
                      remainder_quotients=[list(r) for r in table], fitted_limit=extrapolated,
                      fitted_slope=float(slope))
    rep.extra = {"D": D, "thetas": list(theta_ladder), "theta_limits": limits, "taylor": {
        "a": tc.a, "frak_T": float(tc.frak_T), "cal_T": tc.cal_T}}
    rep.verdicts["remainder_confirmed"] = abs(extrapolated - target) <= rel_tol * target
    rep.verdicts["strictness_confirmed"] = bool(np.all(table >= target - tol))
    return rep


def gamma_test(model, params, D=None, theta=None, eps_ladder=GAMMA_LADDER, gamma=1.5, spec=TIGHT,
               drop=10.0):
    """With a log power gamma < 2 the ratio I/R_gamma must collapse as eps -> 0."""
    if D is None:
        D, _ = default_remainder_D(model, params)
    theta = UEpsilonFamily.default_theta(params) if theta is None else theta
    vals = _map(lambda e: remainder_ratio(model, params, D, theta, e, gamma, spec=spec)[0], eps_ladder)
    decades = math.log10(eps_ladder[0] / eps_ladder[-1])
    rep = SweepReport(model.to_record(), _params_record(params), list(eps_ladder), vals, 0.0,
                      fitted_limit=vals[-1], fitted_slope=fit_loglog_slope(eps_ladder, vals))
    rep.extra = {"gamma": gamma, "theta": theta, "D": D, "decades": decades, "drop": vals[0] / vals[-1]}
    rep.verdicts["gamma_collapse_confirmed"] = bool(decades >= 3 and vals[0] / vals[-1] >= drop
                                                     and all(np.diff(vals) < 0))
    return rep


def j_alpha_sweep(model, alphas=(0.0, 0.5, 1.0), bounded_alpha=-2.0, p=2.0, D=None, ladder=DEFAULT_LADDER,
                  cutoff=CutoffSpec(), slope_tol=0.02, ratio_tol=0.05):
    D = D if D is not None else 2 * math.e * model.r_max
    out = {"slopes": {}, "values": {}, "verdicts": {}}
    for a in alphas:
        vals = [j_alpha(model, a, e, p, D, cutoff) for e in ladder]
        s = fit_loglog_slope(ladder, vals)
        out["values"][a] = vals
        out["slopes"][a] = s
        out["verdicts"][f"slope_alpha_{a:g}"] = abs(s - (-1 - a)) <= slope_tol * abs(-1 - a)
    vals = [j_alpha(model, bounded_alpha, e, p, D, cutoff) for e in ladder]
    out["values"][bounded_alpha] = vals
    ratio = vals[-1] / vals[-2]
    out["bounded_ratio"] = ratio
    out["verdicts"][f"bounded_alpha_{bounded_alpha:g}"] = abs(ratio - 1) <= ratio_tol
    return out


# -- flat case ----------------------------------------------------------------

def flat_constant(params):
    return abs((params.k - params.p) / params.p) ** params.p


def flat_cutoff(model):
    return CutoffSpec(model.r_max if model.bounded else 1.0)


def sweep_flat_case(model, params, ladder=DEFAULT_LADDER, spec=TIGHT, rel_tol=0.03):
    """Quotients of phi * r^(-delta + eps) for p < k, beta = -p on a flat model."""
    if not model.is_flat:
        raise ValueError("the flat-case sweep needs a flat model")
    const = flat_constant(params)
    cut = flat_cutoff(model)
    d = params.delta
    quotients = _map(lambda e: hardy_quotient(model, params, CutoffPowerLogProfile(-d, 0.0, None, cut, e), spec),
                     ladder)
    limit, slope = fit_linear_limit(ladder, quotients)
    rep = SweepReport(model.to_record(), _params_record(params), list(ladder), quotients, const,
                      fitted_limit=limit, fitted_slope=slope)
    rep.verdicts["flat_constant_confirmed"] = abs(limit - const) <= rel_tol * const
    rep.verdicts["strictness_confirmed"] = all(q >= const * (1 - 1e-9) for q in quotients)
    return rep


# -- log-weighted Hardy ----------------------------------------------------

LOG_TAIL_DEPTH = 600.0


def log_power_profile(D, eps, split=math.log(2.0), depth=LOG_TAIL_DEPTH):
    """(l/s)^c for l = log(D/r) <= s and (l/s)^(-c') beyond, cut off deep in the r -> 0 tail."""
    c = (1 + eps) / 2
    c2 = (1 + eps / 2) / 2
    r_split = D * math.exp(-split)
    base = PowerLogProfile([
        PowerLogPiece(0.0, r_split, split ** c2, 0.0, -c2),
        PowerLogPiece(r_split, D, split ** (-c), 0.0, c),
    ], D=D)
    z_in = min(2 * 36.0 / eps, depth)
    log_iota = -c2 * (z_in - math.log(split))
    return truncate(base, log_iota=log_iota)


def sweep_log_hardy(model, p=2.0, beta=0.0, alpha=1.0, D=None, ladder=LOG_HARDY_LADDER, spec=TIGHT, rel_tol=0.10):
    D = model.r_max if D is None else D
    theta = log_hardy_constant(p, beta, alpha)
    bound = abs(theta) ** p
    quotients = _map(lambda e: log_hardy_quotient(model, p, beta, alpha, D, log_power_profile(D, e), spec), ladder)
    rep = SweepReport(model.to_record(), {"p": p, "beta": beta, "alpha": alpha, "k": model.k}, list(ladder),
                      quotients, bound)
    rep.fitted_limit = quotients[-1]
    rep.verdicts["log_hardy_bound_confirmed"] = all(q >= bound - 1e-9 for q in quotients)
    rep.verdicts["log_hardy_approach_confirmed"] = quotients[-1] <= bound * (1 + rel_tol)
    return rep


# -- discrete Rayleigh quotient descent ----------------------------------------

@dataclass
class DescentResult:
    inf_estimate: float
    profile: GridProfile
    iterations: int
    converged: bool
    history: list


class _LogGridQuotient:
    """Hardy quotient of continuous piecewise-linear w(x), x = log r, zero at both ends."""

    def __init__(self, model, params, x, order=6):
        self.p = params.p
        self.x = x
        self.h = np.diff(x)
        gx, gw = gauss_rule(order)
        lo, hi = x[:-1], x[1:]
        self.t = 0.5 * (gx + 1)                      # local coordinate of Gauss points in [0, 1]
        xs = lo[:, None] + self.h[:, None] * self.t[None, :]
        c = params.beta + params.k
        W = np.exp(c * xs + model.log_density_excess(xs))
        self.wq = 0.5 * gw[None, :] * self.h[:, None] * W   # quadrature weights times weight function
        self.cell_mass = self.wq.sum(axis=1)

    def values(self, w):
        full = np.concatenate([[0.0], w, [0.0]])
        a, b = full[:-1], full[1:]
        return full, a[:, None] * (1 - self.t) + b[:, None] * self.t

    def quotient(self, w):
        full, wq = self.values(w)
        slope = np.diff(full) / self.h
        num = np.sum(np.abs(slope) ** self.p * self.cell_mass)
        den = np.sum(np.abs(wq) ** self.p * self.wq)
        return num / den, num, den

    def gradient(self, w):
        p = self.p
        full, wq = self.values(w)
        slope = np.diff(full) / self.h
        Q, num, den = self.quotient(w)
        gs = p * np.abs(slope) ** (p - 2) * slope * self.cell_mass / self.h   # d num / d slope_cell / h
        dnum = np.zeros_like(full)
        dnum[:-1] -= gs
        dnum[1:] += gs
        gq = p * np.abs(wq) ** (p - 2) * wq * self.wq
        dden = np.zeros_like(full)
        dden[:-1] += np.sum(gq * (1 - self.t), axis=1)
        dden[1:] += np.sum(gq * self.t, axis=1)
        g = (dnum - Q * dden) / den
        return Q, g[1:-1]

    def preconditioner(self):
        # weighted stiffness matrix in banded form
        k = self.cell_mass / self.h ** 2
        diag = k[:-1] + k[1:]
        off = -k[1:-1]
        ab = np.zeros((3, len(diag)))
        ab[0, 1:] = off
        ab[1] = diag
        ab[2, :-1] = off
        return ab


def rayleigh_descent(model, params, grid_size=1024, spec=None, length=80.0, outer=None, max_iter=4000,
                     tol=1e-11, u0=None, scale=1.0):
    """Minimize the Hardy quotient over grid profiles vanishing at both ends of a log-radius window."""
    if grid_size < 64:
        raise ValueError("grid_size must be at least 64")
    outer = outer if outer is not None else (model.r_max if model.bounded else 1.0)
    x_hi = math.log(outer)
    x = np.linspace(x_hi - length, x_hi, grid_size + 1)
    if model.bounded:
        x[-1] = x_hi
    Qf = _LogGridQuotient(model, params, x)
    xi = x[1:-1]
    if u0 is None:
        # ground-state guess |r^-delta| times the first sine mode of the window
        w = np.exp(-params.delta * (xi - x_hi)) * np.sin(math.pi * (xi - x[0]) / length)
    else:
        w = np.asarray(u0(np.exp(xi)), dtype=float)
    w = scale * w
    ab = Qf.preconditioner()
    Q, g = Qf.gradient(w)
    history = [Q]
    step = 1.0
    converged = False
    it = 0
    for it in range(1, max_iter + 1):
        d = solve_banded((1, 1), ab, -g)
        # stay on the sphere of unit denominator so the step size is meaningful
        d = d / max(np.max(np.abs(d)), 1e-300) * np.max(np.abs(w))
        while True:
            trial = w + step * d
            Qt, _, _ = Qf.quotient(trial)
            if Qt < Q:
                break
            step *= 0.5
            if step < 1e-14:
                break
        if not Qt < Q:
            converged = True
            break
        rel = (Q - Qt) / Q
        w = trial / np.max(np.abs(trial))
        Q, g = Qf.gradient(w)
        history.append(Q)
        step = min(1.0, step * 2)
        if rel < tol:
            converged = True
            break
    values = np.concatenate([[0.0], w, [0.0]])
    profile = GridProfile(np.exp(x), values)
    return DescentResult(float(Q), profile, it, converged, history)


# -- randomized property trials -----------------------------------------------

RNG_NAME = "numpy PCG64"


def make_rng(seed):
    return np.random.Generator(np.random.PCG64(seed))


def random_bump(rng, r_lo, r_hi, max_bumps=3):
    n = int(rng.integers(1, max_bumps + 1))
    span = r_hi - r_lo
    widths = rng.uniform(0.02, 0.25, size=n) * span
    centers = rng.uniform(r_lo + widths, r_hi - widths)
    amps = rng.normal(size=n)
    return BumpProfile(centers, widths, amps)


def improved_bump_trials(model, params, D=None, trials=200, seed=0, spec=None):
    """I[u] against remainder_constant * R_2[u] for random smooth bumps."""
    if D is None:
        D, _ = default_remainder_D(model, params)
    rng = make_rng(seed)
    const = remainder_constant(params)
    outer = remainder_outer(model) * (0.999 if model.bounded else 1.0)
    rows = []
    for _ in range(trials):
        u = random_bump(rng, 1e-3 * outer, outer)
        I, R = improved_integrals(model, params, u, D, spec)
        slack = I.value - const * R.value
        err = I.error_estimate + const * R.error_estimate
        rows.append({"I": I.value, "R": R.value, "slack": slack, "error": err, "ok": bool(slack >= -err)})
    return rows


def dominance_trials(trials=500, seed=0, curvatures=(0.0, 0.5, 1.0), floor=-1e-6):
    rng = make_rng(seed)
    worst = math.inf
    violations = 0
    for i in range(trials):
        K = curvatures[i % len(curvatures)]
        dim = int(rng.integers(1, 5))
        tangent = int(rng.integers(0, dim + 1))
        slack, _, _ = dominance_trial(rng, K, dim, tangent)
        worst = min(worst, slack)
        violations += slack < floor
    return {"trials": trials, "worst_slack": worst, "violations": int(violations)}


def newton_trials(trials=10000, seed=0, max_len=8):
    rng = make_rng(seed)
    violations = 0
    for _ in range(trials):
        n = int(rng.integers(1, max_len + 1))
        lam = rng.lognormal(0.0, 1.0, size=n)
        violations += not newton_chain(lam).monotone
    return {"trials": trials, "violations": int(violations)}


def laplacian_models():
    return [
        ModelSpace.euclidean_point(3),
        ModelSpace.euclidean_subspace(4, 2),
        ModelSpace.cylinder_section(2),
        ModelSpace.cylinder_axis(2),
        ModelSpace.cylinder_axis(3),
        ModelSpace.torus_subtorus(3, 1),
        ModelSpace.hemisphere(3),
    ]


def laplacian_check(models=None, points=1000):
    """laplacian_r(t) <= (k-1)/t on nonnegatively curved models, <= 0 on the hemisphere."""
    out = []
    for model in models or laplacian_models():
        top = min(model.r_max, 10.0)
        t = np.linspace(top / points, top, points, endpoint=False)
        lap = model.laplacian_r(t)
        bound = np.zeros_like(t) if model.mean_convex_boundary else (model.k - 1) / t
        bad = int(np.sum(lap > bound + 1e-12 * np.maximum(1.0, np.abs(bound))))
        out.append({"model": model.describe(), "violations": bad})
    return out


def random_admissible_params(rng):
    p = float(rng.uniform(1.2, 4.0))
    k = int(rng.integers(1, 5))
    beta = float(-k - rng.uniform(0.1, 4.0))
    return HardyParams(p, beta, k)


def taylor_trials(trials=20, seed=0, points=1000):
    rng = make_rng(seed)
    rows = []
    for _ in range(trials):
        params = random_admissible_params(rng)
        tc = taylor_threshold(params)
        t = np.linspace(0.0, tc.frak_T, points)
        gap = tc.f(t) - tc.lower_bound(t)
        bad = int(np.sum(gap < -1e-12 * np.maximum(1.0, np.abs(tc.lower_bound(t)))))
        rows.append({"p": params.p, "beta": params.beta, "k": params.k, "a": tc.a,
                     "frak_T": float(tc.frak_T), "violations": bad})
    return rows


def pointwise_trials(trials=1000, seed=0, dim=3):
    rng = make_rng(seed)
    violations = 0
    for _ in range(trials):
        p = float(rng.uniform(2.0, 5.0))
        alpha = float(rng.choice([-1, 1]) * rng.uniform(0.2, 3.0))
        rho = float(rng.uniform(0.05, 3.0))
        lhs, rhs = pointwise_sides(p, alpha, rho, rng.normal(size=dim), float(rng.normal()), rng.normal(size=dim))
        violations += lhs < rhs - 1e-9 * max(1.0, abs(lhs), abs(rhs))
    return {"trials": trials, "violations": int(violations)}
