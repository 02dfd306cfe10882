"""Near-extremal profile families, J_alpha integrals and the Taylor threshold.

Three families are built here:

* the two-piece power profile ``v_eps`` with exponents ``c(eps)`` below a
  split radius and ``-c(eps/2)`` above it, whose Hardy quotient sits just
  under ``c(eps)^p``;
* its truncation ``max(v_eps - iota, 0)``;
* the cut-off power-log profile ``u_eps = phi * r^(-delta+eps) * log(D/r)^theta``
  used to test the remainder constant.
"""

import math
from dataclasses import dataclass

import numpy as np

from hardylab.functionals import (
    HardyParams,
    PowerLogPiece,
    PowerLogProfile,
    RadialProfile,
    TruncatedProfile,
    remainder_integral,
    _log_ell,
)
from hardylab.quadrature import QuadratureSpec, Segment

# depth (in units of 1/eps) of the resolved inner region of v_eps
INNER_DEPTH = 36.0
T_CAP = 10.0


# -- v_eps --------------------------------------------------------------------

@dataclass(frozen=True)
class VEpsilonFamily:
    s: float
    epsilon: float
    params: HardyParams
    r_max: float = math.inf

    def __post_init__(self):
        if not self.epsilon > 0:
            raise ValueError("epsilon must be positive")
        if not 0 < self.s < self.r_max:
            raise ValueError("split radius must lie in (0, r_max)")

    @classmethod
    def for_model(cls, model, params, epsilon):
        s = model.r_max / 2 if model.bounded else 1.0
        return cls(s, epsilon, params, model.r_max)

    @property
    def c_eps(self):
        return (abs(self.params.k + self.params.beta) + self.epsilon) / self.params.p

    @property
    def c_eps_half(self):
        return (abs(self.params.k + self.params.beta) + self.epsilon / 2) / self.params.p

    @property
    def envelope(self):
        """c(eps)^p, which strictly bounds the quotient of v_eps from above."""
        return self.c_eps ** self.params.p

    @property
    def log_iota(self):
        """log of eps times the profile value at depth INNER_DEPTH/eps below s."""
        return math.log(self.epsilon) - self.c_eps * INNER_DEPTH / self.epsilon


def v_epsilon_profile(fam):
    s, c, c2 = fam.s, fam.c_eps, fam.c_eps_half
    return PowerLogProfile([
        PowerLogPiece(0.0, s, s ** (-c), c),
        PowerLogPiece(s, fam.r_max, s ** c2, -c2),
    ])


def truncate(profile, iota=None, log_iota=None):
    """max(profile - iota, 0); iota may be passed through its logarithm."""
    if log_iota is None:
        if iota is None:
            raise ValueError("give iota or log_iota")
        if iota < 0:
            raise ValueError("iota must be non-negative")
        if iota == 0:
            return profile
        log_iota = math.log(iota)
    return TruncatedProfile(profile, log_iota)


def truncated_v_epsilon(fam):
    return truncate(v_epsilon_profile(fam), log_iota=fam.log_iota)


# -- cut-off power-log profiles ---------------------------------------------

@dataclass(frozen=True)
class CutoffSpec:
    """C^2 cutoff equal to 1 on [0, eta/2] and 0 on [eta, inf), quintic in between."""
    eta: float = 1.0

    def __post_init__(self):
        if not self.eta > 0:
            raise ValueError("cutoff radius must be positive")

    @property
    def inner(self):
        return 0.5 * self.eta

    def _z(self, r):
        return (np.asarray(r, dtype=float) - self.inner) / (self.eta - self.inner)

    def value(self, r):
        z = np.clip(self._z(r), 0.0, 1.0)
        return 1.0 - z ** 3 * (10 - 15 * z + 6 * z * z)

    def derivative(self, r):
        z = np.clip(self._z(r), 0.0, 1.0)
        return -30 * z * z * (1 - z) ** 2 / (self.eta - self.inner)

    def log_value(self, y):
        r = np.exp(np.asarray(y, dtype=float))
        z = np.clip(self._z(r), 0.0, 1.0)
        # 1 - S(z) = (1-z)^3 (1 + 3z + 6z^2)
        with np.errstate(divide="ignore"):
            return 3 * np.log1p(-z) + np.log1p(3 * z + 6 * z * z)

    def log_ratio_term(self, y):
        """r phi'/phi at r = e^y."""
        r = np.exp(np.asarray(y, dtype=float))
        z = np.clip(self._z(r), 0.0, 1.0)
        # phi'/phi = -30 z^2 / ((1-z)(1+3z+6z^2) (eta - inner))
        with np.errstate(divide="ignore", invalid="ignore"):
            out = -30 * z * z / ((1 - z) * (1 + 3 * z + 6 * z * z) * (self.eta - self.inner))
        return r * out


class CutoffPowerLogProfile(RadialProfile):
    """phi(r) * r^a * log(D/r)^b with phi a CutoffSpec."""

    power_tails = True

    def __init__(self, a, b, D, cutoff, a_shift=0.0):
        # the power is a + a_shift; keeping a small shift apart preserves its bits
        self.a0, self.a_shift = float(a), float(a_shift)
        self.a, self.b = self.a0 + self.a_shift, float(b)
        self.cutoff = cutoff
        if b != 0 and (D is None or D < cutoff.eta):
            raise ValueError("log factor needs D >= the cutoff radius")
        self.D = D
        self.logD = math.log(D) if D is not None else None
        self.support = (0.0, cutoff.eta)

    def _log_ell(self, y):
        return _log_ell(self.logD, y) if self.b != 0 else 0.0

    def power_parts(self, y):
        return self.a0, self.a_shift

    def log_abs_rest(self, y):
        y = np.asarray(y, dtype=float)
        out = self.cutoff.log_value(y) + self.b * self._log_ell(y)
        return np.where(y < math.log(self.cutoff.eta), out, -np.inf)

    def log_rdu_rest(self, y):
        return self.log_abs_rest(y) + self.log_ratio(y)

    def log_abs(self, y):
        y = np.asarray(y, dtype=float)
        return self.log_abs_rest(y) + self.a * y

    def _ratio_tail(self, y):
        y = np.asarray(y, dtype=float)
        with np.errstate(divide="ignore", invalid="ignore"):
            tail = self.a_shift - (self.b / (self.logD - y) if self.b != 0 else 0.0)
        return tail + self.cutoff.log_ratio_term(y)

    def ratio(self, y):
        """r u'/u."""
        return self.a0 + self._ratio_tail(y)

    def ratio_rel(self, y, ref):
        if self.a0 == ref:
            return self._ratio_tail(y) / ref
        return self.ratio(y) / ref - 1.0

    def log_ratio(self, y):
        with np.errstate(divide="ignore", invalid="ignore"):
            return np.log(np.abs(self.ratio(y)))

    def log_abs_rdu(self, y):
        return self.log_abs(y) + self.log_ratio(y)

    def derivative_sign(self, r):
        return np.sign(self.ratio(np.log(np.asarray(r, dtype=float))))

    def segments(self):
        lo = math.log(self.cutoff.inner)
        kind = "logtail_left" if (self.a == 0 and self.b != 0) else "tail_left"
        return [Segment(-math.inf, lo, kind, self.D), Segment(lo, math.log(self.cutoff.eta), "plain", self.D)]

    def endpoint_exponents(self):
        return {"left": (self.a0, self.a_shift, self.b)}


@dataclass(frozen=True)
class UEpsilonFamily:
    epsilon: float
    theta: float
    D: float
    params: HardyParams
    cutoff: CutoffSpec = CutoffSpec()

    def __post_init__(self):
        p = self.params.p
        if not self.epsilon > 0:
            raise ValueError("epsilon must be positive")
        if not 1 / p < self.theta < 2 / p:
            raise ValueError("theta must lie strictly inside (1/p, 2/p)")
        if not self.D >= self.cutoff.eta:
            raise ValueError("D must be at least the cutoff radius")

    @classmethod
    def default_theta(cls, params):
        return 1.5 / params.p


def u_epsilon_profile(fam):
    return CutoffPowerLogProfile(-fam.params.delta, fam.theta, fam.D, fam.cutoff, a_shift=fam.epsilon)


def j_alpha(model, alpha, epsilon, p, D, cutoff=CutoffSpec(), spec=None):
    """int phi^p r^(-k + eps p) log(D/r)^alpha dvol."""
    spec = spec or QuadratureSpec(abs_tol=1e-14, rel_tol=1e-10)
    k = model.k
    if not cutoff.eta < model.r_max or not D >= cutoff.eta:
        raise ValueError("cutoff must sit inside the model and below D")
    u = CutoffPowerLogProfile(0.0, alpha / p, D, cutoff, a_shift=epsilon)
    params = HardyParams(p, -float(k), k)
    return remainder_integral(model, params, u, D, gamma=0.0, spec=spec).value


# -- Taylor threshold ------------------------------------------------------

@dataclass(frozen=True)
class TaylorConstants:
    a: float
    frak_T: float
    cal_T: float
    p: float
    delta: float

    def quadratic(self, t):
        t = np.asarray(t, dtype=float)
        return 1 + (self.p - 1) / (self.p * self.delta) * t + self.a * t * t

    def f(self, t):
        return taylor_f(self.p, self.delta, self.a, t)

    def lower_bound(self, t):
        t = np.asarray(t, dtype=float)
        return 1 + (self.p - 1) / (2 * self.p * self.delta ** 2) * t * t


def taylor_f(p, delta, a, t):
    t = np.asarray(t, dtype=float)
    b = (p - 1) / (p * delta)
    q = 1 + b * t + a * t * t
    return p * q + t * t / delta * (b + 2 * a * t) - (p - 1) * np.abs(q) ** (p / (p - 1))


def taylor_f3(p, delta, a, t):
    """Third derivative of taylor_f."""
    t = np.asarray(t, dtype=float)
    b = (p - 1) / (p * delta)
    kap = p / (p - 1)
    q = 1 + b * t + a * t * t
    dq = b + 2 * a * t
    aq = np.abs(q)
    return 12 * a / delta - (p - 1) * (kap * (kap - 1) * (kap - 2) * aq ** (kap - 3) * dq ** 3
                                       + 6 * a * kap * (kap - 1) * aq ** (kap - 2) * dq)


def taylor_a(p, delta):
    bound = (2 - p) * (p - 1) / (6 * p * p * delta * delta)
    if delta < 0:
        return bound - 1 if p >= 2 else 0.5 * bound
    # mirrored sign condition when delta > 0
    return bound + 1 if p >= 2 else bound + 1


def taylor_threshold(params, t_cap=T_CAP, grid=20001):
    """Coefficient a, threshold frak_T and cal_T = exp(1/frak_T)."""
    p, delta = params.p, params.delta
    if delta == 0:
        raise ValueError("delta must be non-zero")
    a = taylor_a(p, delta)
    b = (p - 1) / (p * delta)

    def good(t):
        t = np.asarray(t, dtype=float)
        return (taylor_f3(p, delta, a, t) > 0) & (1 + b * t + a * t * t > 0)

    ts = np.linspace(0.0, t_cap, grid)
    ok = good(ts)
    if not ok[0]:
        raise ValueError("third derivative is not positive at t = 0")
    bad = np.flatnonzero(~ok)
    if bad.size == 0:
        T = t_cap
    else:
        lo, hi = ts[bad[0] - 1], ts[bad[0]]
        for _ in range(200):
            mid = 0.5 * (lo + hi)
            if good(mid):
                lo = mid
            else:
                hi = mid
            if hi - lo <= 1e-15 * hi:
                break
        T = lo
    if not T > 0:
        raise ValueError("no positive threshold at machine resolution")
    # a very small threshold puts exp(1/T) beyond the float range
    cal_T = math.exp(1.0 / T) if 1.0 / T < 709.0 else math.inf
    return TaylorConstants(a, T, cal_T, p, delta)
