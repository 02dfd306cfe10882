"""Composite Gauss-Legendre quadrature for singular radial integrals.

Two entry points matter:

* ``integrate_interval`` integrates a vectorised function over a finite
  interval on a mesh that is geometrically graded toward the endpoints.
  Refinement deepens the grading and splits panels until successive values
  agree.
* ``integrate_segments`` integrates over the log-radius ``y = log t``.  Long
  or unbounded pieces are mapped to a finite interval by an exponential
  change of variables ``w = exp(-lam * |y - y_near|)`` (or the analogue in
  ``log log(D/t)``), with ``lam`` read off from the decay of the integrand.
  For ``t**(eps*p - 1)`` type integrands this is the substitution
  ``t = D * s**(1/eps)``.
"""

import math
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

GRADING_RATIO = 0.15
LEVELS_PER_REFINEMENT = 16
DIVERGENCE_FACTOR = 1e12
TAIL_DROP = 36.0
MAX_LOG_SPAN = 2.0 ** 60
MAX_LOGLOG = 690.0


@lru_cache(maxsize=None)
def gauss_rule(order):
    x, w = np.polynomial.legendre.leggauss(order)
    return x, w


@dataclass(frozen=True)
class QuadratureSpec:
    abs_tol: float = 1e-10
    rel_tol: float = 1e-8
    max_refinements: int = 8
    endpoint_grading: float = GRADING_RATIO
    order: int = 12

    def __post_init__(self):
        if not (self.abs_tol > 0 and self.rel_tol > 0):
            raise ValueError("tolerances must be strictly positive")
        if not 0 < self.endpoint_grading < 1:
            raise ValueError("endpoint_grading must lie in (0, 1)")
        if self.max_refinements < 1:
            raise ValueError("max_refinements must be at least 1")

    def tolerance(self, value):
        return max(self.abs_tol, self.rel_tol * abs(value))

    def tightened(self, factor=0.5):
        return QuadratureSpec(self.abs_tol * factor, self.rel_tol * factor, self.max_refinements + 2,
                              self.endpoint_grading, self.order)


@dataclass
class QuadratureResult:
    value: float
    error_estimate: float
    converged: bool
    nodes_used: int
    diverged: bool = False
    notes: list = field(default_factory=list)

    def __add__(self, other):
        return QuadratureResult(
            self.value + other.value,
            self.error_estimate + other.error_estimate,
            self.converged and other.converged,
            self.nodes_used + other.nodes_used,
            self.diverged or other.diverged,
            self.notes + other.notes,
        )

    def scaled(self, c):
        return QuadratureResult(c * self.value, abs(c) * self.error_estimate, self.converged,
                                self.nodes_used, self.diverged, list(self.notes))

    @classmethod
    def zero(cls):
        return cls(0.0, 0.0, True, 0)


def graded_breaks(a, b, levels, ratio, grade_left=True, grade_right=True):
    """Panel boundaries on [a, b], geometric toward the graded ends."""
    if grade_left and grade_right:
        mid = 0.5 * (a + b)
        left = graded_breaks(a, mid, levels, ratio, True, False)
        right = graded_breaks(mid, b, levels, ratio, False, True)
        return np.concatenate([left, right[1:]])
    h = b - a
    j = np.arange(levels, -1, -1)
    g = ratio ** j
    if grade_left:
        pts = a + h * g
        return np.concatenate([[a], pts])
    if grade_right:
        pts = b - h * g[::-1]
        return np.concatenate([pts, [b]])
    return np.array([a, b])


def panel_rule(breaks, subdivide, order):
    """Gauss nodes and weights on every panel, each split into equal pieces."""
    x, w = gauss_rule(order)
    lo, hi = breaks[:-1], breaks[1:]
    if subdivide > 1:
        frac = np.linspace(0.0, 1.0, subdivide + 1)
        edges = lo[:, None] + (hi - lo)[:, None] * frac[None, :]
        lo, hi = edges[:, :-1].ravel(), edges[:, 1:].ravel()
    half = 0.5 * (hi - lo)
    mid = 0.5 * (hi + lo)
    nodes = mid[:, None] + half[:, None] * x[None, :]
    weights = half[:, None] * w[None, :]
    return nodes, weights


def _fixed_rule(f, a, b, level, spec, grade_left, grade_right, interior=None):
    levels = LEVELS_PER_REFINEMENT * (level + 1)
    br = graded_breaks(a, b, levels, spec.endpoint_grading, grade_left, grade_right)
    if interior is not None and len(interior):
        br = np.unique(np.concatenate([br, np.asarray(interior, dtype=float)]))
        br = br[(br >= a) & (br <= b)]
    nodes, weights = panel_rule(br, level + 1, spec.order)
    vals = np.asarray(f(nodes.ravel()), dtype=float).reshape(nodes.shape)
    panel_sums = np.sum(vals * weights, axis=1)
    return float(np.sum(panel_sums)), nodes.size, panel_sums


def integrate_interval(f, a, b, spec=None, grade_left=True, grade_right=True, interior=None):
    """Adaptive graded composite Gauss integral of ``f`` over the finite interval [a, b]."""
    spec = spec or QuadratureSpec()
    if not (math.isfinite(a) and math.isfinite(b)):
        raise ValueError("integrate_interval needs a finite interval")
    if b <= a:
        return QuadratureResult.zero()
    used = 0
    prev = None
    first = None
    increments = []
    value = 0.0
    for level in range(spec.max_refinements):
        with np.errstate(over="ignore", invalid="ignore"):
            value, n, panels = _fixed_rule(f, a, b, level, spec, grade_left, grade_right, interior)
        used += n
        if not math.isfinite(value):
            return QuadratureResult(value, math.inf, False, used, True, ["non-finite panel sum"])
        if first is None:
            first = max(abs(value), np.max(np.abs(panels)))
        if first > 0 and abs(value) > DIVERGENCE_FACTOR * first:
            return QuadratureResult(value, math.inf, False, used, True, ["panel sums exceed divergence threshold"])
        if prev is not None:
            delta = value - prev
            increments.append(delta)
            if abs(delta) <= spec.tolerance(value):
                return QuadratureResult(value, abs(delta), True, used)
            if _looks_divergent(increments, value, spec):
                return QuadratureResult(value, math.inf, False, used, True, ["increments do not decay under refinement"])
        prev = value
    err = abs(increments[-1]) if increments else math.inf
    return QuadratureResult(value, err, False, used, False, ["refinement budget exhausted"])


def _looks_divergent(increments, value, spec):
    # a convergent singular integral gains geometrically less with every
    # extra batch of graded levels; a divergent one keeps gaining
    if len(increments) < 3:
        return False
    d = np.abs(increments[-3:])
    same_sign = np.all(np.sign(increments[-3:]) == np.sign(increments[-1]))
    return bool(same_sign and d[2] >= 0.9 * d[1] and d[1] >= 0.9 * d[0] and d[2] > spec.tolerance(value))


def integrate_radial(model, F, spec=None, interval=None):
    """transverse_mass * int_a^b F(t) density(t) dt for a model geometry."""
    spec = spec or QuadratureSpec()
    a, b = interval if interval is not None else (0.0, model.r_max)
    if not (0 <= a < b <= model.r_max):
        raise ValueError(f"interval must satisfy 0 <= a < b <= r_max, got ({a}, {b})")

    def integrand(t):
        t = np.asarray(t, dtype=float)
        out = np.zeros_like(t)
        ok = (t > 0) & (t < model.r_max)
        out[ok] = np.asarray(F(t[ok]), dtype=float) * model.density(t[ok])
        return out

    if math.isfinite(b):
        res = integrate_interval(integrand, a, b, spec, grade_left=True, grade_right=True)
    else:
        c = max(2 * a, 1.0)
        head = integrate_interval(integrand, a, c, spec, grade_left=True, grade_right=False)

        def folded(w):
            w = np.asarray(w, dtype=float)
            out = np.zeros_like(w)
            ok = w > 0
            out[ok] = integrand(c / w[ok]) * c / w[ok] ** 2
            return out

        tail = integrate_interval(folded, 0.0, 1.0, spec, grade_left=True, grade_right=False)
        res = head + tail
    return res.scaled(model.transverse_mass)


# -- log-radius engine ------------------------------------------------------

@dataclass(frozen=True)
class Segment:
    """A stretch of log-radius ``y`` between breakpoints.

    kind is one of
      'plain'         finite [lo, hi], graded at both ends
      'tail_left'     mass spread toward lo (which may be -inf), exponential map
      'tail_right'    mass spread toward hi (which may be +inf), exponential map
      'logtail_left'  decay in powers of log(D/t) toward lo, map in log log(D/t)

    ``rate``, when known, is the exponential decay rate of the integrand
    along a tail and replaces the estimate read off from samples.
    """
    lo: float
    hi: float
    kind: str = "plain"
    D: float = None
    interior: tuple = ()
    rate: float = None


def _safe_log_abs(v):
    with np.errstate(divide="ignore", invalid="ignore"):
        out = np.log(np.abs(v))
    return np.where(np.isfinite(out), out, -np.inf)


def _tail_rate(G, span_limit):
    """Decay rate of exp(G(d)) as d grows from 0; None if it never drops.

    Two estimates are combined.  The first is the average slope up to the
    first doubling distance where log|f| has dropped by TAIL_DROP.  A power
    factor d^alpha can produce that drop on its own, so the second uses
    second differences over doublings, which cancel the power exactly:
    for exp(-lam d) d^alpha, [G(d)-G(2d)] - [G(2d)-G(4d)] = -lam d.
    """
    ds = 2.0 ** np.arange(-6, 1000)
    if math.isfinite(span_limit):
        ds = np.append(ds[ds < span_limit], span_limit)
    g = G(ds)
    g0 = np.max(g[:8]) if np.any(np.isfinite(g[:8])) else -np.inf
    if not math.isfinite(g0):
        g0 = np.max(g)
    if not math.isfinite(g0):
        return None, ds[-1]
    lam1 = None
    for d, gv in zip(ds, g):
        if gv < g0 - TAIL_DROP:
            # an underflowed sample only says the drop is at least TAIL_DROP
            lam1, d1 = (g0 - max(gv, g0 - 2 * TAIL_DROP)) / d, d
            break
    if lam1 is None:
        if math.isfinite(span_limit):
            drop = max(g0 - g[-1], 0.0)
            return max(drop, 4.0) / span_limit, span_limit
        return None, ds[-1]
    n = len(ds) - (0 if not math.isfinite(span_limit) else 1)
    gg = g[:n]
    ok = np.isfinite(gg)
    with np.errstate(invalid="ignore"):
        delta = gg[:-1] - gg[1:]
    second = delta[1:] - delta[:-1]
    valid = ok[:-2] & ok[1:-1] & ok[2:] & (ds[:n - 2] >= 1.0)
    hits = np.flatnonzero(valid & (second > 1.0))
    if hits.size:
        j = hits[0]
        lam2 = second[j] / ds[j]
        if lam2 < lam1:
            return lam2, ds[j]
    return lam1, d1


def _tail_map(fd, span, spec, rate=None):
    """int_0^span fd(d) dd for an integrand decaying roughly like exp(-lam d).

    The stretch s = lam*d <= 1 is integrated directly in s, with breakpoints
    at d = 1, 2, 4, ... so that slowly varying factors (powers of d) are
    resolved; beyond it, w = exp(-s) maps the rest into (w_far, 1/e].
    """
    def G(d):
        return _safe_log_abs(fd(np.asarray(d, dtype=float)))

    lam = rate if rate else _tail_rate(G, span)[0]
    if lam is None:
        return None
    s1 = min(1.0, lam * span)
    n_kinks = max(0, int(math.ceil(math.log2(s1 / lam)))) if s1 > lam else 0
    kinks = lam * 2.0 ** np.arange(0, n_kinks)

    def h(sv):
        return fd(np.asarray(sv, dtype=float) / lam) / lam

    res = integrate_interval(h, 0.0, s1, spec, grade_left=True, grade_right=False, interior=kinks)
    if lam * span > 1.0:
        w_far = math.exp(-lam * span) if math.isfinite(span) else 0.0

        def g(w):
            w = np.asarray(w, dtype=float)
            out = np.zeros_like(w)
            ok = w > 0
            d = -np.log(w[ok]) / lam
            if math.isfinite(span):
                d = np.minimum(d, span)
            out[ok] = fd(d) / (lam * w[ok])
            return out

        res = res + integrate_interval(g, w_far, math.exp(-1.0), spec, grade_left=True, grade_right=False)
    return res


def _tail_exp(f, near, far, direction, spec, rate=None):
    # y = near + direction * d, d >= 0
    span = abs(far - near)
    res = _tail_map(lambda d: f(near + direction * d), span, spec, rate)
    if res is None:
        return QuadratureResult(math.inf, math.inf, False, 0, True, ["integrand does not decay along the tail"])
    return res


def _tail_loglog(f, near, far, D, spec):
    # z = log(log(D/t)) grows toward small t; y = log D - exp(z)
    logD = math.log(D)
    ell0 = logD - near
    if not ell0 > 0:
        raise ValueError("logtail segment must lie below log D")
    z0 = math.log(ell0)
    zfar = math.log(logD - far) if math.isfinite(far) else MAX_LOGLOG
    zfar = min(zfar, MAX_LOGLOG)
    span = zfar - z0

    def fd(d):
        ell = np.exp(z0 + np.asarray(d, dtype=float))
        return f(logD - ell) * ell

    res = _tail_map(fd, span, spec)
    if res is None:
        return QuadratureResult(math.inf, math.inf, False, 0, True, ["integrand does not decay along the log tail"])
    if not math.isfinite(far) and abs(fd(np.array([span]))[0]) * 1e16 > abs(res.value):
        res.notes.append("log tail truncated at the floating point limit")
    return res


def integrate_segments(f, segments, spec=None):
    """Sum of int f(y) dy over log-radius segments."""
    spec = spec or QuadratureSpec()
    total = QuadratureResult.zero()
    for seg in segments:
        if seg.hi <= seg.lo:
            continue
        if seg.kind == "plain":
            res = integrate_interval(f, seg.lo, seg.hi, spec, True, True, seg.interior)
        elif seg.kind == "tail_left":
            res = _tail_exp(f, seg.hi, seg.lo, -1.0, spec, seg.rate)
        elif seg.kind == "tail_right":
            res = _tail_exp(f, seg.lo, seg.hi, 1.0, spec, seg.rate)
        elif seg.kind == "logtail_left":
            res = _tail_loglog(f, seg.hi, seg.lo, seg.D, spec)
        else:
            raise ValueError(f"unknown segment kind {seg.kind!r}")
        total = total + res
    return total


# -- integral table for log weights ---------------------------------------

@dataclass(frozen=True)
class Refusal:
    reason: str

    def __bool__(self):
        return False


def h_tables(D, L, s1, s2, l=None, spec=None):
    """H1 = int_0^L log(D/t)^s1 t^s2 dt and H2 = int_L^l of the same integrand.

    Returns a pair; an entry is a ``Refusal`` when the integral is not
    finite for the given exponents.
    """
    spec = spec or QuadratureSpec(abs_tol=1e-12, rel_tol=1e-10)
    if not 0 < L < D:
        raise ValueError("need 0 < L < D")
    l = D if l is None else l
    if not L < l <= D:
        raise ValueError("need L < l <= D")
    logD = math.log(D)

    if s2 > -1 or (s1 < -1 and s2 == -1):
        # y = log t; integrand log(D/t)^s1 t^(s2+1) dy
        def f1(y):
            y = np.asarray(y, dtype=float)
            return np.exp(s1 * np.log(logD - y) + (s2 + 1) * y)

        kind = "tail_left" if s2 > -1 else "logtail_left"
        seg = Segment(-math.inf, math.log(L), kind, D)
        H1 = integrate_segments(f1, [seg], spec).value
    elif s2 < -1:
        H1 = Refusal("H1 needs s2 > -1 (or s2 = -1 with s1 < -1); here s2 < -1")
    else:
        H1 = Refusal("H1 with s2 = -1 needs s1 < -1")

    if l < D or s1 > -1:
        def f2(t):
            t = np.asarray(t, dtype=float)
            with np.errstate(divide="ignore", invalid="ignore"):
                out = np.log(D / t) ** s1 * t ** s2
            return np.where(np.isfinite(out), out, 0.0)

        H2 = integrate_interval(f2, L, l, spec, grade_left=False, grade_right=True).value
    else:
        H2 = Refusal("H2 with l = D needs s1 > -1")
    return H1, H2
