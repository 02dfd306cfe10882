"""Hardy quotients, the improved functional and the log-weighted variants.

Profiles are radial: functions of the distance ``r`` only, so ``|grad u| =
|u'(r)|``.  Every integral is evaluated in the log-radius ``y = log r``,
where the volume element becomes ``transverse_mass * exp(k*y + excess(y)) dy``
and profiles report ``log|u|`` and ``log|r u'|``.  Working with logarithms
keeps extremizing families meaningful at radii like ``exp(-1e5)``.
"""

import math
from dataclasses import dataclass

import numpy as np

from hardylab.quadrature import QuadratureResult, QuadratureSpec, Segment, integrate_segments

INEQUALITY_ATOL = 1e-9


class DivergentIntegralError(ValueError):
    pass


class ZeroDenominatorError(ValueError):
    pass


class HypothesisError(ValueError):
    pass


@dataclass(frozen=True)
class HardyParams:
    p: float
    beta: float
    k: int

    def __post_init__(self):
        if not self.p > 1:
            raise ValueError(f"precondition p>1 violated (p={self.p})")
        if self.k < 1:
            raise ValueError("codimension k must be at least 1")

    @property
    def delta(self):
        return (self.k + self.beta) / self.p

    @property
    def p_ne_k(self):
        return self.p != self.k

    @property
    def beta_below_minus_k(self):
        return self.beta < -self.k

    @property
    def p_plus_beta_above_minus_k(self):
        return self.p + self.beta > -self.k

    def flags(self):
        return {
            "p_ne_k": self.p_ne_k,
            "beta_lt_minus_k": self.beta_below_minus_k,
            "p_plus_beta_gt_minus_k": self.p_plus_beta_above_minus_k,
        }


def sharp_constant(params):
    return abs((params.beta + params.k) / params.p) ** params.p


def remainder_constant(params):
    p, d = params.p, params.delta
    if d == 0 and p < 2:
        raise ValueError("remainder constant undefined: delta = 0 with p < 2")
    return (p - 1) / (2 * p) * abs(d) ** (p - 2)


def _safe_exp(v):
    return math.exp(v) if v < 709 else math.inf


# -- profiles ---------------------------------------------------------------

def _log_ell(logD, y):
    with np.errstate(divide="ignore", invalid="ignore"):
        return np.log(logD - y)


class RadialProfile:
    """A function of the distance r, evaluated through its logarithms.

    Subclasses provide ``log_abs(y)`` = log|u(e^y)| and
    ``log_abs_rdu(y)`` = log|r u'(r)| at r = e^y, plus the ``segments`` of
    log-radius on which those are smooth.  ``log_ratio(y)`` = log|r u'/u|
    may be overridden when it has a cancellation-free closed form.

    Profiles that behave like a power ``r^a`` also report ``power_parts``,
    a pair ``(a0, shift)`` with ``a = a0 + shift``, and the remainders
    ``log_abs_rest = log|u| - a*y`` and ``log_rdu_rest``.  Integrands combine
    the power of r before multiplying by y, so radii like exp(-1e10) keep
    full relative accuracy.
    """

    kind = "piecewise"
    support = (0.0, math.inf)
    # True when power_parts describe the exponential behaviour along tails
    power_tails = False

    def log_abs(self, y):
        raise NotImplementedError

    def log_abs_rdu(self, y):
        raise NotImplementedError

    def log_ratio(self, y):
        with np.errstate(invalid="ignore"):
            return self.log_abs_rdu(y) - self.log_abs(y)

    def power_parts(self, y):
        return 0.0, 0.0

    def log_abs_rest(self, y):
        return self.log_abs(y)

    def log_rdu_rest(self, y):
        return self.log_abs_rdu(y)

    def ratio_rel(self, y, ref):
        """(r u'/u) / ref - 1 with signs; nan where u vanishes."""
        r = np.exp(np.asarray(y, dtype=float))
        with np.errstate(divide="ignore", invalid="ignore"):
            return r * self.derivative(r) / (self.value(r) * ref) - 1.0

    def segments(self):
        raise NotImplementedError

    def value(self, r):
        r = np.asarray(r, dtype=float)
        with np.errstate(divide="ignore"):
            return self.sign(r) * np.exp(self.log_abs(np.log(r)))

    def derivative(self, r):
        r = np.asarray(r, dtype=float)
        with np.errstate(divide="ignore"):
            y = np.log(r)
            return self.derivative_sign(r) * np.exp(self.log_abs_rdu(y) - y)

    def sign(self, r):
        return np.ones_like(np.asarray(r, dtype=float))

    def derivative_sign(self, r):
        return np.ones_like(np.asarray(r, dtype=float))

    def endpoint_exponents(self):
        """Leading (power, power shift, log power) of |u| at r -> 0 and r -> inf when the support reaches them."""
        return {}

    def scaled(self, c):
        return ScaledProfile(self, c)


class ScaledProfile(RadialProfile):
    def __init__(self, base, c):
        if c == 0:
            raise ValueError("scale factor must be non-zero")
        self.base, self.c = base, float(c)
        self.support = base.support
        self.kind = base.kind
        self.power_tails = base.power_tails

    def log_abs(self, y):
        return self.base.log_abs(y) + math.log(abs(self.c))

    def log_abs_rdu(self, y):
        return self.base.log_abs_rdu(y) + math.log(abs(self.c))

    def log_ratio(self, y):
        return self.base.log_ratio(y)

    def power_parts(self, y):
        return self.base.power_parts(y)

    def log_abs_rest(self, y):
        return self.base.log_abs_rest(y) + math.log(abs(self.c))

    def log_rdu_rest(self, y):
        return self.base.log_rdu_rest(y) + math.log(abs(self.c))

    def ratio_rel(self, y, ref):
        return self.base.ratio_rel(y, ref)

    def segments(self):
        return self.base.segments()

    def sign(self, r):
        return math.copysign(1.0, self.c) * self.base.sign(r)

    def derivative_sign(self, r):
        return math.copysign(1.0, self.c) * self.base.derivative_sign(r)

    def endpoint_exponents(self):
        return self.base.endpoint_exponents()


@dataclass(frozen=True)
class PowerLogPiece:
    """C * r**a * log(D/r)**b on [r_lo, r_hi)."""
    r_lo: float
    r_hi: float
    C: float
    a: float
    b: float = 0.0


class PowerLogProfile(RadialProfile):
    """Piecewise profile built from pieces C r^a log(D/r)^b."""

    power_tails = True

    def __init__(self, pieces, D=None):
        self.pieces = tuple(pieces)
        if not self.pieces:
            raise ValueError("need at least one piece")
        for a, b in zip(self.pieces[:-1], self.pieces[1:]):
            if a.r_hi != b.r_lo:
                raise ValueError("pieces must be contiguous")
        if any(pc.b != 0 for pc in self.pieces):
            if D is None or D < self.pieces[-1].r_hi:
                raise ValueError("log pieces need D >= the outer support radius")
        self.D = D
        self.logD = math.log(D) if D is not None else None
        self.support = (self.pieces[0].r_lo, self.pieces[-1].r_hi)
        with np.errstate(divide="ignore"):
            self._ybreaks = np.log([pc.r_lo for pc in self.pieces] + [self.pieces[-1].r_hi])

    def _which(self, y):
        idx = np.searchsorted(self._ybreaks, y, side="right") - 1
        return np.clip(idx, 0, len(self.pieces) - 1)

    def _table(self, attr):
        return np.array([getattr(pc, attr) for pc in self.pieces], dtype=float)

    def _inside(self, y):
        return (y >= self._ybreaks[0]) & (y < self._ybreaks[-1])

    def power_parts(self, y):
        return self._table("a")[self._which(np.asarray(y, dtype=float))], 0.0

    def log_abs_rest(self, y):
        y = np.asarray(y, dtype=float)
        i = self._which(y)
        C, b = self._table("C")[i], self._table("b")[i]
        with np.errstate(divide="ignore", invalid="ignore"):
            out = np.log(np.abs(C)) + 0.0 * y
            if self.logD is not None:
                out = out + np.where(b != 0, b * _log_ell(self.logD, y), 0.0)
        return np.where(self._inside(y), out, -np.inf)

    def log_rdu_rest(self, y):
        return self.log_abs_rest(y) + self.log_ratio(y)

    def log_abs(self, y):
        y = np.asarray(y, dtype=float)
        return self.log_abs_rest(y) + self.power_parts(y)[0] * y

    def _ratio(self, y):
        y = np.asarray(y, dtype=float)
        i = self._which(y)
        a, b = self._table("a")[i], self._table("b")[i]
        if self.logD is None:
            return a
        with np.errstate(divide="ignore", invalid="ignore"):
            return a - np.where(b != 0, b / (self.logD - y), 0.0)

    def log_ratio(self, y):
        with np.errstate(divide="ignore"):
            return np.log(np.abs(self._ratio(y)))

    def ratio_rel(self, y, ref):
        return self._ratio(y) / ref - 1.0

    def log_abs_rdu(self, y):
        return self.log_abs(y) + self.log_ratio(y)

    def sign(self, r):
        y = np.log(np.asarray(r, dtype=float))
        return np.sign(self._table("C")[self._which(y)])

    def derivative_sign(self, r):
        y = np.log(np.asarray(r, dtype=float))
        return self.sign(r) * np.sign(self._ratio(y))

    def segments(self):
        segs = []
        for j, pc in enumerate(self.pieces):
            lo, hi = self._ybreaks[j], self._ybreaks[j + 1]
            if pc.r_lo == 0:
                kind = "logtail_left" if (pc.a == 0 and pc.b != 0) else "tail_left"
            elif math.isinf(pc.r_hi):
                kind = "tail_right"
            else:
                kind = "plain"
            segs.append(Segment(lo, hi, kind, self.D))
        return segs

    def endpoint_exponents(self):
        out = {}
        if self.pieces[0].r_lo == 0:
            out["left"] = (self.pieces[0].a, 0.0, self.pieces[0].b)
        if math.isinf(self.pieces[-1].r_hi):
            out["right"] = (self.pieces[-1].a, 0.0, self.pieces[-1].b)
        return out


MAX_LOG_LOG = 700.0


class TruncatedProfile(RadialProfile):
    """max(u - iota, 0) for a non-negative base profile; iota given by its logarithm."""

    def __init__(self, base, log_iota):
        self.base = base
        self.power_tails = base.power_tails
        self.log_iota = float(log_iota)
        self._segs = self._cut_segments()
        if not self._segs:
            raise ValueError("truncation level is not below the profile maximum: empty support")
        self.log_support = (self._segs[0].lo, self._segs[-1].hi)
        self.support = tuple(_safe_exp(v) for v in self.log_support)

    @classmethod
    def from_iota(cls, base, iota):
        if iota <= 0:
            raise ValueError("iota must be positive")
        return cls(base, math.log(iota))

    def _excess(self, y):
        return self.base.log_abs(y) - self.log_iota

    def _cut_segments(self):
        # base pieces are monotone on each segment, so the end values decide
        out = []
        for seg in self.base.segments():
            lo, hi = seg.lo, seg.hi
            lo_v = self._excess_at(seg, lo, hi, "lo")
            hi_v = self._excess_at(seg, lo, hi, "hi")
            ends = [v for v in (lo_v, hi_v) if v is not None]
            if ends and all(v <= 0 for v in ends):
                continue
            if lo_v is None:
                lo = self._find_cut(seg, far="lo")
            elif lo_v <= 0:
                lo = self._bisect(seg.lo, seg.hi)
            if hi_v is None:
                hi = self._find_cut(seg, far="hi")
            elif hi_v <= 0:
                hi = self._bisect(lo, seg.hi, decreasing=True)
            if hi > lo:
                out.append(Segment(lo, hi, seg.kind, seg.D, seg.interior))
        return out

    def _excess_at(self, seg, lo, hi, end):
        y = lo if end == "lo" else hi
        if not math.isfinite(y):
            return None
        # evaluate just inside the segment
        eps = 1e-12 * max(1.0, abs(y))
        yy = y + eps if end == "lo" else y - eps
        return float(self._excess(np.array([yy]))[0])

    def _bisect(self, a, b, decreasing=False, iters=200):
        fa = self._excess(np.array([a + 1e-12 * max(1, abs(a))]))[0]
        for _ in range(iters):
            mid = 0.5 * (a + b)
            fm = self._excess(np.array([mid]))[0]
            if (fm > 0) == (fa > 0):
                a, fa = mid, fm
            else:
                b = mid
            if b - a <= 1e-13 * max(1.0, abs(a)):
                break
        return 0.5 * (a + b)

    def _find_cut(self, seg, far):
        # walk outward from the finite end until the excess turns negative
        if far == "lo":
            near = seg.hi
            if seg.kind == "logtail_left":
                logD = math.log(seg.D)
                z0 = math.log(logD - near)
                step = 1.0
                prev = z0
                while True:
                    z = min(z0 + step, MAX_LOG_LOG)
                    if self._excess(np.array([logD - math.exp(z)]))[0] <= 0:
                        break
                    if z == MAX_LOG_LOG:
                        raise DivergentIntegralError("truncation point beyond floating point range")
                    prev = z
                    step *= 2
                lo_z, hi_z = prev, z
                for _ in range(200):
                    mid = 0.5 * (lo_z + hi_z)
                    if self._excess(np.array([logD - math.exp(mid)]))[0] > 0:
                        lo_z = mid
                    else:
                        hi_z = mid
                return logD - math.exp(hi_z)
            sgn = -1.0
        else:
            near = seg.lo
            sgn = 1.0
        step = 1.0
        while True:
            y = near + sgn * step
            if self._excess(np.array([y]))[0] <= 0:
                break
            step *= 2
            if step > 2.0 ** 62:
                raise DivergentIntegralError("profile never drops below the truncation level")
        a, b = sorted((near + sgn * step / 2, y))
        return self._bisect(a, b, decreasing=(sgn > 0))

    def _shrink(self, y):
        # log(1 - iota/u) where u > iota, -inf elsewhere
        x = self.log_iota - self.base.log_abs(y)
        with np.errstate(invalid="ignore", divide="ignore"):
            out = np.log(-np.expm1(np.minimum(x, 0.0)))
        return np.where(x < 0, out, -np.inf)

    def power_parts(self, y):
        return self.base.power_parts(y)

    def log_abs_rest(self, y):
        y = np.asarray(y, dtype=float)
        return self.base.log_abs_rest(y) + self._shrink(y)

    def log_rdu_rest(self, y):
        y = np.asarray(y, dtype=float)
        lb = self.base.log_abs(y)
        return np.where(lb > self.log_iota, self.base.log_rdu_rest(y), -np.inf)

    def log_abs(self, y):
        y = np.asarray(y, dtype=float)
        return self.base.log_abs(y) + self._shrink(y)

    def ratio_rel(self, y, ref):
        # r u'/u = (base ratio) / (1 - iota/base)
        y = np.asarray(y, dtype=float)
        x = self.log_iota - self.base.log_abs(y)
        with np.errstate(over="ignore", invalid="ignore", divide="ignore"):
            frac = np.exp(x)
            out = (self.base.ratio_rel(y, ref) + frac) / (-np.expm1(x))
        return np.where(x < 0, out, np.nan)

    def log_ratio(self, y):
        y = np.asarray(y, dtype=float)
        lb = self.base.log_abs(y)
        x = self.log_iota - lb
        with np.errstate(invalid="ignore", divide="ignore"):
            out = self.base.log_ratio(y) - np.log(-np.expm1(np.minimum(x, 0.0)))
        return np.where(x < 0, out, -np.inf)

    def log_abs_rdu(self, y):
        y = np.asarray(y, dtype=float)
        lb = self.base.log_abs(y)
        return np.where(lb > self.log_iota, self.base.log_abs_rdu(y), -np.inf)

    def derivative_sign(self, r):
        return self.base.derivative_sign(r)

    def segments(self):
        return list(self._segs)


def _bump(z):
    z = np.asarray(z, dtype=float)
    inside = np.abs(z) < 1
    q = np.where(inside, 1.0 - z * z, 1.0)
    val = np.where(inside, np.exp(1.0 - 1.0 / q), 0.0)
    dval = np.where(inside, val * (-2.0 * z / q ** 2), 0.0)
    return val, dval


class BumpProfile(RadialProfile):
    """Finite sum of smooth bumps A * exp(1 - 1/(1 - ((r-c)/w)^2))."""

    def __init__(self, centers, widths, amplitudes):
        self.centers = np.atleast_1d(np.asarray(centers, dtype=float))
        self.widths = np.atleast_1d(np.asarray(widths, dtype=float))
        self.amplitudes = np.atleast_1d(np.asarray(amplitudes, dtype=float))
        if np.any(self.centers - self.widths <= 0):
            raise ValueError("bumps must be supported away from r = 0")
        self.support = (float(np.min(self.centers - self.widths)), float(np.max(self.centers + self.widths)))

    def value(self, r):
        r = np.asarray(r, dtype=float)
        z = (r[..., None] - self.centers) / self.widths
        v, _ = _bump(z)
        return np.sum(self.amplitudes * v, axis=-1)

    def derivative(self, r):
        r = np.asarray(r, dtype=float)
        z = (r[..., None] - self.centers) / self.widths
        _, dv = _bump(z)
        return np.sum(self.amplitudes * dv / self.widths, axis=-1)

    def log_abs(self, y):
        with np.errstate(divide="ignore"):
            return np.log(np.abs(self.value(np.exp(y))))

    def log_abs_rdu(self, y):
        r = np.exp(np.asarray(y, dtype=float))
        with np.errstate(divide="ignore"):
            return np.log(np.abs(r * self.derivative(r)))

    def sign(self, r):
        return np.sign(self.value(r))

    def _kinks(self, samples=4096):
        # zeros of u and u' are where |u|^p and |u'|^p stop being smooth
        lo, hi = self.support
        r = np.linspace(lo, hi, samples + 1)[1:-1]
        out = list(self.centers)
        for g in (self.value, self.derivative):
            v = g(r)
            for i in np.flatnonzero(np.sign(v[:-1]) * np.sign(v[1:]) < 0):
                a, b = r[i], r[i + 1]
                fa = v[i]
                for _ in range(60):
                    m = 0.5 * (a + b)
                    fm = g(np.array([m]))[0]
                    if np.sign(fm) == np.sign(fa):
                        a, fa = m, fm
                    else:
                        b = m
                out.append(0.5 * (a + b))
        return out

    def segments(self):
        edges = np.concatenate([self.centers - self.widths, self.centers + self.widths, self._kinks()])
        y = np.log(np.unique(edges))
        keep = np.concatenate([[True], np.diff(y) > 1e-12 * np.maximum(1.0, np.abs(y[1:]))])
        y = y[keep]
        return [Segment(float(a), float(b), "plain", None) for a, b in zip(y[:-1], y[1:])]


class FunctionProfile(RadialProfile):
    """Profile from closed-form callables u(r), u'(r) on a support."""

    def __init__(self, u, du, support, breaks=()):
        self.u, self.du = u, du
        self.support = tuple(float(s) for s in support)
        self.breaks = tuple(sorted(breaks))

    def value(self, r):
        return self.u(np.asarray(r, dtype=float))

    def derivative(self, r):
        return self.du(np.asarray(r, dtype=float))

    def log_abs(self, y):
        r = np.exp(np.asarray(y, dtype=float))
        with np.errstate(divide="ignore", invalid="ignore"):
            out = np.log(np.abs(self.u(r)))
        return np.where(np.isfinite(out), out, -np.inf)

    def log_abs_rdu(self, y):
        r = np.exp(np.asarray(y, dtype=float))
        with np.errstate(divide="ignore", invalid="ignore"):
            out = np.log(np.abs(r * self.du(r)))
        return np.where(np.isfinite(out), out, -np.inf)

    def segments(self):
        lo, hi = self.support
        pts = [lo] + [b for b in self.breaks if lo < b < hi] + [hi]
        segs = []
        for a, b in zip(pts[:-1], pts[1:]):
            ya = math.log(a) if a > 0 else -math.inf
            yb = math.log(b) if math.isfinite(b) else math.inf
            if a == 0 and math.isinf(b):
                segs.append(Segment(-math.inf, 0.0, "tail_left"))
                segs.append(Segment(0.0, math.inf, "tail_right"))
            elif a == 0:
                segs.append(Segment(ya, yb, "tail_left"))
            elif math.isinf(b):
                segs.append(Segment(ya, yb, "tail_right"))
            else:
                segs.append(Segment(ya, yb, "plain"))
        return segs


class GridProfile(RadialProfile):
    """Nodal values on a log-spaced radius grid, linear in log r between nodes."""

    kind = "grid"

    def __init__(self, r, values):
        self.r = np.asarray(r, dtype=float)
        self.values = np.asarray(values, dtype=float)
        if self.r.ndim != 1 or self.r.shape != self.values.shape or np.any(np.diff(self.r) <= 0):
            raise ValueError("grid must be increasing and match the values")
        self.y = np.log(self.r)
        self.support = (float(self.r[0]), float(self.r[-1]))
        # centred second-order nodal derivative du/dr
        self.derivatives = np.gradient(self.values, self.r, edge_order=2)
        self._slopes = np.diff(self.values) / np.diff(self.y)

    def value(self, r):
        return np.interp(np.log(np.asarray(r, dtype=float)), self.y, self.values, left=0.0, right=0.0)

    def _cell_slope(self, y):
        i = np.clip(np.searchsorted(self.y, y, side="right") - 1, 0, len(self._slopes) - 1)
        inside = (y > self.y[0]) & (y < self.y[-1])
        return np.where(inside, self._slopes[i], 0.0)

    def log_abs(self, y):
        y = np.asarray(y, dtype=float)
        with np.errstate(divide="ignore"):
            return np.log(np.abs(np.interp(y, self.y, self.values, left=0.0, right=0.0)))

    def log_abs_rdu(self, y):
        with np.errstate(divide="ignore"):
            return np.log(np.abs(self._cell_slope(np.asarray(y, dtype=float))))

    def derivative(self, r):
        r = np.asarray(r, dtype=float)
        return self._cell_slope(np.log(r)) / r

    def segments(self):
        return [Segment(float(self.y[0]), float(self.y[-1]), "plain", None, tuple(self.y[1:-1]))]


class ZeroProfile(RadialProfile):
    support = (1.0, 1.0)

    def log_abs(self, y):
        return np.full(np.shape(y), -np.inf)

    def log_abs_rdu(self, y):
        return np.full(np.shape(y), -np.inf)

    def segments(self):
        return []


# -- integrands --------------------------------------------------------------

def _clip_segments(segs, model):
    """Restrict segments to log-radii below log r_max."""
    ymax = math.log(model.r_max) if math.isfinite(model.r_max) else math.inf
    out = []
    for s in segs:
        if s.lo >= ymax:
            continue
        if s.hi > ymax:
            if math.isinf(s.hi) or s.kind == "tail_right":
                s = Segment(s.lo, ymax, "plain" if math.isfinite(s.lo) else s.kind, s.D, s.interior)
            else:
                s = Segment(s.lo, ymax, s.kind, s.D, tuple(v for v in s.interior if v < ymax))
        out.append(s)
    return out


def _with_rate(seg, u, p, c):
    # exact exponential rate of an integrand |u|^p r^c (times slower factors) along a tail
    if seg.kind == "tail_left" and math.isfinite(seg.hi):
        y, sgn = seg.hi - 1.0, 1.0
    elif seg.kind == "tail_right" and math.isfinite(seg.lo):
        y, sgn = seg.lo + 1.0, -1.0
    else:
        return seg
    a0, sh = u.power_parts(np.array([y]))
    a0 = float(np.asarray(a0).ravel()[0])
    lam = sgn * ((p * a0 + c) + p * float(sh))
    if not lam > 0:
        return seg
    return Segment(seg.lo, seg.hi, seg.kind, seg.D, seg.interior, lam)


def _integrate(model, u, logf, spec, direct=False, power=None):
    """Integrate exp(logf(y)) (or f(y) itself when ``direct``) over the profile's segments.

    ``power`` = (p, c) says the integrand behaves like |u|^p r^c along
    tails, which fixes their exponential decay rate.
    """
    segs = _clip_segments(u.segments(), model)
    if power is not None and u.power_tails:
        segs = [_with_rate(sg, u, *power) for sg in segs]

    ymax = math.log(model.r_max) if model.bounded else math.inf

    def f(y):
        y = np.asarray(y, dtype=float)
        inside = y < ymax
        # graded nodes can round onto the outer boundary itself
        yy = np.where(inside, y, -1.0 if ymax > -1 else ymax - 1.0)
        with np.errstate(over="ignore", invalid="ignore", divide="ignore"):
            v = logf(yy)
            out = v if direct else np.exp(v)
        return np.where(np.isnan(out) | ~inside, 0.0, out)

    res = integrate_segments(f, segs, spec)
    if res.diverged:
        raise DivergentIntegralError("integral diverges: " + "; ".join(res.notes))
    return res.scaled(model.transverse_mass)


def screen_profile(model, params, u):
    """Refuse profiles whose endpoint exponents make the Hardy integrals infinite."""
    p, beta, k = params.p, params.beta, params.k
    ex = u.endpoint_exponents()
    if "left" in ex:
        a0, sh, b = ex["left"]
        e = (p * a0 + beta + k) + p * sh
        eb = p * b if a0 + sh != 0 else p * (b - 1)
        if e < 0 or (e == 0 and eb >= -1):
            raise DivergentIntegralError(
                f"profile ~ r^{a0 + sh:g} log^{b:g} near r=0 makes the (p,beta) integrals diverge (exponent {e:g})")
    if "right" in ex and not math.isfinite(model.r_max):
        a0, sh, b = ex["right"]
        e = (p * a0 + beta + k) + p * sh
        if e > 0 or (e == 0 and p * b >= -1):
            raise DivergentIntegralError(
                f"profile ~ r^{a0 + sh:g} at infinity makes the integrals diverge (exponent {e:g})")


def _pow_log(u, y, p, c, deriv=False):
    """p*log|u| + c*y (or with log|r u'|), with the power of r combined first."""
    a0, sh = u.power_parts(y)
    coef = (p * a0 + c) + p * sh
    rest = u.log_rdu_rest(y) if deriv else u.log_abs_rest(y)
    with np.errstate(invalid="ignore"):
        return coef * y + p * rest


def hardy_integrals(model, params, u, spec=None):
    """(numerator, denominator) of the weighted Hardy quotient as QuadratureResults."""
    spec = spec or QuadratureSpec()
    screen_profile(model, params, u)
    p, c = params.p, params.beta + params.k

    def num(y):
        return _pow_log(u, y, p, c, True) + model.log_density_excess(y)

    def den(y):
        return _pow_log(u, y, p, c) + model.log_density_excess(y)

    return _integrate(model, u, num, spec, power=(p, c)), _integrate(model, u, den, spec, power=(p, c))


def hardy_quotient(model, params, u, spec=None):
    """int |u'|^p r^(p+beta) dvol / int |u|^p r^beta dvol."""
    n, d = hardy_integrals(model, params, u, spec)
    if not d.value > 0:
        raise ZeroDenominatorError("denominator vanishes")
    return n.value / d.value


def convexity_gap(q, p):
    """|1+q|^p - 1 - p*q, with a binomial series for small q."""
    q = np.asarray(q, dtype=float)
    small = np.abs(q) < 1e-2
    qs = np.where(small, q, 0.0)
    series = np.zeros_like(qs)
    coef = p
    for j in range(2, 13):
        coef *= (p - j + 1) / j
        series = series + coef * qs ** j
    with np.errstate(invalid="ignore", over="ignore"):
        direct = np.abs(1 + q) ** p - 1 - p * q
    return np.where(small, series, direct)


def _improved_density(u, params, model):
    """Integrand of I[u] in log-radius, written without cancellation.

    With den = |u|^p r^(beta+k) rho/r^(k-1), tau = -delta and t = r u'/u,
    d(den)/dy = den * (p (t - tau) + rdefect) where rdefect = r Delta r + 1 - k.
    Subtracting that exact derivative leaves
        |delta|^p den F(t/tau - 1) + delta |delta|^(p-2) rdefect den,
    F(q) = |1+q|^p - 1 - p q >= 0, plus boundary values of den.
    """
    p, c, d = params.p, params.beta + params.k, params.delta

    def f(y):
        ex = model.log_density_excess(y)
        with np.errstate(over="ignore", invalid="ignore", divide="ignore"):
            num = np.exp(_pow_log(u, y, p, c, True) + ex)
            if d == 0:
                return num
            den = np.exp(_pow_log(u, y, p, c) + ex)
            q = u.ratio_rel(y, -d)
            small = np.abs(q) < 1e-2
            # far from the ground state the plain difference is harmless
            big = num - abs(d) ** p * den - p * abs(d) ** p * np.sign(q) * np.exp(
                _pow_log(u, y, p, c) + ex + np.log(np.abs(q)))
            out = np.where(small, abs(d) ** p * den * convexity_gap(np.where(small, q, 0.0), p), big)
            if not model.is_flat:
                out = out + d * abs(d) ** (p - 2) * model.r_laplacian_defect(y) * den
            out = np.where((den > 0) & np.isfinite(q), out, num)
        return out

    return f


def _improved_boundary(model, params, u):
    """-delta |delta|^(p-2) [den] over the ends of the support."""
    d, p, c = params.delta, params.p, params.beta + params.k
    if d == 0:
        return 0.0
    segs = _clip_segments(u.segments(), model)
    if not segs:
        return 0.0
    ymax = math.log(model.r_max) if model.bounded else math.inf
    total = 0.0
    for y, sgn in ((segs[-1].hi, 1.0), (segs[0].lo, -1.0)):
        if not math.isfinite(y):
            continue
        yy = np.array([min(y, np.nextafter(ymax, -math.inf))])
        with np.errstate(over="ignore", invalid="ignore", divide="ignore"):
            val = float(np.exp(_pow_log(u, yy, p, c) + model.log_density_excess(yy))[0])
        if math.isfinite(val):
            total += sgn * val
    return -d * abs(d) ** (p - 2) * total * model.transverse_mass


def improved_integrals(model, params, u, D, spec=None):
    """(I[u], remainder integral) as QuadratureResults; I[u] = numerator - sharp * denominator."""
    spec = spec or QuadratureSpec()
    if u.support[1] > D:
        raise ValueError("D must be at least the outer radius of the support")
    screen_profile(model, params, u)
    p, c = params.p, params.beta + params.k
    logD = math.log(D)
    I = _integrate(model, u, _improved_density(u, params, model), spec, direct=True, power=(p, c))
    edge = _improved_boundary(model, params, u)
    if edge:
        I = QuadratureResult(I.value + edge, I.error_estimate, I.converged, I.nodes_used, I.diverged, I.notes)

    def rem(y):
        return _pow_log(u, y, p, c) + model.log_density_excess(y) - 2.0 * _log_ell(logD, y)

    R = _integrate(model, u, rem, spec, power=(p, c))
    return I, R


def improved_functional(model, params, u, D, spec=None):
    I, R = improved_integrals(model, params, u, D, spec)
    return I.value, R.value


def remainder_integral(model, params, u, D, gamma=2.0, spec=None):
    """int |u|^p r^beta log^(-gamma)(D/r) dvol."""
    spec = spec or QuadratureSpec()
    p, c = params.p, params.beta + params.k
    logD = math.log(D)

    def rem(y):
        return _pow_log(u, y, p, c) + model.log_density_excess(y) - gamma * _log_ell(logD, y)

    return _integrate(model, u, rem, spec, power=(p, c))


# -- log-weighted Hardy -------------------------------------------------------

def log_hardy_constant(p, beta, alpha):
    """theta = [beta + 1 - (alpha-1)(p-1)] / p; the bound is |theta|^p."""
    return (beta + 1 - (alpha - 1) * (p - 1)) / p


def check_log_hardy_hypotheses(model, p, beta, alpha, D, sup_r):
    k = model.k
    if not sup_r <= D:
        raise HypothesisError(f"need sup r <= D (sup r = {sup_r:g}, D = {D:g})")
    if not (p >= k and k > 1):
        raise HypothesisError(f"need p >= k > 1 (p = {p:g}, k = {k})")
    lhs = math.log(D / sup_r) * (k - p)
    mid = (alpha - 1) * (p - 1)
    if not lhs <= mid:
        raise HypothesisError(f"need log(D/sup r)(k-p) <= (alpha-1)(p-1): {lhs:g} > {mid:g}")
    if not mid < beta + 1:
        raise HypothesisError(f"need (alpha-1)(p-1) < beta+1: {mid:g} >= {beta + 1:g}")


def log_hardy_integrals(model, p, beta, alpha, D, u, spec=None):
    spec = spec or QuadratureSpec()
    sup_r = model.r_max if math.isfinite(model.r_max) else u.support[1]
    check_log_hardy_hypotheses(model, p, beta, alpha, D, sup_r)
    logD = math.log(D)
    c = model.k - p

    def num(y):
        return (p + beta) * _log_ell(logD, y) + _pow_log(u, y, p, c, True) + model.log_density_excess(y)

    def den(y):
        return beta * _log_ell(logD, y) + _pow_log(u, y, p, c) + model.log_density_excess(y)

    return _integrate(model, u, num, spec, power=(p, c)), _integrate(model, u, den, spec, power=(p, c))


def log_hardy_quotient(model, p, beta, alpha, D, u, spec=None):
    """int log(D/r)^(p+beta) |u'|^p dvol / int log(D/r)^beta |u|^p r^(-p) dvol."""
    n, d = log_hardy_integrals(model, p, beta, alpha, D, u, spec)
    if not d.value > 0:
        raise ZeroDenominatorError("denominator vanishes")
    return n.value / d.value


# -- pointwise and integral inequality checks -------------------------------

def pointwise_sides(p, alpha, rho, grad_rho, u, grad_u):
    """Both sides of the pointwise lower bound for |grad u|^p with v = rho^(-gamma) u."""
    if p < 2 or alpha == 0 or not rho > 0:
        raise ValueError("need p >= 2, alpha != 0 and rho > 0")
    gr = np.atleast_1d(np.asarray(grad_rho, dtype=float))
    gu = np.atleast_1d(np.asarray(grad_u, dtype=float))
    gamma = alpha * (p - 1) / p
    v = rho ** (-gamma) * u
    gv = rho ** (-gamma) * gu - gamma * rho ** (-gamma - 1) * u * gr
    av = abs(v)
    grad_vp = p * av ** (p - 2) * v * gv if av > 0 else np.zeros_like(gv)
    grad_rho_a = alpha * rho ** (alpha - 1) * gr
    n_rho_a = np.linalg.norm(grad_rho_a)
    field = n_rho_a ** (p - 2) * grad_rho_a
    grad_vhalf = 0.5 * p * av ** (0.5 * p - 2) * v * gv if av > 0 else np.zeros_like(gv)
    ngr = np.linalg.norm(gr)
    lhs = np.linalg.norm(gu) ** p
    rhs = (abs(gamma) ** p * abs(u) ** p * rho ** (-p) * ngr ** p
           + ((p - 1) / p) ** (p - 1) * float(grad_vp @ field)
           + (2 / p) * abs(gamma) ** (p - 2) * rho ** ((alpha - 1) * (p - 1) + 1) * ngr ** (p - 2)
           * float(grad_vhalf @ grad_vhalf))
    return lhs, rhs


def pointwise_inequality_check(p, alpha, rho, grad_rho, u, grad_u, tol=INEQUALITY_ATOL):
    lhs, rhs = pointwise_sides(p, alpha, rho, grad_rho, u, grad_u)
    return bool(lhs >= rhs - tol * max(1.0, abs(lhs), abs(rhs)))


@dataclass
class InequalityCheck:
    lhs: float
    rhs: float
    error: float
    passed: bool


def log_integral_inequality_check(model, p, s, D, f, spec=None):
    """Both sides of the log-weighted integral inequality for a radial f."""
    spec = spec or QuadratureSpec()
    if f.support[1] > D:
        raise ValueError("need D >= the outer support radius")
    logD = math.log(D)
    coef = abs(s - 1) / p

    def first(y):
        with np.errstate(divide="ignore"):
            w = np.log(np.abs(model.r_laplacian_defect(y)))
        return _pow_log(f, y, p, 0.0) + model.log_density_excess(y) + (1 - s) * _log_ell(logD, y) + w

    def second(y):
        return _pow_log(f, y, p, 0.0, True) + model.log_density_excess(y) + (p - s) * _log_ell(logD, y)

    def third(y):
        return _pow_log(f, y, p, 0.0) + model.log_density_excess(y) - s * _log_ell(logD, y)

    if isinstance(f, ZeroProfile):
        return InequalityCheck(0.0, 0.0, 0.0, True)
    I1 = _integrate(model, f, first, spec, power=(p, 0.0))
    I2 = _integrate(model, f, second, spec, power=(p, 0.0))
    I3 = _integrate(model, f, third, spec, power=(p, 0.0))
    lhs = coef ** (p - 1) * I1.value + I2.value
    rhs = coef ** p * I3.value
    err = coef ** (p - 1) * I1.error_estimate + I2.error_estimate + coef ** p * I3.error_estimate
    return InequalityCheck(lhs, rhs, err, bool(lhs >= rhs - INEQUALITY_ATOL - err))
