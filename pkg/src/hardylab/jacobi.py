"""Matrix Jacobi equation along a normal geodesic and comparison envelopes.

The Jacobi tensor ``A(t)`` on the orthogonal complement of the normal
direction solves ``A'' + R(t) A = 0``.  The first ``tangent_dim`` columns
start as the identity with slope ``-W`` (W the shape operator); the
remaining normal columns start at zero with unit slope.  ``det A`` is the
radial volume density.
"""

import math
from dataclasses import dataclass

import numpy as np

from hardylab.geometry import s_K_array

RELATIVE_TOL = 1e-8
MAX_HALVINGS = 14


class NonConvergenceError(RuntimeError):
    pass


@dataclass(frozen=True)
class JacobiSystem:
    dim: int
    tangent_dim: int
    curvature: object
    weingarten: np.ndarray

    def __post_init__(self):
        if self.dim < 1 or not 0 <= self.tangent_dim <= self.dim:
            raise ValueError("need 0 <= tangent_dim <= dim and dim >= 1")
        W = np.asarray(self.weingarten, dtype=float).reshape(self.tangent_dim, self.tangent_dim)
        if not np.allclose(W, W.T, atol=1e-12):
            raise ValueError("weingarten map must be symmetric")
        object.__setattr__(self, "weingarten", W)
        if not callable(self.curvature):
            R = np.asarray(self.curvature, dtype=float).reshape(self.dim, self.dim)
            if not np.allclose(R, R.T, atol=1e-12):
                raise ValueError("curvature operator must be symmetric")
            object.__setattr__(self, "curvature", _constant(R))

    @classmethod
    def constant(cls, R, weingarten):
        R = np.atleast_2d(np.asarray(R, dtype=float))
        W = np.atleast_2d(np.asarray(weingarten, dtype=float)) if np.size(weingarten) else np.zeros((0, 0))
        return cls(R.shape[0], W.shape[0], R, W)

    def initial_state(self):
        n, d = self.tangent_dim, self.dim
        A = np.zeros((d, d))
        dA = np.zeros((d, d))
        A[:n, :n] = np.eye(n)
        dA[:n, :n] = -self.weingarten
        dA[n:, n:] = np.eye(d - n)
        return A, dA


def _constant(R):
    def curvature(t):
        return R
    curvature.matrix = R
    return curvature


@dataclass
class JacobiResult:
    t: np.ndarray
    det: np.ndarray
    log_derivative: np.ndarray
    focal_time: float
    step: float
    converged: bool
    change: float

    def det_at(self, t):
        return np.interp(t, self.t, self.det)


def _rk4_step_matrix(R, h):
    # one classical RK4 step of the linear system Y' = L Y, Y = (A, A')
    d = R.shape[0]
    L = np.block([[np.zeros((d, d)), np.eye(d)], [-R, np.zeros((d, d))]])
    hL = h * L
    I = np.eye(2 * d)
    return I + hL @ (I + hL @ (I / 2 + hL @ (I / 6 + hL / 24)))


def _rk4(sys, t_end, n_steps):
    h = t_end / n_steps
    A, dA = sys.initial_state()
    d = sys.dim
    states = np.empty((n_steps + 1, 2 * d, d))
    states[0, :d], states[0, d:] = A, dA
    R = sys.curvature
    if hasattr(R, "matrix"):
        M = _rk4_step_matrix(R.matrix, h)
        for i in range(n_steps):
            states[i + 1] = M @ states[i]
    else:
        for i in range(n_steps):
            t = i * h
            R0, Rm, R1 = R(t), R(t + 0.5 * h), R(t + h)
            k1a, k1v = dA, -R0 @ A
            k2a, k2v = dA + 0.5 * h * k1v, -Rm @ (A + 0.5 * h * k1a)
            k3a, k3v = dA + 0.5 * h * k2v, -Rm @ (A + 0.5 * h * k2a)
            k4a, k4v = dA + h * k3v, -R1 @ (A + h * k3a)
            A = A + (h / 6.0) * (k1a + 2 * k2a + 2 * k3a + k4a)
            dA = dA + (h / 6.0) * (k1v + 2 * k2v + 2 * k3v + k4v)
            states[i + 1, :d], states[i + 1, d:] = A, dA
    As, dAs = states[:, :d], states[:, d:]
    dets = np.linalg.det(As)
    logd = np.full(n_steps + 1, math.nan)
    ok = np.abs(dets) > 1e-300
    ok[0] = False
    if np.any(ok):
        logd[ok] = np.trace(np.linalg.solve(As[ok], dAs[ok]), axis1=1, axis2=2)
    return np.linspace(0.0, t_end, n_steps + 1), dets, logd


def focal_time(t, det):
    """First sign change of det after t=0, by linear interpolation; inf if none."""
    for i in range(1, len(t)):
        if det[i] <= 0:
            if i == 1:
                return float(t[1])
            d0, d1 = det[i - 1], det[i]
            return float(t[i - 1] + (t[i] - t[i - 1]) * d0 / (d0 - d1))
    return math.inf


def integrate_jacobi(sys, t_end, step, rel_tol=RELATIVE_TOL):
    """det A on a uniform grid, refined by step halving until det A(t_end) settles."""
    if not (step > 0 and t_end > 0):
        raise ValueError("step and t_end must be positive")
    n = max(1, int(math.ceil(t_end / step)))
    t, det, logd = _rk4(sys, t_end, n)
    change = math.inf
    for _ in range(MAX_HALVINGS):
        n *= 2
        t2, det2, logd2 = _rk4(sys, t_end, n)
        # near a focal zero the end value is ~0; measure against the grid sup instead
        scale = max(abs(det2[-1]), np.max(np.abs(det2)) * 1e-4, 1e-300)
        change = abs(det2[-1] - det[-1]) / scale
        t, det, logd = t2, det2, logd2
        if change <= rel_tol:
            return JacobiResult(t, det, logd, focal_time(t, det), t_end / n, True, change)
    raise NonConvergenceError(f"det A(t_end) still changes by {change:.2e} after step halving")


def heintze_karcher_envelope(K, lambdas, k, t):
    """s_K(t)^(k-1) * prod(s_K'(t) - lambda * s_K(t))."""
    s, ds, _ = s_K_array(K, t)
    out = s ** (k - 1)
    for lam in np.atleast_1d(np.asarray(lambdas, dtype=float)):
        out = out * (ds - lam * s)
    return out


def hypersurface_bound(K, lam, m, t):
    """(m-1) (s_K'' - lam s_K') / (s_K' - lam s_K), the log-derivative ceiling for hypersurfaces."""
    s, ds, dds = s_K_array(K, t)
    return (m - 1) * (dds - lam * ds) / (ds - lam * s)


def elementary_symmetric(lambdas):
    """sigma_0, ..., sigma_n of the entries."""
    sig = np.array([1.0])
    for lam in lambdas:
        sig = np.concatenate([sig, [0.0]]) + np.concatenate([[0.0], lam * sig])
    return sig


@dataclass(frozen=True)
class NewtonChain:
    ratios: tuple
    monotone: bool
    equality: bool


def newton_chain(lambdas, rtol=1e-12):
    """Ratios c(n,s) sigma_{s-1}/sigma_s for s = n..1, which must not increase."""
    lam = np.asarray(lambdas, dtype=float).ravel()
    if lam.size == 0 or np.any(~(lam > 0)):
        raise ValueError("newton_chain needs strictly positive entries")
    n = lam.size
    sig = elementary_symmetric(lam)
    ratios = []
    for s in range(n, 0, -1):
        c = n * (n - s + 1) / s
        ratios.append(c * sig[s - 1] / sig[s])
    r = np.array(ratios)
    monotone = bool(np.all(r[1:] <= r[:-1] * (1 + rtol)))
    equality = bool(np.allclose(r, r[0], rtol=rtol, atol=0))
    return NewtonChain(tuple(float(x) for x in ratios), monotone, equality)


# -- randomised comparison trials -----------------------------------------

def random_traceless(rng, n, scale=1.0):
    lam = rng.normal(0.0, scale, size=n)
    return lam - lam.mean()


def dominance_trial(rng, K, dim, tangent_dim, t_end=None, step=0.02, perturb=0.0):
    """One Heintze-Karcher comparison with a minimal submanifold.

    The curvature operator is K*I plus, when ``perturb`` > 0, a random
    positive semidefinite matrix.  Returns the smallest value of
    envelope - det A over grid points before the focal time, together with
    the focal time.
    """
    lam = random_traceless(rng, tangent_dim, 0.8) if tangent_dim else np.zeros(0)
    Q, _ = np.linalg.qr(rng.normal(size=(tangent_dim, tangent_dim))) if tangent_dim else (np.zeros((0, 0)), None)
    W = Q @ np.diag(lam) @ Q.T if tangent_dim else np.zeros((0, 0))
    W = 0.5 * (W + W.T)
    R = K * np.eye(dim)
    if perturb > 0:
        B = rng.normal(size=(dim, dim)) * perturb
        R = R + B @ B.T
    if t_end is None:
        t_end = 0.98 * math.pi / math.sqrt(K) if K > 0 else 2.0
    res = integrate_jacobi(JacobiSystem.constant(R, W), t_end, step, rel_tol=1e-9)
    env = heintze_karcher_envelope(K, lam, dim - tangent_dim + 1, res.t)
    stop = min(res.focal_time, t_end)
    mask = res.t < stop
    slack = float(np.min(env[mask] - res.det[mask]))
    return slack, res.focal_time, lam
