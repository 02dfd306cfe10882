"""Closed-form model geometries.

Every model is described through the distance ``r`` to a submanifold ``N``.
All integrals over the manifold reduce to

    transverse_mass * int_0^{r_max} F(t) * density(t) dt

where ``density`` is the Jacobian of the normal exponential map along a
normal geodesic.  The models here are homogeneous in the normal direction,
so that Jacobian does not depend on the starting point on ``N``.

Besides the plain density, each model reports ``log_density_excess(y)``,
the quantity ``log density(e^y) - (k-1) y``.  It stays bounded as
``y -> -inf`` and lets callers work with radii far below the floating
point range.
"""

import math
import warnings
from dataclasses import dataclass, field

import numpy as np

DENSITY_FLOOR = 1e-300

KINDS = (
    "euclidean_point",
    "euclidean_subspace",
    "cylinder_section",
    "cylinder_axis",
    "hemisphere",
    "torus_subtorus",
)


class DomainError(ValueError):
    """Raised when a radius falls outside the open interval (0, r_max)."""


class NearFocalWarning(RuntimeWarning):
    pass


@dataclass(frozen=True)
class ModelSpace:
    kind: str
    m: int
    n: int
    r_max: float
    transverse_mass: float = 1.0
    label: str = field(default="", compare=False)

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown model kind {self.kind!r}")
        if self.m < 1 or not 0 <= self.n <= self.m - 1:
            raise ValueError(f"need 0 <= n <= m-1, got m={self.m}, n={self.n}")
        if not self.r_max > 0:
            raise ValueError("r_max must be positive")
        if not self.transverse_mass > 0:
            raise ValueError("transverse_mass must be positive")

    # -- constructors -----------------------------------------------------
    @classmethod
    def euclidean_point(cls, m, transverse_mass=1.0):
        return cls("euclidean_point", m, 0, math.inf, transverse_mass)

    @classmethod
    def euclidean_subspace(cls, m, n, transverse_mass=1.0):
        return cls("euclidean_subspace", m, n, math.inf, transverse_mass)

    @classmethod
    def cylinder_section(cls, n, transverse_mass=1.0):
        """R x S^n around the slice {s0} x S^n; both normal rays share one mass."""
        return cls("cylinder_section", n + 1, n, math.inf, transverse_mass)

    @classmethod
    def cylinder_axis(cls, n, transverse_mass=1.0):
        """R x S^n around the line R x {w0}; r is the spherical distance to w0."""
        return cls("cylinder_axis", n + 1, 1, math.pi, transverse_mass)

    @classmethod
    def hemisphere(cls, n, transverse_mass=1.0):
        """Upper hemisphere of S^n with r the distance to the equator."""
        return cls("hemisphere", n, n - 1, math.pi / 2, transverse_mass)

    @classmethod
    def torus_subtorus(cls, m, n, eta=3.0, transverse_mass=1.0):
        """Flat torus (R/2piZ)^m around a coordinate subtorus, restricted to the tube r < eta."""
        if not 0 < eta <= math.pi:
            raise ValueError("tube radius eta must lie in (0, pi]")
        return cls("torus_subtorus", m, n, float(eta), transverse_mass)

    @classmethod
    def from_record(cls, rec):
        """Build a model from a config record {kind, m, n, eta?, transverse_mass?}."""
        kind = _KIND_ALIASES.get(rec["kind"], rec["kind"])
        mass = float(rec.get("transverse_mass", 1.0))
        m, n = rec.get("m"), rec.get("n")
        if kind == "euclidean_point":
            return cls.euclidean_point(int(m), mass)
        if kind == "euclidean_subspace":
            return cls.euclidean_subspace(int(m), int(n), mass)
        if kind == "cylinder_section":
            return cls.cylinder_section(int(n), mass)
        if kind == "cylinder_axis":
            # n alone names the sphere S^n; with m present the record is (m, n=1)
            return cls.cylinder_axis(int(m) - 1 if m is not None else int(n), mass)
        if kind == "hemisphere":
            return cls.hemisphere(int(m if m is not None else n + 1), mass)
        if kind == "torus_subtorus":
            return cls.torus_subtorus(int(m), int(n), float(rec.get("eta", 3.0)), mass)
        raise ValueError(f"unknown model kind {rec['kind']!r}")

    def to_record(self):
        rec = {"kind": self.kind, "m": self.m, "n": self.n, "transverse_mass": self.transverse_mass}
        if self.kind == "torus_subtorus":
            rec["eta"] = self.r_max
        return rec

    # -- basic data -------------------------------------------------------
    @property
    def k(self):
        return self.m - self.n

    @property
    def bounded(self):
        return math.isfinite(self.r_max)

    @property
    def is_flat(self):
        return self.kind in ("euclidean_point", "euclidean_subspace", "torus_subtorus", "cylinder_section")

    @property
    def nonneg_curvature_minimal(self):
        """True for the models with K >= 0 and a minimal (or point) submanifold."""
        return self.kind != "hemisphere"

    @property
    def mean_convex_boundary(self):
        return self.kind == "hemisphere"

    def _check(self, t):
        t = np.asarray(t, dtype=float)
        if np.any(~(t > 0)) or np.any(~(t < self.r_max)):
            raise DomainError(f"radius outside (0, {self.r_max}) for {self.kind}")
        return t

    def density(self, t):
        """Jacobian of the normal exponential map at distance t."""
        t = self._check(t)
        k = self.k
        if self.kind in ("euclidean_point", "euclidean_subspace", "torus_subtorus"):
            out = t ** (k - 1)
        elif self.kind == "cylinder_section":
            out = np.ones_like(t)
        elif self.kind == "cylinder_axis":
            out = np.sin(t) ** (self.n_sphere - 1)
            out = self._floor(out)
        else:
            out = np.cos(t) ** (self.m - 1)
        return out[()] if out.ndim == 0 else out

    def laplacian_r(self, t):
        """Laplacian of the distance function at distance t."""
        t = self._check(t)
        if self.kind in ("euclidean_point", "euclidean_subspace", "torus_subtorus"):
            out = (self.k - 1) / t
        elif self.kind == "cylinder_section":
            out = np.zeros_like(t)
        elif self.kind == "cylinder_axis":
            out = (self.n_sphere - 1) / np.tan(t)
        else:
            out = -(self.m - 1) * np.tan(t)
        return out[()] if out.ndim == 0 else out

    def log_density_derivative(self, t):
        return self.laplacian_r(t)

    def radial_density(self):
        return RadialDensity(self.density, self.log_density_derivative)

    @property
    def n_sphere(self):
        # sphere dimension of the cylinder R x S^n
        return self.m - 1

    def _floor(self, vals):
        if np.any(vals < DENSITY_FLOOR):
            warnings.warn("density below floor near the focal radius", NearFocalWarning, stacklevel=3)
            vals = np.maximum(vals, DENSITY_FLOOR)
        return vals

    def log_density_excess(self, y):
        """log density(e^y) - (k-1)*y, finite for arbitrarily negative y."""
        y = np.asarray(y, dtype=float)
        if np.any(y >= math.log(self.r_max)):
            raise DomainError(f"log-radius outside (-inf, log {self.r_max}) for {self.kind}")
        if self.kind == "cylinder_axis":
            t = np.exp(y)
            with np.errstate(divide="ignore"):
                sinc = np.sinc(t / math.pi)
                out = (self.n_sphere - 1) * np.log(sinc)
            if self.n_sphere > 1:
                # only the focal end at t = pi can fall under the floor
                logfloor = np.where(t > 1.0, math.log(DENSITY_FLOOR) - (self.k - 1) * y, -np.inf)
                if np.any(out < logfloor):
                    warnings.warn("density below floor near the focal radius", NearFocalWarning, stacklevel=2)
                    out = np.maximum(out, logfloor)
        elif self.kind == "hemisphere":
            out = (self.m - 1) * np.log(np.cos(np.exp(y)))
        else:
            out = np.zeros_like(y)
        return out

    def r_laplacian_defect(self, y):
        """r*Delta r + 1 - k at r = e^y; identically zero for the flat models."""
        y = np.asarray(y, dtype=float)
        t = np.exp(y)
        if self.kind == "cylinder_axis":
            # t cot t - 1, expanded near 0 to avoid cancellation
            with np.errstate(divide="ignore", invalid="ignore"):
                tc = np.where(t < 1e-4, -t * t / 3.0, t / np.tan(t) - 1.0)
            return (self.n_sphere - 1) * tc
        if self.kind == "hemisphere":
            return -(self.m - 1) * t * np.tan(t)
        return np.zeros_like(y)

    def describe(self):
        return self.label or f"{self.kind}(m={self.m},n={self.n})"


_KIND_ALIASES = {
    "torus": "torus_subtorus",
    "euclid": "euclidean_point",
    "euclidean": "euclidean_point",
    "point": "euclidean_point",
    "subspace": "euclidean_subspace",
    "section": "cylinder_section",
    "axis": "cylinder_axis",
}


@dataclass(frozen=True)
class RadialDensity:
    density: object
    log_derivative: object


def density(model, t):
    return model.density(t)


def laplacian_r(model, t):
    return model.laplacian_r(t)


def s_K(K, t):
    """Solution of s'' + K s = 0 with s(0)=0, s'(0)=1, and its derivative."""
    if t < 0:
        raise ValueError("t must be non-negative")
    if K == 0:
        return float(t), 1.0
    if K > 0:
        q = math.sqrt(K)
        return math.sin(q * t) / q, math.cos(q * t)
    q = math.sqrt(-K)
    return math.sinh(q * t) / q, math.cosh(q * t)


def s_K_array(K, t):
    """Vectorised s_K returning (s, s', s'')."""
    t = np.asarray(t, dtype=float)
    if K == 0:
        return t.copy(), np.ones_like(t), np.zeros_like(t)
    if K > 0:
        q = math.sqrt(K)
        s = np.sin(q * t) / q
        return s, np.cos(q * t), -K * s
    q = math.sqrt(-K)
    s = np.sinh(q * t) / q
    return s, np.cosh(q * t), -K * s
