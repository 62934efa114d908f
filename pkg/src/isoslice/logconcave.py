"""Even s-concave and log-concave densities and the bodies they induce.

For an even density f on R^n with f(0) > 0 the functional

    ||x||_f = |x| * (integral_0^inf f(r x/|x|) r^(n+1) dr)^(-1/(n+2))

is a norm when f is log-concave on lines through the origin; its unit ball
K_f is built by :func:`body_from_density`.  Radial integrals use adaptive
Gauss-Legendre quadrature on [0, R] where R is the support radius or, for
unbounded support, a decay-based truncation point.
"""
from __future__ import annotations

import math
import threading
from dataclasses import dataclass

import numpy as np
from scipy.special import betaln, gammaln

from .convex_bodies import (
    Ball, Body, Box, CrossPolytope, Ellipsoid, _as_rows, _finish, _unit,
    geometric_distance, sphere_area,
)
from .estimate import Estimate
from .quadrature import integrate_segments
from .report import Report
from .sampling import (
    SphereQuadrature, body_sampler, isotropic_constant_density, sphere_quadrature,
    star_body_isotropic_constant, volume, _density_draw,
)

__all__ = [
    "Density", "GaugeRadialDensity", "GaussianDensity", "TriangleProductDensity",
    "FunctionDensity", "RadialProfile", "DensityBody", "BoundViolation",
    "indicator", "power", "exp_gauge", "gaussian", "triangle_product",
    "density_from_config", "density_corpus",
    "radial_moment", "gauge_f", "body_from_density", "one_dim_moment_bounds",
    "lemma_bounds", "distance_support_check", "l_equivalence_check",
    "ln_comparison_report", "busemann_check", "concavity_check", "evenness_check",
]

_ROW_BLOCK = 2048        # rows per quadrature block (bounds memory)
_TAIL_REL = 1e-18        # truncation threshold relative to the peak integrand


class BoundViolation(AssertionError):
    """A one-dimensional moment bound failed beyond rounding tolerance."""


# ---------------------------------------------------------------------------
# densities

class Density:
    """Even non-negative function on R^n with declared concavity metadata.

    ``concavity`` is one of "s-concave", "log-concave", "line-s-concave" and
    ``s`` the exponent (``math.inf`` for indicators).  Subclasses implement
    ``_eval`` on row arrays and ``sample(rng, size) -> (X, w)`` with
    ``E[w g(X)] = integral g f``.
    """

    name = "density"

    def __init__(self, dim: int, concavity: str, s: float | None = None,
                 support_body: Body | None = None):
        if concavity not in ("s-concave", "log-concave", "line-s-concave"):
            raise ValueError(f"unknown concavity class {concavity!r}")
        self.dim = int(dim)
        self.concavity = concavity
        self.s = s
        self.support_body = support_body

    # -- evaluation ----------------------------------------------------------
    def _eval(self, X):
        raise NotImplementedError

    def __call__(self, x):
        X, lead = _as_rows(x, self.dim)
        return _finish(self._eval(X), lead)

    @property
    def f0(self) -> float:
        return float(self._eval(np.zeros((1, self.dim)))[0])

    def ray(self, theta, r):
        """f(r * theta) for unit rows ``theta`` (N, n) and radii ``r`` (N, m)."""
        X = r[:, :, None] * theta[:, None, :]
        return self._eval(X.reshape(-1, self.dim)).reshape(r.shape)

    def support_radius(self, theta):
        """sup{r : f(r theta) > 0} per unit row (``inf`` if unbounded)."""
        if self.support_body is not None:
            with np.errstate(divide="ignore"):
                return 1.0 / self.support_body._gauge(theta)
        return np.full(len(theta), np.inf)

    def breakpoints(self, theta):
        """Interior radii where f is not smooth along the ray (N, j) or None."""
        return None

    @property
    def mass(self) -> float | None:
        """Closed-form integral of f when known."""
        return None

    def sample(self, rng, size):
        # default: uniform on the support body weighted by Vol * f
        if self.support_body is None:
            raise ValueError("density has no sampler and no support body")
        if not hasattr(self, "_uniform_draw"):
            self._uniform_draw = body_sampler(self.support_body)
            self._support_volume = volume(self.support_body).value
        X = self._uniform_draw(rng, size)
        return X, self._support_volume * self._eval(X)

    def to_dict(self) -> dict:
        raise TypeError(f"density {self.name!r} has no JSON form")

    def __repr__(self):
        return f"{type(self).__name__}(dim={self.dim}, {self.concavity}, s={self.s})"


class GaugeRadialDensity(Density):
    """f(x) = phi(||x||_K) for a non-increasing profile phi on [0, inf).

    ``radial_law(rng, size)`` draws u with density proportional to
    u^(n-1) phi(u); ``profile_mass`` is integral_0^inf phi(u) u^(n-1) du.
    """

    def __init__(self, K: Body, phi, radial_law, profile_mass, u_support, name,
                 concavity, s=None, params=None):
        super().__init__(K.dim, concavity, s, K if math.isfinite(u_support) and u_support == 1.0 else None)
        self.K = K
        self.phi = phi
        self.radial_law = radial_law
        self.profile_mass = float(profile_mass)
        self.u_support = float(u_support)
        self.name = name
        self.params = params or {}

    def _eval(self, X):
        return self.phi(self.K._gauge(X))

    def ray(self, theta, r):
        return self.phi(r * self.K._gauge(theta)[:, None])

    def support_radius(self, theta):
        with np.errstate(divide="ignore"):
            return self.u_support / self.K._gauge(theta)

    @property
    def mass(self):
        vol = self.K.exact_volume()
        if vol is None:
            return None
        return self.dim * vol * self.profile_mass

    def sample(self, rng, size):
        # cone-measure direction from a uniform point, radius from the profile law
        if not hasattr(self, "_uniform_draw"):
            self._uniform_draw = body_sampler(self.K)
            m = self.mass
            self._mass = m if m is not None else self.dim * volume(self.K).value * self.profile_mass
        U = self._uniform_draw(rng, size)
        U = U / self.K._gauge(U)[:, None]
        u = self.radial_law(rng, size)
        return u[:, None] * U, np.full(size, self._mass)

    def to_dict(self):
        return {"type": self.name, "body": self.K.to_dict(), **self.params}


class GaussianDensity(Density):
    """exp(-x^T A x / 2) with f(0) = 1."""

    name = "gaussian"

    def __init__(self, form):
        A = np.atleast_2d(np.asarray(form, dtype=float))
        super().__init__(A.shape[0], "log-concave")
        if not np.allclose(A, A.T) or np.any(np.linalg.eigvalsh(A) <= 0):
            raise ValueError("gaussian form must be symmetric positive definite")
        self.A = A
        self._cov_root = np.linalg.cholesky(np.linalg.inv(A))

    def _eval(self, X):
        return np.exp(-0.5 * np.einsum("ni,ij,nj->n", X, self.A, X))

    def ray(self, theta, r):
        q = np.einsum("ni,ij,nj->n", theta, self.A, theta)
        return np.exp(-0.5 * q[:, None] * r ** 2)

    @property
    def mass(self):
        return (2 * math.pi) ** (self.dim / 2) / math.sqrt(np.linalg.det(self.A))

    def sample(self, rng, size):
        Z = rng.standard_normal((size, self.dim))
        return Z @ self._cov_root.T, np.full(size, self.mass)

    def to_dict(self):
        return {"type": "gaussian", "form": self.A.tolist()}


class TriangleProductDensity(Density):
    """prod_i (1 - |x_i| / 2)_+ : the self-convolution of the cube indicator,
    normalized to f(0) = 1.  It is (1/n)-root concave, i.e. s-concave with s = n."""

    name = "triangle-product"

    def __init__(self, dim):
        super().__init__(dim, "s-concave", float(dim), Box.cube(dim, 2.0))

    def _eval(self, X):
        return np.prod(np.clip(1.0 - np.abs(X) / 2.0, 0.0, None), axis=1)

    @property
    def mass(self):
        return 2.0 ** self.dim

    def sample(self, rng, size):
        X = rng.uniform(-1, 1, (size, self.dim)) + rng.uniform(-1, 1, (size, self.dim))
        return X, np.full(size, self.mass)

    def to_dict(self):
        return {"type": "triangle-product", "dim": self.dim}


class FunctionDensity(Density):
    """Density from a vectorized evaluator, supported on ``support_body``."""

    def __init__(self, dim, evaluator, support_body, concavity, s=None, name="function",
                 ray=None, breakpoints=None):
        super().__init__(dim, concavity, s, support_body)
        self._f = evaluator
        self._ray = ray
        self._breaks = breakpoints
        self.name = name

    def _eval(self, X):
        return self._f(X)

    def ray(self, theta, r):
        if self._ray is not None:
            return self._ray(theta, r)
        return super().ray(theta, r)

    def breakpoints(self, theta):
        return None if self._breaks is None else self._breaks(theta)


# -- constructors ---------------------------------------------------------------

def indicator(K: Body) -> GaugeRadialDensity:
    n = K.dim
    return GaugeRadialDensity(
        K, lambda u: (u <= 1.0).astype(float),
        lambda rng, size: rng.uniform(size=size) ** (1.0 / n),
        1.0 / n, 1.0, "indicator", "s-concave", math.inf)


def power(K: Body, s: float) -> GaugeRadialDensity:
    """(1 - ||x||_K)_+^s, an s-concave density."""
    s = float(s)
    if s <= 0:
        raise ValueError("power exponent must be positive")
    n = K.dim
    return GaugeRadialDensity(
        K, lambda u: np.clip(1.0 - u, 0.0, None) ** s,
        lambda rng, size: rng.beta(n, s + 1.0, size=size),
        math.exp(betaln(n, s + 1.0)), 1.0, "power", "s-concave", s, {"s": s})


def exp_gauge(K: Body) -> GaugeRadialDensity:
    """exp(-||x||_K), log-concave."""
    n = K.dim
    return GaugeRadialDensity(
        K, lambda u: np.exp(-u),
        lambda rng, size: rng.gamma(n, size=size),
        math.gamma(n), math.inf, "exp-gauge", "log-concave")


def gaussian(form) -> GaussianDensity:
    return GaussianDensity(form)


def triangle_product(dim: int) -> TriangleProductDensity:
    return TriangleProductDensity(dim)


def density_from_config(cfg: dict) -> Density:
    """Build a density from its JSON configuration."""
    from .io import body_from_dict

    kind = cfg.get("type")
    if kind == "indicator":
        return indicator(body_from_dict(cfg["body"]))
    if kind == "power":
        return power(body_from_dict(cfg["body"]), cfg["s"])
    if kind == "exp-gauge":
        return exp_gauge(body_from_dict(cfg["body"]))
    if kind == "gaussian":
        return gaussian(cfg["form"])
    if kind == "triangle-product":
        return triangle_product(int(cfg["dim"]))
    raise ValueError(f"unknown density type {kind!r}")


def density_corpus(n: int) -> list[Density]:
    """Five test densities in dimension n: indicator, power, exp-gauge,
    Gaussian and triangle-product."""
    return [
        indicator(Box.cube(n)),
        power(CrossPolytope.regular(n), 2 * n),
        exp_gauge(CrossPolytope.regular(n)),
        gaussian(np.diag(np.linspace(1.0, 2.0, n))),
        triangle_product(n),
    ]


# ---------------------------------------------------------------------------
# radial integrals

def _truncation(ray, theta, k, start):
    """Radius beyond which r^(k+1) f(r theta) is negligible (doubling search)."""
    R = np.asarray(start, dtype=float).copy()
    peak = np.zeros(len(theta))
    for _ in range(80):
        vals = ray(theta, R[:, None])[:, 0] * R ** (k + 1)
        peak = np.maximum(peak, vals)
        small = vals <= _TAIL_REL * np.maximum(peak, 1e-300)
        if np.all(small & (peak > 0)):
            return R
        R = np.where(small & (peak > 0), R, 2 * R)
    raise ValueError("divergent radial integral: no decay detected")


def _radial_moments(f: Density, theta, k, tol=1e-11):
    theta = np.atleast_2d(theta)
    out = np.empty(len(theta))
    rule = getattr(f, "radial_moments", None)
    if rule is not None:
        # densities with their own radial-moment rule
        for i in range(0, len(theta), _ROW_BLOCK):
            out[i:i + _ROW_BLOCK] = rule(theta[i:i + _ROW_BLOCK], k)
        return out
    for i in range(0, len(theta), _ROW_BLOCK):
        T = theta[i:i + _ROW_BLOCK]
        R = f.support_radius(T)
        inf = ~np.isfinite(R)
        if np.any(inf):
            R = R.copy()
            R[inf] = _truncation(f.ray, T[inf], k, np.ones(int(inf.sum())))
        inner = f.breakpoints(T)
        if inner is None:
            breaks = np.column_stack([np.zeros(len(T)), R])
        else:
            inner = np.clip(np.sort(inner, axis=1), 0.0, R[:, None])
            breaks = np.column_stack([np.zeros(len(T)), inner, R])

        def integrand(rows, r, T=T):
            return f.ray(T[rows], r) * r ** k

        total, _ = integrate_segments(integrand, breaks, tol=tol)
        out[i:i + _ROW_BLOCK] = total
    return out


def radial_moment(f: Density, theta, k: int):
    """integral_0^inf f(r theta) r^k dr for unit direction(s) ``theta``."""
    if k < 0:
        raise ValueError("moment order must be non-negative")
    T, lead = _as_rows(theta, f.dim)
    return _finish(_radial_moments(f, _unit(T), k), lead)


def gauge_f(f: Density, x):
    """||x||_f; +inf where the radial integral vanishes."""
    X, lead = _as_rows(x, f.dim)
    norms = np.linalg.norm(X, axis=1)
    if np.any(norms == 0):
        raise ValueError("gauge_f requires x != 0")
    n = f.dim
    m = _radial_moments(f, X / norms[:, None], n + 1)
    with np.errstate(divide="ignore"):
        out = norms * np.where(m > 0, m, 0.0) ** (-1.0 / (n + 2))
    return _finish(out, lead)


class DensityBody(Body):
    """The convex body K_f = {x : ||x||_f <= 1}.

    Gauge values are memoized per unit direction, so repeated evaluation on a
    fixed direction set costs one quadrature per direction.
    """

    kind = "density-body"

    def __init__(self, f: Density, cache_limit: int = 500_000):
        super().__init__(f.dim)
        self.density = f
        self._cache: dict[bytes, float] = {}
        self._lock = threading.Lock()
        self._limit = cache_limit

    def _gauge(self, X):
        X = np.asarray(X, dtype=float)
        norms = np.linalg.norm(X, axis=1)
        out = np.zeros(len(X))
        nz = norms > 0
        U = X[nz] / norms[nz, None]
        keys = [u.tobytes() for u in U]
        with self._lock:
            vals = np.array([self._cache.get(k, np.nan) for k in keys])
        miss = np.isnan(vals)
        if np.any(miss):
            fresh = gauge_f(self.density, U[miss])
            vals[miss] = fresh
            with self._lock:
                if len(self._cache) + len(fresh) > self._limit:
                    self._cache.clear()
                for k, v in zip((k for k, m in zip(keys, miss) if m), fresh):
                    self._cache[k] = float(v)
        out[nz] = norms[nz] * vals
        return out

    def radial_on(self, quad: SphereQuadrature):
        return 1.0 / self._gauge(quad.points)


def body_from_density(f: Density) -> DensityBody:
    if f.f0 <= 0:
        raise ValueError("K_f needs f(0) > 0")
    return DensityBody(f)


# ---------------------------------------------------------------------------
# one-dimensional moment bounds

def lemma_bounds(n: int) -> tuple[float, float]:
    """(lower, upper) constants for the ratio of radial moments of order n+1, n-1."""
    lower = n ** ((n + 2) / n) / (n + 2)
    upper = math.exp(gammaln(n + 2) - (n + 2) / n * gammaln(n))
    return lower, upper


@dataclass
class RadialProfile:
    """A function g on [0, inf) with g(0) = 1, sampled along one direction.

    ``support`` is sup{t : g(t) > 0} (``inf`` when unbounded).  ``log_concave``
    records whether g is known to be log-concave.
    """

    g: object
    support: float = math.inf
    log_concave: bool = True
    theta: np.ndarray | None = None

    @classmethod
    def from_density(cls, f: Density, theta) -> "RadialProfile":
        T = _unit(np.atleast_2d(np.asarray(theta, dtype=float)))
        f0 = f.f0
        R = float(f.support_radius(T)[0])
        lc = f.concavity in ("s-concave", "log-concave", "line-s-concave")
        return cls(lambda t: f.ray(T, np.atleast_2d(t))[0] / f0, R, lc, T[0])

    def __call__(self, t):
        t = np.asarray(t, dtype=float)
        return np.asarray(self.g(t.ravel()), dtype=float).reshape(t.shape)

    def _ray(self, theta, r):
        return self(r)

    def moment(self, k, tol=1e-13):
        R = self.support
        if not math.isfinite(R):
            R = float(_truncation(self._ray, np.zeros((1, 1)), k, np.ones(1))[0])
        total, ok = integrate_segments(lambda rows, r: self(r) * r ** k, [[0.0, R]],
                                       tol=tol, max_level=12)
        if not ok[0]:
            raise ValueError("profile moment did not converge")
        return float(total[0])

    def samples(self, size=64):
        """Nodes, values and a monotonicity flag on [0, effective support]."""
        R = self.support if math.isfinite(self.support) else float(
            _truncation(self._ray, np.zeros((1, 1)), 0, np.ones(1))[0])
        t = np.linspace(0.0, R, size, endpoint=False)
        v = self(t)
        return t, v, bool(np.all(np.diff(v) <= 1e-12))


def one_dim_moment_bounds(g: RadialProfile, n: int, rtol: float = 1e-10):
    """(lower, ratio, upper) with ratio = m_{n+1} / m_{n-1}^{(n+2)/n}.

    Raises :class:`BoundViolation` if ratio < lower, or if g is declared
    log-concave and ratio > upper (both beyond relative ``rtol``).
    """
    if abs(float(g(np.array([0.0]))[0]) - 1.0) > 1e-12:
        raise ValueError("profile must satisfy g(0) = 1")
    hi, lo = g.moment(n + 1), g.moment(n - 1)
    if not (math.isfinite(hi) and math.isfinite(lo)) or lo <= 0:
        raise ValueError("divergent or vanishing profile moment")
    ratio = hi / lo ** ((n + 2) / n)
    lower, upper = lemma_bounds(n)
    if ratio < lower * (1 - rtol):
        raise BoundViolation(f"ratio {ratio!r} below lower bound {lower!r}")
    if g.log_concave and ratio > upper * (1 + rtol):
        raise BoundViolation(f"ratio {ratio!r} above upper bound {upper!r}")
    return lower, ratio, upper


# ---------------------------------------------------------------------------
# checks

def evenness_check(f: Density, n_points=1000, seed=0, tol=1e-10) -> bool:
    rng = np.random.default_rng(seed)
    R = _probe_radius(f)
    X = rng.uniform(-R, R, (n_points, f.dim))
    a, b = f._eval(X), f._eval(-X)
    return bool(np.all(np.abs(a - b) <= tol * np.maximum(1.0, np.abs(a))))


def _probe_radius(f: Density):
    if f.support_body is not None:
        return float(np.max(f.support_body.half_widths()))
    return 4.0 / math.sqrt(max(f.f0, 1e-300)) if not isinstance(f, GaugeRadialDensity) else \
        8.0 * float(np.max(f.K.half_widths()))


def concavity_check(f: Density, n_triples=1000, seed=0, tol=1e-8) -> Report:
    """Spot-check the declared concavity along random lines.

    Line classes use lines through the origin; s-concave and log-concave
    classes use arbitrary lines.  Only points in the support are compared.
    """
    rng = np.random.default_rng(seed)
    n, R = f.dim, _probe_radius(f)
    X = rng.uniform(-R, R, (4 * n_triples, n))
    if f.concavity == "line-s-concave":
        Y = X * rng.uniform(-1.5, 1.5, (len(X), 1))
    else:
        Y = rng.uniform(-R, R, X.shape)
    lam = rng.uniform(size=len(X))
    fx, fy = f._eval(X), f._eval(Y)
    keep = (fx > 0) & (fy > 0)
    X, Y, lam, fx, fy = X[keep][:n_triples], Y[keep][:n_triples], lam[keep][:n_triples], fx[keep][:n_triples], fy[keep][:n_triples]
    fm = f._eval((1 - lam)[:, None] * X + lam[:, None] * Y)
    s = f.s
    if f.concavity == "log-concave" or s is None:
        rhs = np.exp((1 - lam) * np.log(fx) + lam * np.log(fy))
    elif math.isinf(s):
        rhs = np.minimum(fx, fy)
    else:
        rhs = ((1 - lam) * fx ** (1 / s) + lam * fy ** (1 / s)) ** s
    bad = int(np.sum(fm < rhs * (1 - tol) - tol))
    rep = Report("concavity", f.name, {"triples": len(X), "seed": seed, "class": f.concavity, "s": s})
    rep.values["violations"] = bad
    rep.check("declared concavity", bad == 0, f"{bad} violations over {len(X)} triples")
    return rep


def busemann_check(f: Density, n_pairs=10_000, seed=0, tol=1e-8) -> Report:
    """Triangle inequality for ||.||_f on random pairs."""
    rng = np.random.default_rng(seed)
    X = rng.standard_normal((n_pairs, f.dim))
    Y = rng.standard_normal((n_pairs, f.dim))
    # include nearly parallel and nearly opposite pairs
    k = n_pairs // 10
    Y[:k] = X[:k] * rng.uniform(0.1, 3.0, (k, 1)) + 1e-3 * rng.standard_normal((k, f.dim))
    Y[k:2 * k] = -X[k:2 * k] * rng.uniform(0.1, 3.0, (k, 1)) + 1e-3 * rng.standard_normal((k, f.dim))
    gx, gy = gauge_f(f, X), gauge_f(f, Y)
    gs = gauge_f(f, X + Y)
    excess = (gs - (gx + gy)) / (gx + gy)
    bad = int(np.sum(excess > tol))
    rep = Report("thm-2.1", f.name, {"pairs": n_pairs, "seed": seed, "tol": tol})
    rep.values.update(violations=bad, max_relative_excess=float(np.max(excess)))
    rep.check("triangle inequality", bad == 0, f"{bad} violations")
    return rep


def distance_support_check(f: Density, support: Body | None = None, s: float | None = None,
                           directions=None) -> Report:
    """Distance between K_f and the support of an s-concave density with s > n.

    Records the scale-invariant distance d_G(K_f, Supp f), the fixed-scale
    containment distance (a, b >= 1), and the measured constants of the chain
    (n / (c2 s)) Supp f ⊆ K_f ⊆ (1 / c1) Supp f.
    """
    n = f.dim
    support = support or f.support_body
    if support is None:
        raise ValueError("distance check needs the support body")
    if s is None:
        s = f.s
    if s is None or f.concavity == "log-concave":
        raise ValueError("distance check needs an s-concave (or line-s-concave) density")
    s = float(min(s, 1e300))
    if not s > n:
        raise ValueError(f"distance check requires s > n (got s={s}, n={n})")
    if abs(f.f0 - 1.0) > 1e-12:
        raise ValueError("distance check requires f(0) = 1")
    Kf = body_from_density(f)
    dG = geometric_distance(Kf, support, directions)
    dC = geometric_distance(Kf, support, directions, scale_invariant=False)
    from .convex_bodies import sphere_directions
    dirs = sphere_directions(n) if directions is None else np.asarray(directions, dtype=float)
    ratio = support._gauge(dirs) / Kf._gauge(dirs)  # rho_Kf / rho_supp
    b, a = float(np.max(ratio)), float(np.min(ratio))
    c1 = 1.0 / b
    c2 = n / (s * a)
    rep = Report("lem-2.2", f.name, {"s": s, "n": n})
    rep.values.update(d_G=dG, containment_distance=dC, c1=c1, c2=c2,
                      dG_n_over_s=dG.value * n / s,
                      containment_n_over_s=dC.value * n / s)
    rep.check("inner containment", a > 0, f"K_f contains {a:.6g} Supp f")
    rep.check("outer containment", b <= 1.0 + 1e-9 + dG.std_error, f"K_f inside {b:.6g} Supp f")
    rep.check("finite distance", math.isfinite(dG.value) and math.isfinite(dC.value))
    return rep


def _Kf_constant(f: Density, quad: SphereQuadrature):
    n = f.dim
    rho = radial_moment(f, quad.points, n + 1) ** (1.0 / (n + 2))
    return star_body_isotropic_constant(rho, quad), rho


def l_equivalence_check(f: Density, n_samples=200_000, seed=0, quad: SphereQuadrature | None = None,
                        n_identity=5) -> Report:
    """Compare L_f with L_{K_f} and check the polar-coordinates identity

        integral_{K_f} <x, y>^2 dx = (1/(n+2)) integral <x, y>^2 f(x) dx

    with the left side by sphere quadrature and the right side by Monte Carlo.
    """
    n = f.dim
    quad = sphere_quadrature(n) if quad is None else quad
    Lf = isotropic_constant_density(f, n_samples, seed)
    LKf, rho = _Kf_constant(f, quad)
    ratio = LKf.value / Lf.value
    ratio_err = ratio * math.hypot(LKf.std_error / LKf.value, Lf.std_error / Lf.value)
    rep = Report("lem-2.3", f.name, {"n_samples": n_samples, "seed": seed, "quadrature": len(quad)})
    rep.values.update(L_f=Lf, L_Kf=LKf, ratio=Estimate(ratio, ratio_err, Lf.n_samples, seed))

    rng = np.random.default_rng(np.random.SeedSequence([seed, 23]))
    Y = rng.standard_normal((n_identity, n))
    X, w = _density_draw(f, n_samples, seed + 1)
    coarse = quad.coarse()
    idx = quad.coarse_index if quad.coarse_index is not None else np.arange(0, len(quad), 2)
    worst = 0.0
    for y in Y:
        dots = (quad.points @ y) ** 2
        lhs = quad.surface_area / (n + 2) * float(quad.mean(rho ** (n + 2) * dots))
        lhs_c = quad.surface_area / (n + 2) * float(coarse.mean(rho[idx] ** (n + 2) * dots[idx]))
        vals = w * (X @ y) ** 2 / (n + 2)
        rhs, se = vals.mean(), vals.std(ddof=1) / math.sqrt(len(vals))
        tol = 3 * se + abs(lhs - lhs_c)
        worst = max(worst, abs(lhs - rhs) / tol if tol > 0 else math.inf)
    rep.values["identity_worst_sigma"] = worst
    rep.check("polar identity", worst <= 1.0, f"worst deviation {worst:.3g} of tolerance")
    return rep


def ln_comparison_report(family, n_samples=200_000, seed=0, quad=None) -> Report:
    """Finite-family proxies: max L_{K_f} over the family against max L_f."""
    family = list(family)
    if not family:
        raise ValueError("empty density family")
    n = family[0].dim
    if any(f.dim != n for f in family):
        raise ValueError("all densities must share one dimension")
    parts = [l_equivalence_check(f, n_samples, seed, quad) for f in family]
    Lf = [p.values["L_f"].value for p in parts]
    LK = [p.values["L_Kf"].value for p in parts]
    ratios = [p.values["ratio"].value for p in parts]
    c = max(LK) / max(Lf)
    rep = Report("cor-2.5", ",".join(f.name for f in family), {"n": n, "seed": seed})
    rep.values.update(max_L_f=max(Lf), max_L_Kf=max(LK), ratio=c, max_single_ratio=max(ratios),
                      members=[{"name": f.name, "L_f": a, "L_Kf": b} for f, a, b in zip(family, Lf, LK)])
    rep.check("family ratio bounded by worst single ratio", c <= max(ratios) * (1 + 1e-12))
    return rep
