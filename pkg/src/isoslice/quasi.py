"""Quasi-convex bodies given as finite unions of symmetric convex pieces.

A union K of pieces has radial function max_i rho_i and convex hull with
support function max_i h_i.  The perturbing density is radial along rays:

    F(x) = 1                                          |x| <= sqrt(n)
         = (1 - (|x| - sqrt(n)) / (M_x - sqrt(n)))^(alpha n)   sqrt(n) < |x| <= M_x
         = 0                                          beyond,

with M_x the radial function of conv(K) in the direction of x.
"""
from __future__ import annotations

import itertools
import math

import numpy as np
from scipy.special import betaln, comb

from .constants import CONSTANTS
from .convex_bodies import (
    Ball, Body, Ellipsoid, HPolytope, Intersection, LinearMap, SupportBody, VPolytope,
    apply_linear, geometric_distance, sphere_area, sphere_directions, unit_ball_volume,
    _as_rows, _finish, _grid_step, _sphere_argmax, _unit,
)
from .estimate import Estimate
from .logconcave import Density, body_from_density
from .pipeline import PerturbationResult
from .quadrature import integrate_segments
from .report import Report
from .sampling import (
    isotropic_constant_density, norm_functionals, sphere_quadrature,
    star_body_isotropic_constant, volume, _map_chunks,
)

__all__ = [
    "QuasiBody", "UnionBody", "QuasiDensity", "quasi_radial", "one_dim_tail_bound",
    "tail_integral_exact", "build_F_quasi", "quasi_tail_mass_check", "m_ellipsoid_surrogate",
    "quasi_L_bound_check", "quasi_perturb", "tail_constant_grid",
]


class UnionBody(Body):
    """Star body given by the union of convex pieces (gauge = min of gauges)."""

    kind = "union"

    def __init__(self, pieces):
        super().__init__(pieces[0].dim)
        self.pieces = tuple(pieces)

    def _gauge(self, X):
        return np.min([p._gauge(X) for p in self.pieces], axis=0)

    def half_widths(self):
        return np.max([p.half_widths() for p in self.pieces], axis=0)


def _hull_of(pieces) -> Body:
    if len(pieces) == 1:
        return pieces[0]
    V = [p.vertices() for p in pieces]
    if all(v is not None for v in V):
        return VPolytope(np.concatenate(V), symmetrize=False)
    return SupportBody(pieces[0].dim, lambda T: np.max([p._support(T) for p in pieces], axis=0))


def _polytope_intersection(bodies):
    F = [b.facets() for b in bodies]
    if any(f is None for f in F):
        return None
    return HPolytope(np.concatenate([f[0] for f in F]), np.concatenate([f[1] for f in F]))


class QuasiBody:
    """Union of centrally symmetric convex pieces with quasi-convexity constant C.

    If ``C`` is omitted it is measured as max over directions of
    radial(hull) / radial(union), refined by local search.
    """

    def __init__(self, pieces, C: float | None = None, label: str = ""):
        pieces = list(pieces)
        if not pieces:
            raise ValueError("a quasi-body needs at least one piece")
        dims = {p.dim for p in pieces}
        if len(dims) != 1:
            raise ValueError("pieces must share one dimension")
        self.dim = dims.pop()
        self.pieces = pieces
        self.union = UnionBody(pieces)
        self.hull = _hull_of(pieces)
        self.label = label
        measured = self.measured_constant()
        if C is None:
            C = measured
        elif measured > C * (1 + 1e-6):
            raise ValueError(f"declared constant {C} is below the measured containment ratio {measured:.6g}")
        self.C = float(max(C, 1.0))
        self.measured_C = measured

    def measured_constant(self) -> float:
        dirs = sphere_directions(self.dim)
        ratio = self.union._gauge(dirs) / self.hull._gauge(dirs)
        if self.dim == 1:
            return float(np.max(ratio))

        def score(Cand):
            flat = Cand.reshape(-1, self.dim)
            return (self.union._gauge(flat) / self.hull._gauge(flat)).reshape(Cand.shape[:2])

        _, v = _sphere_argmax(score, dirs[[int(np.argmax(ratio))]], _grid_step(dirs))
        return float(max(np.max(ratio), v[0]))

    def radial(self, theta):
        T, lead = _as_rows(theta, self.dim)
        return _finish(1.0 / self.union._gauge(T), lead)

    def apply(self, A) -> "QuasiBody":
        A = A if isinstance(A, LinearMap) else LinearMap(A)
        return QuasiBody([apply_linear(p, A) for p in self.pieces], self.C, self.label)

    def scaled(self, factor: float) -> "QuasiBody":
        return self.apply(LinearMap.scaling(self.dim, factor))

    def volume(self, n_samples=200_000, seed=0) -> Estimate:
        """Union volume: inclusion-exclusion for up to three pieces, else MC."""
        k = len(self.pieces)
        if k <= 3:
            total, err2, exact = 0.0, 0.0, True
            for r in range(1, k + 1):
                for combo in itertools.combinations(self.pieces, r):
                    P = combo[0] if r == 1 else _polytope_intersection(combo)
                    if P is None:
                        P = Intersection(*combo)
                    v = volume(P, n_samples, seed)
                    total += (-1) ** (r + 1) * v.value
                    err2 += v.std_error ** 2
                    exact &= v.std_error == 0 and v.n_samples == 0
            return Estimate(total, math.sqrt(err2), 0 if exact else n_samples, None if exact else seed)
        return volume(self.union, n_samples, seed)

    def normalized(self):
        """(volume-one copy, scale factor)."""
        v = self.volume().value
        s = v ** (-1.0 / self.dim)
        return self.scaled(s), s

    def to_dict(self):
        return {"pieces": [p.to_dict() for p in self.pieces], "C": self.C}

    def __repr__(self):
        return f"QuasiBody(dim={self.dim}, pieces={len(self.pieces)}, C={self.C:.4g})"


def quasi_radial(K: QuasiBody, theta):
    """max over pieces of the radial function."""
    T, lead = _as_rows(theta, K.dim)
    return _finish(1.0 / K.union._gauge(_unit(T)), lead)


# ---------------------------------------------------------------------------
# one-dimensional tail

def tail_integral_exact(a, b, m, k):
    """integral_a^b (1 - (t-a)/(b-a))^m t^k dt as a finite binomial-beta sum."""
    j = np.arange(k + 1)
    terms = comb(k, j) * a ** (k - j) * (b - a) ** j * np.exp(betaln(j + 1, m + 1))
    return float((b - a) * np.sum(terms))


def one_dim_tail_bound(a, b, alpha, n, c1=None):
    """Compare the tail integral with (c1/alpha)^n integral_a^b t^n dt.

    Returns (lhs, rhs, passed, c1_min) where c1_min is the smallest c1 that
    makes the inequality hold.
    """
    c1 = CONSTANTS["c1_tail"] if c1 is None else c1
    if not (0 < a < b) or not alpha > 1:
        raise ValueError("need 0 < a < b and alpha > 1")
    if not b > 2 * a * (1 + alpha / math.e):
        raise ValueError("hypothesis b > 2a(1 + alpha/e) violated")
    m = alpha * n

    def g(rows, t):
        return (1 - (t - a) / (b - a)) ** m * t ** n

    lhs, ok = integrate_segments(g, [[a, b]], tol=1e-13, max_level=14)
    lhs = float(lhs[0])
    base = (b ** (n + 1) - a ** (n + 1)) / (n + 1)
    rhs = (c1 / alpha) ** n * base
    c1_min = alpha * (lhs / base) ** (1.0 / n)
    return lhs, rhs, lhs < rhs, c1_min


def tail_constant_grid(a_values=(0.5, 1, 2), ratios=(3, 5, 10, 30), alphas=(2, 4, 8, 16), dims=range(1, 7)):
    """Minimal c1 over the parameter grid; combinations violating the
    hypothesis b > 2a(1 + alpha/e) are skipped."""
    rows = []
    for a, q, al, n in itertools.product(a_values, ratios, alphas, dims):
        b = a * q
        if not b > 2 * a * (1 + al / math.e):
            continue
        lhs, rhs, ok, c1 = one_dim_tail_bound(a, b, al, n)
        rows.append({"a": a, "b": b, "alpha": al, "n": n, "lhs": lhs, "c1_min": c1})
    return rows


# ---------------------------------------------------------------------------
# the radial density

class QuasiDensity(Density):
    """The radial density F_K of a quasi-body (see module docstring)."""

    name = "quasi"

    def __init__(self, K: QuasiBody, alpha: float):
        if not alpha > 1:
            raise ValueError("alpha must exceed 1")
        super().__init__(K.dim, "line-s-concave", alpha * K.dim, None)
        self.K = K
        self.alpha = float(alpha)
        self.m = alpha * K.dim
        self.a = math.sqrt(K.dim)
        self.R = max(self.a, K.hull.r_out)

    def _profile(self, r, M):
        a = self.a
        out = np.where(r <= a, 1.0, 0.0)
        with np.errstate(divide="ignore", invalid="ignore"):
            u = 1.0 - (r - a) / (M - a)
        mid = (r > a) & (r <= M)
        return np.where(mid, np.clip(u, 0.0, 1.0) ** self.m, out)

    def _eval(self, X):
        r = np.linalg.norm(X, axis=1)
        M = np.full(len(X), self.a)
        nz = r > 0
        M[nz] = 1.0 / self.K.hull._gauge(X[nz] / r[nz, None])
        return self._profile(r, M)

    def ray(self, theta, r):
        M = 1.0 / self.K.hull._gauge(theta)
        return self._profile(r, M[:, None])

    def support_radius(self, theta):
        return np.maximum(self.a, 1.0 / self.K.hull._gauge(theta))

    def breakpoints(self, theta):
        return np.full((len(theta), 1), self.a)

    @property
    def f0(self):
        return 1.0

    def radial_moments(self, theta, k):
        """Exact radial moments from the binomial-beta expansion."""
        M = 1.0 / self.K.hull._gauge(theta)
        a = self.a
        out = np.full(len(theta), a ** (k + 1) / (k + 1))
        for i in np.flatnonzero(M > a):
            out[i] += tail_integral_exact(a, M[i], self.m, k)
        return out

    def sample(self, rng, size):
        R, n = self.R, self.dim
        X = rng.uniform(-R, R, (size, n))
        return X, (2 * R) ** n * self._eval(X)


def build_F_quasi(K: QuasiBody, alpha: float) -> QuasiDensity:
    return QuasiDensity(K, alpha)


# ---------------------------------------------------------------------------
# checks

def quasi_tail_mass_check(K: QuasiBody, alpha: float | None = None, n_samples=200_000, seed=0,
                          c1: float | None = None, overlap: float | None = None) -> Report:
    """Mass of F_K outside c2 sqrt(n) D, c2 = 2(1 + alpha/e), against
    (c1/alpha)^(n-1) Vol(conv K), for the volume-one copy of K."""
    c1 = CONSTANTS["c1_tail_mass"] if c1 is None else c1
    Kn, scale = K.normalized()
    n = K.dim
    if alpha is None:
        if overlap is None:
            _, ov = m_ellipsoid_surrogate(Kn, seed=seed)
            overlap = ov.value
        alpha = CONSTANTS["c3"] * Kn.C / overlap
    F = build_F_quasi(Kn, alpha)
    c2 = 2 * (1 + alpha / math.e)
    rad = c2 * math.sqrt(n)
    hull_vol = volume(Kn.hull).value
    rep = Report("lem-4.2", K.label, {"alpha": alpha, "c1": c1, "seed": seed, "n_samples": n_samples})
    if F.R <= rad:
        tail = Estimate.exact(0.0)
    else:
        def draw(rng, size):
            X, w = F.sample(rng, size)
            return w * (np.linalg.norm(X, axis=1) > rad)

        v = np.concatenate(_map_chunks(draw, seed, n_samples))
        tail = Estimate(v.mean(), v.std(ddof=1) / math.sqrt(len(v)), len(v), seed)
    bound = (c1 / alpha) ** (n - 1) * hull_vol
    c1_min = alpha * (max(tail.value, 0.0) / hull_vol) ** (1.0 / (n - 1)) if n > 1 else math.nan
    rep.values.update(tail_mass=tail, bound=bound, c2=c2, radius=rad, hull_volume=hull_vol,
                      c1_min=c1_min, scale=scale)
    rep.check("tail mass below bound by 3 sigma", bound - tail.value > 3 * tail.std_error)
    return rep


def _ball_points(n, count, seed):
    rng = np.random.default_rng(np.random.SeedSequence([seed, 41]))
    Z = rng.standard_normal((count, n))
    Z /= np.linalg.norm(Z, axis=1, keepdims=True)
    return Z * rng.uniform(size=(count, 1)) ** (1.0 / n)


def m_ellipsoid_surrogate(K: QuasiBody, n_samples=40_000, seed=0, iters=60):
    """Equal-volume ellipsoid with large overlap with K.

    Starts from the inertia ellipsoid of conv(K), rescaled to Vol(K), and
    searches over volume-preserving axis rescalings (in the inertia
    eigenbasis) to maximize Vol(K ∩ E), estimated with common random points.
    Returns (ellipsoid, overlap) with overlap = (Vol(K ∩ E) / Vol(K))^(1/n).
    """
    n = K.dim
    if n > 4:
        raise ValueError("ellipsoid search supported for dim <= 4")
    volK = K.volume().value
    S = K.hull.second_moment()
    if S is None:
        from .sampling import covariance
        S = covariance(K.hull, n_samples, seed).matrix
    evals, Q = np.linalg.eigh(S)
    base = np.sqrt(evals)
    Z = _ball_points(n, n_samples, seed)
    r_unit = (volK / unit_ball_volume(n)) ** (1.0 / n)

    def axes_for(logs):
        ax = base * np.exp(logs - logs.mean())
        return ax * r_unit / np.prod(ax) ** (1.0 / n)

    def hit_rate(logs):
        ax = axes_for(logs)
        X = (Z * ax) @ Q.T
        return float(np.mean(K.union._gauge(X) <= 1.0))

    logs = np.zeros(n)
    best = hit_rate(logs)
    step = 0.5
    for _ in range(iters):
        improved = False
        for i in range(n):
            for sgn in (1, -1):
                trial = logs.copy()
                trial[i] += sgn * step
                v = hit_rate(trial)
                if v > best + 1e-12:
                    logs, best, improved = trial, v, True
        if not improved:
            step /= 2
            if step < 1e-3:
                break
    ax = axes_for(logs)
    E = Ellipsoid.from_axes(ax, Q)
    p = best
    # Vol(E) = Vol(K), so the overlap is p^(1/n)
    se_p = math.sqrt(max(p * (1 - p), 0.0) / n_samples)
    overlap = p ** (1.0 / n)
    se = overlap * se_p / (n * p) if p > 0 else math.inf
    return E, Estimate(min(overlap, 1.0), se, n_samples, seed)


def _position(K: QuasiBody, seed=0):
    """Volume-one copy mapped so the surrogate ellipsoid becomes a ball."""
    Kn, _ = K.normalized()
    E, overlap = m_ellipsoid_surrogate(Kn, seed=seed)
    # E = {x : x^T A x <= 1}; the map A^{1/2} * r sends E to r D, det-one
    w, V = np.linalg.eigh(E.form)
    root = V @ np.diag(np.sqrt(w)) @ V.T
    r = (1.0 / unit_ball_volume(K.dim)) ** (1.0 / K.dim)
    c = 1.0 / np.linalg.det(root) ** (1.0 / K.dim)
    A = LinearMap(c * root)
    Kp = Kn.apply(A)
    return Kp, overlap, A, r


def quasi_L_bound_check(K: QuasiBody, alpha: float | None = None, n_samples=200_000, seed=0) -> Report:
    """L of F_K for the positioned volume-one copy of K."""
    Kp, overlap, A, r = _position(K, seed)
    n = K.dim
    if alpha is None:
        alpha = CONSTANTS["c3"] * Kp.C / overlap.value
    F = build_F_quasi(Kp, alpha)
    L = isotropic_constant_density(F, n_samples, seed)
    hull_vol = volume(Kp.hull).value
    contain = Kp.hull.r_out <= hull_vol ** (1.0 / n) * n ** 2
    rep = Report("lem-4.3", K.label, {"alpha": alpha, "seed": seed, "n_samples": n_samples})
    rep.values.update(A=Kp.C, B=overlap, L=L, hull_r_out=Kp.hull.r_out)
    rep.check("hull inside Vol^(1/n) n^2 D", contain)
    rep.check("L below threshold", L.value <= CONSTANTS["quasi_L_max"], f"L = {L.value:.4f}")
    return rep


def quasi_perturb(K: QuasiBody, c3: float | None = None, n_samples=100_000, seed=0,
                  quad=None) -> PerturbationResult:
    """Normalize, position by the ellipsoid surrogate, and perturb with alpha = c3 C / overlap."""
    c3 = CONSTANTS["c3"] if c3 is None else c3
    n = K.dim
    if n > 4:
        raise ValueError("quasi perturbation supported for dim <= 4")
    Kp, overlap, A, _ = _position(K, seed)
    alpha = c3 * Kp.C / overlap.value
    F = build_F_quasi(Kp, alpha)
    T = body_from_density(F)
    quad = sphere_quadrature(n) if quad is None else quad
    rho = 1.0 / T._gauge(quad.points)
    L_T = star_body_isotropic_constant(rho, quad)
    d_G = geometric_distance(Kp.hull, T)
    mass = quad.surface_area * float(quad.mean(F.radial_moments(quad.points, n - 1)))
    core = unit_ball_volume(n) * n ** (n / 2)
    nf = norm_functionals(Kp.hull)
    extra = {"overlap": overlap, "C": Kp.C, "d_G_times_C": d_G.value * Kp.C,
             "integral_F": mass, "label": K.label}
    return PerturbationResult(Kp.hull, alpha, nf.M, nf.M_star, nf.M_prime, T, L_T, d_G,
                              Estimate(mass / core, 0.0, len(quad), None), {"c3": c3}, extra, A)
