"""Monte Carlo and quadrature engines on convex bodies and densities.

Sampling is chunked: chunk ``i`` draws from ``SeedSequence(seed).spawn``'s
i-th child and chunks are reduced in index order, so every result is a
deterministic function of the seed regardless of ``threads``.
"""
from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from scipy.special import roots_legendre
from scipy.stats import special_ortho_group

from .convex_bodies import Body, LinearMap, apply_linear, sphere_area, sphere_directions
from .estimate import Estimate

__all__ = [
    "Estimate", "SphereQuadrature", "CovarianceMatrix", "NormFunctionals",
    "sphere_quadrature", "fine_quadrature", "uniform_sample", "body_sampler", "volume", "covariance",
    "isotropic_constant_body", "isotropic_constant_density", "isotropic_transform",
    "norm_functionals", "star_body_moments", "star_body_isotropic_constant",
    "jackknife", "set_threads", "CHUNK",
]

CHUNK = 4096  # samples per seeded chunk
_THREADS = 1


def set_threads(n: int | None):
    """Worker threads used by the samplers (None or 0 means all cores)."""
    global _THREADS
    import os
    _THREADS = int(n) if n else (os.cpu_count() or 1)


def _chunk_rngs(seed, n_chunks):
    ss = np.random.SeedSequence(int(seed))
    return [np.random.default_rng(child) for child in ss.spawn(n_chunks)]


def _map_chunks(fn, seed, count, threads=None):
    """Run ``fn(rng, size)`` over fixed-size chunks; concatenate in order."""
    n_chunks = max(1, -(-count // CHUNK))
    sizes = [min(CHUNK, count - i * CHUNK) for i in range(n_chunks)]
    rngs = _chunk_rngs(seed, n_chunks)
    threads = _THREADS if threads is None else threads
    if threads > 1 and n_chunks > 1:
        with ThreadPoolExecutor(threads) as pool:
            parts = list(pool.map(fn, rngs, sizes))
    else:
        parts = [fn(r, s) for r, s in zip(rngs, sizes)]
    return parts


def jackknife(features: np.ndarray, stat, n_batches: int = 20):
    """Batch-jackknife a smooth function of feature means.

    ``features`` is (N, p); ``stat`` maps a length-p mean vector to a scalar.
    Batches are contiguous blocks, which keeps the estimate deterministic.
    Returns (value, std_error).
    """
    features = np.asarray(features, dtype=float)
    n = len(features)
    value = stat(features.mean(axis=0))
    n_batches = min(n_batches, n)
    if n_batches < 2:
        return value, math.inf
    edges = np.linspace(0, n, n_batches + 1).astype(int)
    sums = np.array([features[a:b].sum(axis=0) for a, b in zip(edges[:-1], edges[1:])])
    counts = np.diff(edges)
    total, tcount = sums.sum(axis=0), counts.sum()
    loo = np.array([stat((total - s) / (tcount - c)) for s, c in zip(sums, counts)])
    se = math.sqrt((n_batches - 1) / n_batches * np.sum((loo - loo.mean()) ** 2))
    return value, se


# ---------------------------------------------------------------------------
# sphere quadrature

@dataclass(frozen=True)
class SphereQuadrature:
    """Discrete approximation of the uniform probability measure on S^{n-1}.

    ``surface_area`` converts sigma-integrals into integrals against the
    surface measure: integral d(theta) = surface_area * integral d(sigma).
    ``coarse_index`` selects a sub-rule (reweighted) used to gauge resolution.
    """

    dim: int
    points: np.ndarray
    weights: np.ndarray
    surface_area: float
    coarse_index: np.ndarray | None = field(default=None, repr=False)

    def __post_init__(self):
        w = np.asarray(self.weights, dtype=float)
        if np.any(w < 0) or abs(w.sum() - 1.0) > 1e-12:
            raise ValueError("quadrature weights must be non-negative and sum to one")

    def __len__(self):
        return len(self.points)

    def mean(self, values):
        return np.tensordot(self.weights, np.asarray(values, dtype=float), axes=(0, 0))

    def coarse(self) -> "SphereQuadrature":
        idx = self.coarse_index
        if idx is None:
            idx = np.arange(0, len(self.points), 2)
        w = self.weights[idx]
        return SphereQuadrature(self.dim, self.points[idx], w / w.sum(), self.surface_area)

    def rotated(self, seed: int = 0) -> "SphereQuadrature":
        """The same rule turned by a seeded random rotation."""
        R = turning(self.dim, seed)
        return SphereQuadrature(self.dim, self.points @ R.T, self.weights, self.surface_area,
                                self.coarse_index)


def turning(dim: int, seed: int = 0) -> np.ndarray:
    """Seeded random rotation used to turn sphere rules and direction sets."""
    return special_ortho_group.rvs(dim, random_state=np.random.default_rng(seed))


def sphere_quadrature(dim: int, resolution: int | None = None) -> SphereQuadrature:
    """Positive-weight quadrature for sigma on S^{dim-1}.

    dim 2: ``resolution`` equally spaced angles (default 720).
    dim 3: Gauss-Legendre in cos(polar angle) times equally spaced azimuths,
    ``resolution`` azimuths (default 128) and half as many polar nodes.
    dim >= 4: the symmetrized Sobol set of :func:`sphere_directions` with
    equal weights (default about 4096 points); exact for all second moments.
    """
    if dim == 2:
        m = resolution or 720
        a = 2 * math.pi * np.arange(m) / m
        pts = np.column_stack([np.cos(a), np.sin(a)])
        return SphereQuadrature(2, pts, np.full(m, 1.0 / m), sphere_area(2))
    if dim == 3:
        m = resolution or 128
        if m % 4:
            raise ValueError("3-D resolution must be a multiple of 4")
        z, wz = roots_legendre(m // 2)
        phi = 2 * math.pi * np.arange(m) / m
        Z, P = np.meshgrid(z, phi, indexing="ij")
        s = np.sqrt(1 - Z ** 2)
        pts = np.column_stack([(s * np.cos(P)).ravel(), (s * np.sin(P)).ravel(), Z.ravel()])
        w = np.repeat(wz / 2.0, m) / m
        coarse = np.flatnonzero((np.arange(len(pts)) % m) % 2 == 0)
        return SphereQuadrature(3, pts, w / w.sum(), sphere_area(3), coarse)
    size = resolution or 4096
    pts = np.array(sphere_directions(dim, size))
    # keep whole symmetry orbits of the first half of the base points
    signs = 2 ** dim
    base = len(pts) // (signs * dim)
    j = (np.arange(len(pts)) % (base * signs)) // signs
    coarse = np.flatnonzero(j < max(1, base // 2))
    return SphereQuadrature(dim, pts, np.full(len(pts), 1.0 / len(pts)), sphere_area(dim), coarse)


# ---------------------------------------------------------------------------
# uniform sampling

def _bounding_box(body: Body):
    return body.half_widths()


def _acceptance(body: Body, hw, seed=0):
    v = body.exact_volume()
    if v is not None:
        return v / float(np.prod(2 * hw))
    rng = np.random.default_rng(np.random.SeedSequence([int(seed), 7]))
    pts = rng.uniform(-hw, hw, size=(4096, body.dim))
    return max(np.mean(body._gauge(pts) <= 1.0), 1.0 / 4096)


def _rejection_chunk(body, hw, acc):
    def draw(rng, size):
        out = np.empty((0, body.dim))
        batch = int(min(4 * 10 ** 6 // body.dim, max(64, 1.3 * size / acc + 64)))
        while len(out) < size:
            pts = rng.uniform(-hw, hw, size=(batch, body.dim))
            out = np.concatenate([out, pts[body._gauge(pts) <= 1.0]])
        return out[:size]
    return draw


def _chord(body, X, D, hi):
    # largest t with gauge(X + t D) <= 1, by bisection (gauge convex along lines)
    lo = np.zeros(len(X))
    hi = np.full(len(X), hi)
    for _ in range(48):
        mid = 0.5 * (lo + hi)
        ok = body._gauge(X + mid[:, None] * D) <= 1.0
        lo = np.where(ok, mid, lo)
        hi = np.where(ok, hi, mid)
    return lo


def _hit_and_run_chunk(body, burn_in=None, thin=None, chains=64):
    n = body.dim
    burn_in = 10 * n * n if burn_in is None else burn_in
    thin = n * n if thin is None else thin
    span = 2.5 * body.r_out

    def step(rng, X):
        D = rng.standard_normal(X.shape)
        D /= np.linalg.norm(D, axis=1, keepdims=True)
        tp = _chord(body, X, D, span)
        tm = _chord(body, X, -D, span)
        u = rng.uniform(-tm, tp)
        return X + u[:, None] * D

    def draw(rng, size):
        X = np.zeros((chains, n))
        for _ in range(burn_in):
            X = step(rng, X)
        out = []
        per_chain = -(-size // chains)
        for _ in range(per_chain):
            for _ in range(thin):
                X = step(rng, X)
            out.append(X.copy())
        return np.stack(out, axis=1).reshape(-1, n)[:size]
    return draw


def uniform_sample(body: Body, count: int, seed: int = 0, method: str = "auto",
                   threads: int | None = None, **hit_and_run) -> np.ndarray:
    """Uniform points in ``body``.

    ``method`` is "rejection" (bounding-box rejection), "hit-and-run" or
    "auto", which rejects when the acceptance rate is at least 1e-3.
    """
    if count < 1:
        raise ValueError("count must be at least 1")
    draw = body_sampler(body, method, seed, **hit_and_run)
    return np.concatenate(_map_chunks(draw, seed, count, threads))


def body_sampler(body: Body, method: str = "auto", seed: int = 0, **hit_and_run):
    """Return ``draw(rng, size)`` producing uniform points in ``body``."""
    hw = _bounding_box(body)
    acc = _acceptance(body, hw, seed) if method in ("auto", "rejection") else 0.0
    if method == "auto":
        method = "rejection" if acc >= 1e-3 else "hit-and-run"
    if method == "rejection":
        return _rejection_chunk(body, hw, max(acc, 1e-4))
    if method == "hit-and-run":
        return _hit_and_run_chunk(body, **hit_and_run)
    raise ValueError(f"unknown sampling method {method!r}")


# ---------------------------------------------------------------------------
# volumes and moments

def volume(body: Body, n_samples: int = 200_000, seed: int = 0) -> Estimate:
    """Exact volume when a closed form exists, else a bounding-box MC ratio."""
    v = body.exact_volume()
    if v is not None:
        return Estimate.exact(v)
    if body.dim > 6:
        raise ValueError("Monte Carlo volume supported for dim <= 6")
    hw = _bounding_box(body)
    box = float(np.prod(2 * hw))

    def hits(rng, size):
        pts = rng.uniform(-hw, hw, size=(size, body.dim))
        return (body._gauge(pts) <= 1.0).astype(float)

    h = np.concatenate(_map_chunks(hits, seed, n_samples))
    p = h.mean()
    return Estimate(box * p, box * math.sqrt(max(p * (1 - p), 0.0) / len(h)), len(h), seed)


@dataclass(frozen=True)
class CovarianceMatrix:
    """Second-moment matrix E[x x^T] of a symmetric measure (mean zero)."""

    matrix: np.ndarray
    std_error: np.ndarray
    n_samples: int
    provenance: str

    def __post_init__(self):
        m = np.asarray(self.matrix, dtype=float)
        if not np.allclose(m, m.T, atol=1e-10 * max(1.0, np.abs(m).max())):
            raise ValueError("covariance must be symmetric")


def _second_moment_features(X, w=None):
    outer = np.einsum("ni,nj->nij", X, X).reshape(len(X), -1)
    if w is None:
        return outer
    return np.column_stack([w, w[:, None] * outer])


def covariance(source, n_samples: int = 100_000, seed: int = 0) -> CovarianceMatrix:
    """Monte Carlo second-moment matrix of a body (uniform) or a density.

    Densities are importance sampled from their own proposal (see
    ``Density.sample``) with self-normalized weights.
    """
    from .logconcave import Density

    if isinstance(source, Body):
        X = uniform_sample(source, n_samples, seed)
        feats = _second_moment_features(X)
        n = source.dim
        M = feats.mean(axis=0).reshape(n, n)
        se = (feats.std(axis=0, ddof=1) / math.sqrt(len(X))).reshape(n, n)
        return CovarianceMatrix(0.5 * (M + M.T), se, len(X), f"body:{source.kind}")
    if isinstance(source, Density):
        n = source.dim
        X, w = _density_draw(source, n_samples, seed)
        if not np.any(w > 0):
            raise ValueError("density has zero total mass on the proposal")
        mw = w.mean()
        wm = (w[:, None] * _second_moment_features(X))
        M = (wm.mean(axis=0) / mw).reshape(n, n)
        resid = (wm - w[:, None] * M.ravel()[None, :]) / mw
        se = (resid.std(axis=0, ddof=1) / math.sqrt(len(X))).reshape(n, n)
        return CovarianceMatrix(0.5 * (M + M.T), se, len(X), f"density:{source.name}")
    raise TypeError("covariance source must be a Body or a Density")


def _density_draw(f, n_samples, seed):
    parts = _map_chunks(lambda rng, size: f.sample(rng, size), seed, n_samples)
    X = np.concatenate([p[0] for p in parts])
    w = np.concatenate([p[1] for p in parts])
    return X, w


def isotropic_constant_body(K: Body, n_samples: int = 100_000, seed: int = 0) -> Estimate:
    """L_K = det(E[x x^T])^{1/(2n)} / Vol(K)^{1/n}.

    This equals sqrt(E|y|^2 / n) for y uniform on the volume-one isotropic
    image of K, the determinant-one map attaining the infimum in the
    trace characterization.
    """
    n = K.dim
    vol = volume(K, n_samples, seed + 1)
    X = uniform_sample(K, n_samples, seed)
    feats = _second_moment_features(X)

    def stat(m):
        S = m.reshape(n, n)
        return np.linalg.det(0.5 * (S + S.T)) ** (1 / (2 * n))

    val, se = jackknife(feats, stat)
    scale = vol.value ** (-1.0 / n)
    rel_v = vol.std_error / (n * vol.value)
    L = val * scale
    return Estimate(L, L * math.hypot(se / val, rel_v), len(X), seed)


def isotropic_constant_density(f, n_samples: int = 100_000, seed: int = 0) -> Estimate:
    """L_f = (f(0) / integral f)^{1/n} det(M)^{1/(2n)}, M the second-moment matrix."""
    n = f.dim
    f0 = float(f.f0)
    if f0 <= 0:
        raise ValueError("isotropic constant of a density needs f(0) > 0")
    X, w = _density_draw(f, n_samples, seed)
    if not np.any(w > 0):
        raise ValueError("density has zero total mass on the proposal")
    feats = _second_moment_features(X, w)

    def stat(m):
        mass = m[0]
        S = m[1:].reshape(n, n) / mass
        return (f0 / mass) ** (1 / n) * np.linalg.det(0.5 * (S + S.T)) ** (1 / (2 * n))

    val, se = jackknife(feats, stat)
    return Estimate(val, se, len(X), seed)


def _exact_or_mc_moment(K: Body, n_samples, seed):
    S = K.second_moment()
    if S is not None:
        return np.asarray(S, dtype=float)
    return covariance(K, n_samples, seed).matrix


def isotropic_transform(K: Body, n_samples: int = 100_000, seed: int = 0,
                        exact: bool = True) -> tuple[LinearMap, Body]:
    """Map K to volume one with scalar second-moment matrix.

    The map is c * S^{-1/2} with S the second moment of K.  With ``exact`` the
    closed-form second moment is used where the body provides one; otherwise
    (and for bodies without one) S and the volume are Monte Carlo estimates.
    """
    n = K.dim
    S = _exact_or_mc_moment(K, n_samples, seed) if exact else covariance(K, n_samples, seed).matrix
    vol = K.exact_volume() if exact else None
    if vol is None:
        vol = volume(K, n_samples, seed + 1).value
    evals, evecs = np.linalg.eigh(0.5 * (S + S.T))
    if np.any(evals <= 0):
        raise ValueError("degenerate second-moment matrix")
    W = evecs @ np.diag(evals ** -0.5) @ evecs.T
    c = (math.sqrt(float(np.prod(evals))) / vol) ** (1.0 / n)
    T = LinearMap(c * W, c ** n / math.sqrt(float(np.prod(evals))))
    return T, apply_linear(K, T)


# ---------------------------------------------------------------------------
# sphere functionals

@dataclass(frozen=True)
class NormFunctionals:
    M: float
    M_star: float
    M_prime: float
    grid_error: float

    def __iter__(self):
        return iter((self.M, self.M_star, self.M_prime))


def _lower_weighted_median(values, weights):
    order = np.argsort(values, kind="stable")
    cw = np.cumsum(weights[order])
    i = int(np.searchsorted(cw, 0.5 - 1e-12))
    return float(values[order][min(i, len(values) - 1)])


_FINE = {2: 8192, 3: 512}


def fine_quadrature(dim: int) -> SphereQuadrature:
    """Dense rule for cheap sphere averages (about 2**16 points beyond 3-D)."""
    return sphere_quadrature(dim, _FINE.get(dim, 2 ** 16))


def norm_functionals(K: Body, quad: SphereQuadrature | None = None) -> NormFunctionals:
    """Sphere mean of the norm (M), of the dual norm (M*), and the median (M′).

    The median is the lower weighted median.  The default rule is the dense
    :func:`fine_quadrature`; ``grid_error`` is the largest change of the
    three values when its coarse sub-rule, or a turned copy of the rule, is
    used instead.
    """
    quad = fine_quadrature(K.dim) if quad is None else quad
    if quad.dim != K.dim:
        raise ValueError("quadrature dimension mismatch")

    def compute(q):
        g = K._gauge(q.points)
        h = K._support(q.points)
        return float(q.mean(g)), float(q.mean(h)), _lower_weighted_median(g, q.weights)

    full = compute(quad)
    err = max(abs(a - b) for alt in (quad.coarse(), quad.rotated()) for a, b in zip(full, compute(alt)))
    return NormFunctionals(*full, grid_error=err)


def star_body_moments(rho: np.ndarray, quad: SphereQuadrature):
    """Volume and E[x x^T] of the star body with radial function ``rho``."""
    n = quad.dim
    rho = np.asarray(rho, dtype=float)
    vol = quad.surface_area / n * float(quad.mean(rho ** n))
    P = quad.points
    inertia = quad.surface_area / (n + 2) * np.einsum("k,ki,kj->ij", quad.weights * rho ** (n + 2), P, P)
    return vol, inertia / vol


def star_body_isotropic_constant(rho: np.ndarray, quad: SphereQuadrature) -> Estimate:
    """L of a star body from its radial function on a sphere quadrature.

    ``std_error`` holds the difference from the coarse sub-rule.
    """
    n = quad.dim

    def L(r, q):
        vol, S = star_body_moments(r, q)
        return np.linalg.det(S) ** (1 / (2 * n)) / vol ** (1 / n)

    full = L(rho, quad)
    idx = quad.coarse_index if quad.coarse_index is not None else np.arange(0, len(quad), 2)
    coarse = L(np.asarray(rho)[idx], quad.coarse())
    return Estimate(full, abs(full - coarse), len(quad), None)
