"""Sections, projection marginals and the near-origin perturbation."""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.stats import qmc, special_ortho_group

from .constants import CONSTANTS
from .convex_bodies import (
    Ball, Body, HPolytope, Intersection, InterpolationGauge, _unit, geometric_distance,
    sphere_directions, unit_ball_volume,
)
from .estimate import Estimate
from .logconcave import Density, body_from_density
from .pipeline import (
    InterpolationDensity, PerturbationResult, mixed_volume_first, polytope_fit,
)
from .quadrature import gauss_legendre
from .report import Report
from .sampling import (
    isotropic_constant_body, isotropic_transform, norm_functionals, sphere_quadrature, star_body_isotropic_constant,
    uniform_sample, volume,
)

__all__ = [
    "Subspace", "SectionBody", "MarginalDensity", "section_volume", "projection_body",
    "projection_marginal", "marginal_moment_check", "projection_perturb",
    "near_origin_perturb", "NearOriginError", "log_volume_profile", "section_volume_check",
]


@dataclass(frozen=True)
class Subspace:
    """A k-dimensional subspace E of R^n with orthonormal bases of E and E⊥."""

    basis: np.ndarray        # (k, n) rows spanning E
    complement: np.ndarray   # (n - k, n) rows spanning E⊥

    def __post_init__(self):
        B, P = np.atleast_2d(self.basis), np.atleast_2d(self.complement) if self.complement.size else self.complement
        k, n = B.shape
        if k + (P.shape[0] if P.size else 0) != n:
            raise ValueError("basis and complement must span R^n")
        full = np.vstack([B, P]) if P.size else B
        if not np.allclose(full @ full.T, np.eye(n), atol=1e-12):
            raise ValueError("bases must be orthonormal")

    @classmethod
    def from_basis(cls, vectors) -> "Subspace":
        V = np.atleast_2d(np.asarray(vectors, dtype=float))
        k, n = V.shape
        if k < 1 or k > n or np.linalg.matrix_rank(V) < k:
            raise ValueError("degenerate subspace basis")
        Q, _ = np.linalg.qr(np.vstack([V, np.eye(n)]).T)
        Q = Q[:, :n].T
        # re-orthonormalize against rounding so the exact checks pass
        Q, _ = np.linalg.qr(Q.T)
        Q = Q.T
        return cls(Q[:k], Q[k:])

    @classmethod
    def coordinate(cls, n: int, axes) -> "Subspace":
        axes = list(axes)
        rest = [i for i in range(n) if i not in axes]
        I = np.eye(n)
        return cls(I[axes], I[rest])

    @classmethod
    def random(cls, n: int, k: int, seed: int = 0) -> "Subspace":
        Q = special_ortho_group.rvs(n, random_state=np.random.default_rng(seed)) if n > 1 else np.eye(1)
        Q, _ = np.linalg.qr(Q)
        return cls(Q.T[:k], Q.T[k:])

    @property
    def dim(self) -> int:
        return self.basis.shape[0]

    @property
    def ambient(self) -> int:
        return self.basis.shape[1]

    @property
    def codim(self) -> int:
        return self.ambient - self.dim

    def perp(self) -> "Subspace":
        return Subspace(self.complement, self.basis)

    def to_dict(self):
        return {"basis": self.basis.tolist()}


class SectionBody(Body):
    """K ∩ E in the coordinates of an orthonormal basis of E."""

    kind = "section"

    def __init__(self, K: Body, E: Subspace):
        super().__init__(E.dim)
        self.K, self.E = K, E

    def _gauge(self, Y):
        return self.K._gauge(Y @ self.E.basis)


def _check_isotropic(K: Body, tol=0.02):
    S = K.second_moment()
    v = K.exact_volume()
    if S is None or v is None:
        return  # cannot be checked exactly; caller's duty
    if abs(v - 1) > tol:
        raise ValueError(f"body must have volume one (got {v:.6g})")
    lam = np.trace(S) / K.dim
    if np.max(np.abs(S - lam * np.eye(K.dim))) > tol * lam:
        raise ValueError("body must be in isotropic position")


def section_volume(K: Body, E: Subspace, quad=None, check: bool = True) -> Estimate:
    """(dim E)-volume of K ∩ E by polar quadrature in E (exact chord in 1-D).

    The error field holds the change against the coarse sub-rule.
    """
    if check:
        _check_isotropic(K)
    k = E.dim
    if k == 1:
        return Estimate.exact(2.0 / K._gauge(E.basis)[0])
    quad = sphere_quadrature(k) if quad is None else quad
    rho = 1.0 / K._gauge(quad.points @ E.basis)
    full = quad.surface_area / k * float(quad.mean(rho ** k))
    idx = quad.coarse_index if quad.coarse_index is not None else np.arange(0, len(quad), 2)
    coarse = quad.surface_area / k * float(quad.coarse().mean(rho[idx] ** k))
    return Estimate(full, abs(full - coarse), len(quad), None)


def section_volume_check(K: Body, lambdas=(1 / 3, 1 / 2), n_subspaces=5, seed=0,
                         n_samples=100_000, factor=3.0, A=None) -> Report:
    """Vol(K ∩ E)^(1/n) <= factor * A over random E of dimension lambda n.

    K is first put in isotropic position and L_K is measured there.  The
    bound A must exceed both L_K and 1; by default A = max(1, L_K).
    """
    n = K.dim
    _, Kt = isotropic_transform(K, n_samples, seed)
    L = isotropic_constant_body(Kt, n_samples, seed)
    rep = Report("lem-5.1", getattr(K, "label", K.kind),
                 {"lambdas": list(lambdas), "n_subspaces": n_subspaces, "seed": seed, "factor": factor})
    rows = []
    for lam in lambdas:
        k = max(1, int(round(lam * n)))
        if k >= n:
            continue
        for j in range(n_subspaces):
            E = Subspace.random(n, k, seed * 1000 + 17 * j + k)
            v = section_volume(Kt, E, check=False)
            rows.append({"k": k, "volume": v, "root": v.value ** (1.0 / n)})
    worst = max((r["root"] for r in rows), default=0.0)
    A = max(1.0, L.value) if A is None else float(A)
    rep.values.update(L_K=L, A=A, sections=rows, max_root=worst)
    rep.check("L_K <= A", L.value <= A)
    rep.check("Vol(K ∩ E)^(1/n) <= factor A", worst <= factor * A, f"{worst:.4g} vs {factor * A:.4g}")
    return rep


def projection_body(K: Body, E: Subspace, directions=None) -> HPolytope:
    """Proj_E K as an h-polytope: normals on a direction set of E, offsets h_K."""
    dirs = sphere_directions(E.dim) if directions is None else _unit(directions)
    return HPolytope(dirs, K._support(dirs @ E.basis))


class MarginalDensity(Density):
    """x ↦ Vol(K ∩ (E⊥ + x)) on E (in E coordinates).

    Fibers of dimension one use exact chord lengths; higher-dimensional
    fibers use a fixed scrambled Sobol rule on the bounding cube of K.
    """

    name = "marginal"

    def __init__(self, K: Body, E: Subspace, fiber_points: int = 1024, seed: int = 0):
        if E.codim < 1:
            raise ValueError("marginal needs dim(E⊥) >= 1")
        super().__init__(E.dim, "line-s-concave", float(E.codim), projection_body(K, E))
        self.K, self.E = K, E
        self.R = K.r_out
        if E.codim > 1:
            m = int(math.ceil(math.log2(fiber_points)))
            u = qmc.Sobol(E.codim, scramble=True, seed=seed).random_base2(m)
            self._fiber = (2 * u - 1) * self.R
            self._fiber_vol = (2 * self.R) ** E.codim

    def _chords(self, P, d):
        """Length of {z : P + z d ∈ K} for rows P and unit direction d."""
        F = self.K.facets()
        if F is not None:
            A, b = F
            ad = A @ d
            slack = b[None, :] - P @ A.T
            with np.errstate(divide="ignore", invalid="ignore"):
                q = slack / ad[None, :]
            hi = np.min(np.where(ad[None, :] > 1e-15, q, np.inf), axis=1)
            lo = np.max(np.where(ad[None, :] < -1e-15, q, -np.inf), axis=1)
            # a facet parallel to d excludes the whole line when violated
            par = np.abs(ad) <= 1e-15
            blocked = np.any(slack[:, par] < 0, axis=1)
            return np.where(blocked, 0.0, np.clip(hi - lo, 0.0, None))
        # convex in z: golden-section minimum, then bisection to both ends
        R = self.R
        a, c = np.full(len(P), -R), np.full(len(P), R)
        g = lambda z: self.K._gauge(P + z[:, None] * d[None, :])
        phi = (math.sqrt(5) - 1) / 2
        for _ in range(60):
            x1, x2 = c - phi * (c - a), a + phi * (c - a)
            left = g(x1) < g(x2)
            c = np.where(left, x2, c)
            a = np.where(left, a, x1)
        zmin = 0.5 * (a + c)
        inside = g(zmin) <= 1.0
        out = np.zeros(len(P))
        if not np.any(inside):
            return out
        Pi, zi = P[inside], zmin[inside]

        def edge(sign):
            lo, hi = zi.copy(), np.full(len(zi), sign * 2 * R)
            for _ in range(60):
                mid = 0.5 * (lo + hi)
                ok = self.K._gauge(Pi + mid[:, None] * d[None, :]) <= 1.0
                lo = np.where(ok, mid, lo)
                hi = np.where(ok, hi, mid)
            return lo

        out[inside] = edge(1.0) - edge(-1.0)
        return out

    def _eval(self, Y):
        P = np.asarray(Y, dtype=float) @ self.E.basis
        if self.E.codim == 1:
            return self._chords(P, self.E.complement[0])
        out = np.empty(len(P))
        Z = self._fiber @ self.E.complement
        block = max(1, (1 << 18) // len(Z))
        for i in range(0, len(P), block):
            Q = (P[i:i + block, None, :] + Z[None, :, :]).reshape(-1, P.shape[1])
            inside = (self.K._gauge(Q) <= 1.0).reshape(-1, len(Z))
            out[i:i + block] = self._fiber_vol * inside.mean(axis=1)
        return out

    def radial_moments(self, theta, k, panels: int = 4, order: int = 8):
        """Composite Gauss-Legendre moments along rays up to the support radius."""
        R = self.support_radius(theta)
        t, w = gauss_legendre(order)
        u = ((np.arange(panels)[:, None] + t[None, :]).ravel()) / panels
        wu = np.tile(w, panels) / panels
        r = R[:, None] * u[None, :]
        vals = self.ray(theta, r) * r ** k
        return (vals * wu[None, :]).sum(axis=1) * R


def projection_marginal(K: Body, E: Subspace, **kw) -> MarginalDensity:
    if E.dim < 1:
        raise ValueError("subspace must have positive dimension")
    return MarginalDensity(K, E, **kw)


def marginal_moment_check(K: Body, E: Subspace, n_samples=20_000, seed=0, n_pairs=3) -> Report:
    """Second moments of the marginal on E against the E-block of K's moments.

    The marginal side integrates f (evaluated fiber by fiber) against
    uniform samples on Proj_E K; the body side uses exact moments when
    available and otherwise uniform samples in K.
    """
    f = projection_marginal(K, E)
    from .sampling import _density_draw
    X, w = _density_draw(f, n_samples, seed)
    S = K.second_moment()
    vol = volume(K).value
    if S is None:
        Y = uniform_sample(K, n_samples, seed + 1)
        S, S_err = Y.T @ Y / len(Y), None
    rng = np.random.default_rng(np.random.SeedSequence([seed, 5]))
    rep = Report("prop-5.2", getattr(K, "label", K.kind), {"n_samples": n_samples, "seed": seed, "dim_E": E.dim})
    worst = 0.0
    pairs = []
    for _ in range(n_pairs):
        t1, t2 = _unit(rng.standard_normal((2, E.dim)))
        vals = w * (X @ t1) * (X @ t2)
        lhs = Estimate(vals.mean(), vals.std(ddof=1) / math.sqrt(len(vals)), len(vals), seed)
        rhs = vol * float((t1 @ E.basis) @ S @ (t2 @ E.basis))
        z = abs(lhs.value - rhs) / max(lhs.std_error, 1e-300)
        worst = max(worst, z)
        pairs.append({"marginal": lhs, "body": rhs})
    rep.values.update(pairs=pairs, worst_sigma=worst)
    rep.check("marginal moment identity within 3 sigma", worst <= 3.0, f"worst {worst:.3g} sigma")
    return rep


def projection_perturb(K: Body, E: Subspace, quad=None, check: bool = True) -> PerturbationResult:
    """T = K_f for the marginal f of K on E; d_G(Proj_E K, T) and L_T."""
    if E.codim < 1:
        raise ValueError("E must be a proper subspace: dim(E⊥) = 0 makes s = 0")
    if E.dim < 2:
        raise ValueError("projection perturbation needs dim(E) >= 2")
    if K.dim > 5:
        raise ValueError("projection perturbation supported for dim <= 5")
    if check:
        _check_isotropic(K)
    f = projection_marginal(K, E)
    T = body_from_density(f)
    quad = sphere_quadrature(E.dim) if quad is None else quad
    rho = 1.0 / T._gauge(quad.points)
    L_T = star_body_isotropic_constant(rho, quad)
    P = f.support_body
    d_G = geometric_distance(P, T)
    nf = norm_functionals(P)
    lam = E.dim / K.dim
    extra = {"lambda": lam, "s": float(E.codim), "f0": float(f.f0),
             "d_G_lambda_over_1_minus_lambda": d_G.value * lam / (1 - lam)}
    return PerturbationResult(P, float(E.codim) / E.dim, nf.M, nf.M_star, nf.M_prime, T, L_T, d_G,
                              Estimate(1.0, 0.0), {}, extra)


# ---------------------------------------------------------------------------
# near-origin perturbation

class NearOriginError(ValueError):
    """A hypothesis of the near-origin perturbation failed; ``kind`` says which."""

    def __init__(self, kind: str, message: str):
        super().__init__(f"{kind}: {message}")
        self.kind = kind


def log_volume_profile(K: Body, ts, n_samples=100_000, seed=0):
    """Estimates of log Vol(K ∩ tD) on a grid of t, from shared uniform samples.

    Returns (log volumes, standard errors, second-difference z-scores); a
    concave profile has no second difference above +3 sigma.
    """
    ts = np.asarray(ts, dtype=float)
    vol = volume(K).value
    X = uniform_sample(K, n_samples, seed)
    r = np.linalg.norm(X, axis=1)
    H = (r[:, None] <= ts[None, :]).astype(float)
    p = H.mean(axis=0)
    with np.errstate(divide="ignore"):
        logv = np.log(vol * p)
    se = np.sqrt(p * (1 - p) / len(X)) / np.maximum(p, 1e-300)
    z = []
    for i in range(1, len(ts) - 1):
        # second difference of log p on a uniform grid; jackknife-free bound
        L = np.log(np.maximum(H[:, [i - 1, i, i + 1]].mean(axis=0), 1e-300))
        d2 = L[0] - 2 * L[1] + L[2]
        s = math.sqrt(se[i - 1] ** 2 + 4 * se[i] ** 2 + se[i + 1] ** 2)
        z.append(d2 / s if s > 0 else (math.inf if d2 > 0 else 0.0))
    return logv, se, np.array(z)


def near_origin_perturb(K: Body, gamma: float, beta: float, delta: float, c_prime: float | None = None,
                        n_samples=100_000, seed=0, quad=None):
    """Perturbation for a volume-one body with mass near the origin.

    Hypotheses: K ⊆ beta n D and Vol(K ∩ gamma sqrt(n) D) > exp(-delta sqrt(n)).
    If K ⊆ 2 gamma sqrt(n) D the body itself is returned (trivial branch).
    Otherwise C = K ∩ 2 gamma sqrt(n) D, alpha = c' (1 + beta delta / gamma),
    and T = K_F for F = (1 - f)^(alpha n) with f the interpolation gauge
    between C and K.  Returns (PerturbationResult, Report).
    """
    c_prime = CONSTANTS["c_prime"] if c_prime is None else c_prime
    n = K.dim
    vol = volume(K).value
    if abs(vol - 1) > 1e-2:
        raise NearOriginError("volume", f"body must have volume one (got {vol:.6g})")
    if K.r_out > beta * n * (1 + 1e-12):
        raise NearOriginError("containment", f"K is not inside {beta} n D (r_out = {K.r_out:.6g})")
    rad = gamma * math.sqrt(n)
    X = uniform_sample(K, n_samples, seed)
    hits = (np.linalg.norm(X, axis=1) <= rad).astype(float)
    near = Estimate(vol * hits.mean(), vol * hits.std(ddof=1) / math.sqrt(len(X)), len(X), seed)
    threshold = math.exp(-delta * math.sqrt(n))
    if not near.value > threshold:
        raise NearOriginError("mass", f"Vol(K ∩ gamma sqrt(n) D) = {near.value:.6g} <= {threshold:.6g}")
    quad = sphere_quadrature(n) if quad is None else quad
    rep = Report("prop-5.3", getattr(K, "label", K.kind),
                 {"gamma": gamma, "beta": beta, "delta": delta, "c_prime": c_prime, "seed": seed})
    rep.values.update(near_mass=near, mass_threshold=threshold)
    nf = norm_functionals(K)
    if K.r_out <= 2 * rad:
        L = isotropic_constant_body(K, n_samples, seed)
        res = PerturbationResult(K, 1.0, nf.M, nf.M_star, nf.M_prime, K, L, Estimate.exact(1.0),
                                 Estimate.exact(1.0), {"c_prime": c_prime}, {"branch": "trivial"})
        rep.values.update(branch="trivial", L_T=L)
        rep.check("L_K <= threshold * gamma", L.value <= CONSTANTS["near_origin_L_over_gamma"] * gamma)
        return res, rep
    C = Intersection(K, Ball(n, 2 * rad))
    bound = 1 + beta * delta / gamma
    alpha = c_prime * bound
    F = InterpolationDensity(K, C, alpha * n, gauge=InterpolationGauge(K, C))
    T = body_from_density(F)
    rho = 1.0 / T._gauge(quad.points)
    L_T = star_body_isotropic_constant(rho, quad)
    d_G = geometric_distance(K, T)
    surface = None
    if n <= 4:
        P = polytope_fit(C)
        surface = mixed_volume_first(K, P) / P.exact_volume()
    ts = np.linspace(0.25, 1.0, 7) * K.r_out
    _, _, z = log_volume_profile(K, ts, n_samples, seed + 1)
    res = PerturbationResult(K, alpha, nf.M, nf.M_star, nf.M_prime, T, L_T, d_G, Estimate.exact(1.0),
                             {"c_prime": c_prime}, {"branch": "full", "surface_ratio": surface,
                                                    "surface_bound": bound})
    rep.values.update(branch="full", alpha=alpha, L_T=L_T, d_G=d_G, surface_ratio=surface,
                      surface_bound=bound, log_concavity_max_z=float(np.max(z)) if len(z) else 0.0)
    if surface is not None:
        rep.check("surface bound V(K,1;C,n-1)/Vol(C) <= 1 + beta delta / gamma", surface < bound,
                  f"margin {bound - surface:.4g}")
    rep.check("log Vol(K ∩ tD) concave within 3 sigma", np.all(z <= 3.0))
    rep.check("L_T <= threshold * gamma", L_T.value <= CONSTANTS["near_origin_L_over_gamma"] * gamma)
    rep.check("finite distance", math.isfinite(d_G.value))
    return res, rep
