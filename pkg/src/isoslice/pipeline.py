"""Perturbing a body to one with bounded isotropic constant.

Given K (positioned), the core C = K ∩ (1/M′)D and the interpolation gauge
f_K between C and K define the density F = (1 - f_K)^(alpha n), and the
perturbed body is T = K_F.  Radial moments of F use the level-set identity

    integral_0^inf F(r theta) r^k dr
        = integral_0^1 m (1 - t)^(m - 1) rho_t(theta)^(k + 1) / (k + 1) dt,

m = alpha n, rho_t the radial function of (1 - t) C + t K, evaluated with
Gauss-Jacobi nodes for the weight (1 - t)^(m - 1).
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.spatial import ConvexHull, HalfspaceIntersection

from .constants import CONSTANTS
from .convex_bodies import (
    Ball, Body, HPolytope, Intersection, InterpolationGauge, LinearMap, apply_linear,
    geometric_distance, sphere_directions, _unit,
)
from .estimate import Estimate
from .logconcave import Density, DensityBody, body_from_density
from .quadrature import gauss_jacobi_unit
from .report import Report
from .sampling import (
    SphereQuadrature, fine_quadrature, isotropic_transform, norm_functionals, sphere_quadrature,
    star_body_isotropic_constant, turning, uniform_sample, volume,
)

__all__ = [
    "PerturbationResult", "InterpolationDensity", "core_body", "build_F",
    "mass_concentration_check", "mixed_volume_first", "polytope_fit",
    "facet_areas", "perturb_body", "perturb_positioned", "JACOBI_ORDER",
]

JACOBI_ORDER = 48


@dataclass
class PerturbationResult:
    """Outcome of one perturbation run."""

    K: Body
    alpha: float
    M: float
    M_star: float
    M_prime: float
    T: Body
    L_T: Estimate
    d_G: Estimate
    mass_ratio: Estimate
    constants: dict = field(default_factory=dict)
    extra: dict = field(default_factory=dict)
    position: LinearMap | None = None

    def __post_init__(self):
        if not self.alpha > 0:
            raise ValueError("alpha must be positive")

    def to_report(self, id="thm-1.2", body="", params=None) -> Report:
        rep = Report(id, body, dict(params or {}), {})
        rep.params["constants"] = dict(self.constants)
        rep.values.update(alpha=self.alpha, M=self.M, M_star=self.M_star, M_prime=self.M_prime,
                          M_M_star=self.M * self.M_star, L_T=self.L_T, d_G=self.d_G,
                          mass_ratio=self.mass_ratio)
        rep.values.update(self.extra)
        return rep


# ---------------------------------------------------------------------------

def core_body(K: Body, M_prime: float) -> Body:
    """K ∩ (1/M′) D, or K itself when K already lies in that ball."""
    if not M_prime > 0:
        raise ValueError("M′ must be positive")
    R = 1.0 / M_prime
    if K.r_out <= R * (1 + 1e-12):
        return K
    return Intersection(K, Ball(K.dim, R))


class InterpolationDensity(Density):
    """(1 - f(x))^m on K, zero outside, for the interpolation gauge f
    between a core C ⊆ K and K.  Concave to the power 1/m along lines
    through the origin."""

    name = "interpolation"

    def __init__(self, K: Body, C: Body, exponent: float, order: int = JACOBI_ORDER,
                 gauge: InterpolationGauge | None = None):
        super().__init__(K.dim, "line-s-concave", float(exponent), K)
        if exponent <= 0:
            raise ValueError("exponent must be positive")
        self.K, self.C = K, C
        self.m = float(exponent)
        self.fK = gauge if gauge is not None else InterpolationGauge(K, C)
        self.order = order

    def _eval(self, X):
        out = np.zeros(len(X))
        inside = self.K._gauge(X) <= 1.0
        if np.any(inside):
            out[inside] = (1.0 - self.fK(X[inside], tol=1e-9)) ** self.m
        return out

    @property
    def f0(self):
        return 1.0

    def level_moments(self, theta, k):
        t, w = gauss_jacobi_unit(self.order, self.m - 1.0)
        rho = self.fK.level_radial(theta, t)
        return rho ** (k + 1) @ w / (k + 1)

    def radial_moments(self, theta, k):
        return self.level_moments(theta, k)


def build_F(K: Body, alpha: float, M_prime: float | None = None, **kw) -> InterpolationDensity:
    """F = (1 - f_K)^(alpha n) with core K ∩ (1/M′) D."""
    if not alpha > 0:
        raise ValueError("alpha must be positive")
    if M_prime is None:
        M_prime = norm_functionals(K).M_prime
    return InterpolationDensity(K, core_body(K, M_prime), alpha * K.dim, **kw)


# ---------------------------------------------------------------------------
# polytope fits and mixed volumes

def polytope_fit(C: Body, directions=None) -> HPolytope:
    """Circumscribed h-polytope with facet normals on a direction set."""
    dirs = sphere_directions(C.dim) if directions is None else _unit(directions)
    parts = [dirs]
    F = C.facets()
    if F is not None:
        parts.append(F[0])
    N = np.concatenate(parts)
    # drop repeated normals, which would otherwise count a facet twice
    _, first = np.unique(np.round(N, 9), axis=0, return_index=True)
    N = N[np.sort(first)]
    return HPolytope(N, C._support(N))


def facet_areas(P: Body):
    """Unit normals, offsets and (n-1)-volumes of the facets of a polytope."""
    F = P.facets()
    V = P.vertices()
    if F is None or V is None:
        raise TypeError("facet areas need an h-polytope")
    N, b = F
    n = P.dim
    scale = float(np.max(np.abs(b)))
    areas = np.zeros(len(N))
    on = np.abs(V @ N.T - b[None, :]) <= 1e-9 * scale
    for i in range(len(N)):
        pts = V[on[:, i]]
        if len(pts) < n:
            continue
        # orthonormal basis of the facet hyperplane
        Q, _ = np.linalg.qr(np.column_stack([N[i], np.eye(n)]))
        Y = (pts - pts.mean(axis=0)) @ Q[:, 1:n]
        if n == 2:
            areas[i] = float(np.ptp(Y[:, 0]))
        else:
            try:
                areas[i] = ConvexHull(Y).volume
            except Exception:  # degenerate facet (measure zero)
                areas[i] = 0.0
    return N, b, areas


def mixed_volume_first(K: Body, C: Body) -> float:
    """V(K, 1; C, n-1) = (1/n) sum_i area(F_i) h_K(nu_i) for an h-polytope C."""
    if C.facets() is None:
        raise TypeError("second argument must be an h-polytope")
    if C.dim > 4:
        raise ValueError("facet areas supported for dim <= 4")
    N, _, areas = facet_areas(C)
    keep = areas > 0
    return float(np.sum(areas[keep] * K._support(N[keep])) / C.dim)


# ---------------------------------------------------------------------------
# checks

def _mass_estimates(K: Body, F: InterpolationDensity, n_samples, seed):
    """Shared-sample estimates of ∫F, Vol(core) and 2 Vol(core) - ∫F."""
    vol = volume(K).value
    X = uniform_sample(K, n_samples, seed)
    Fx = F._eval(X)
    inC = (F.C._gauge(X) <= 1.0).astype(float)
    root = math.sqrt(len(X))

    def est(v):
        return Estimate(vol * v.mean(), vol * v.std(ddof=1) / root, len(X), seed)

    return X, Fx, est(Fx), est(inC), est(2 * inC - Fx), est(Fx - inC)


def _quadrature_mass(F: InterpolationDensity, quad: SphereQuadrature):
    n = F.dim
    return quad.surface_area * float(quad.mean(F.level_moments(quad.points, n - 1)))


def mass_concentration_check(K: Body, c_alpha: float | None = None, n_samples=200_000, seed=0,
                             quad: SphereQuadrature | None = None, mixed_volume: bool | None = None) -> Report:
    """∫_K F < 2 Vol(K ∩ (1/M′)D) with alpha = c_alpha M M*, by > 3 sigma."""
    c_alpha = CONSTANTS["c_alpha"] if c_alpha is None else c_alpha
    n = K.dim
    if n > 5:
        raise ValueError("mass check supported for dim <= 5")
    nf = norm_functionals(K)
    alpha = c_alpha * nf.M * nf.M_star
    F = build_F(K, alpha, nf.M_prime)
    _, _, mass, core, gap, excess = _mass_estimates(K, F, n_samples, seed)
    quad = sphere_quadrature(n) if quad is None else quad
    rep = Report("prop-3.1", getattr(K, "label", K.kind),
                 {"c_alpha": c_alpha, "n_samples": n_samples, "seed": seed})
    rep.values.update(M=nf.M, M_star=nf.M_star, M_prime=nf.M_prime, alpha=alpha,
                      integral_F=mass, core_volume=core, margin=gap,
                      integral_F_quadrature=_quadrature_mass(F, quad))
    rep.check("integral F < 2 Vol(core) by 3 sigma", gap.value > 3 * gap.std_error,
              f"margin {gap.value:.6g} ± {gap.std_error:.3g}")
    if mixed_volume is None:
        mixed_volume = n <= 3
    if mixed_volume:
        P = polytope_fit(F.C)
        V0 = P.exact_volume()
        V1 = mixed_volume_first(K, P)
        rep.values.update(V1_over_V0=V1 / V0, bound_2Mprime_Mstar=2 * nf.M_prime * nf.M_star,
                          bound_4M_Mstar=4 * nf.M * nf.M_star)
        rep.check("V1/V0 <= 4 M M*", V1 / V0 <= 4 * nf.M * nf.M_star)
    return rep


# ---------------------------------------------------------------------------
# pipeline

def perturb_positioned(K: Body, alpha: float, M_prime: float, n_samples=100_000, seed=0,
                       quad: SphereQuadrature | None = None, directions=None):
    """Build F and T = K_F for a positioned body; return (F, T, L_T, d_G, mass_ratio, extras)."""
    n = K.dim
    quad = sphere_quadrature(n) if quad is None else quad
    F = build_F(K, alpha, M_prime)
    T = body_from_density(F)
    rho = 1.0 / T._gauge(quad.points)
    L_T = star_body_isotropic_constant(rho, quad)
    d_G = geometric_distance(K, T, directions)
    X, Fx, mass, core, _, _ = _mass_estimates(K, F, n_samples, seed)
    ratio = mass.value / core.value
    # delta method on the ratio of two means from shared samples
    inC = (F.C._gauge(X) <= 1.0).astype(float)
    resid = (Fx - ratio * inC) / inC.mean()
    mass_ratio = Estimate(ratio, resid.std(ddof=1) / math.sqrt(len(X)), len(X), seed)
    r2 = np.einsum("ij,ij->i", X, X)
    second = float(np.sum(Fx * r2) / np.sum(Fx))
    extra = {"E_norm_sq_M_prime_sq": second * M_prime ** 2, "integral_F": mass,
             "core_volume": core, "d_G_over_alpha": d_G.value / alpha,
             "integral_F_quadrature": _quadrature_mass(F, quad)}
    return F, T, L_T, d_G, mass_ratio, extra


def perturb_body(K: Body, c_alpha: float | None = None, n_samples=100_000, seed=0,
                 quad: SphereQuadrature | None = None, exact_position: bool = True) -> PerturbationResult:
    """Position K isotropically, then perturb it with alpha = c_alpha M M*.

    The isotropic position stands in for the l-position; the achieved M M*
    is measured and reported.
    """
    c_alpha = CONSTANTS["c_alpha"] if c_alpha is None else c_alpha
    if c_alpha < 2:
        raise ValueError("c_alpha must be at least 2")
    if K.dim > 5:
        raise ValueError("perturbation supported for dim <= 5")
    A, Kt = isotropic_transform(K, n_samples, seed, exact=exact_position)
    nf = norm_functionals(Kt)
    alpha = c_alpha * nf.M * nf.M_star
    if alpha * K.dim <= K.dim:
        raise ValueError("degenerate exponent alpha n <= n")
    quad = sphere_quadrature(K.dim) if quad is None else quad
    F, T, L_T, d_G, mass_ratio, extra = perturb_positioned(Kt, alpha, nf.M_prime, n_samples, seed, quad)
    extra["norm_grid_error"] = nf.grid_error
    # Bodies whose symmetry axes line up with the sphere rules can hide the
    # resolution error of M', L_T and d_G from the coarse sub-rules.  Rerun
    # the construction on turned copies of both rules and widen the error.
    nt = norm_functionals(Kt, fine_quadrature(K.dim).rotated(seed))
    Tt = body_from_density(build_F(Kt, c_alpha * nt.M * nt.M_star, nt.M_prime))
    qt = quad.rotated(seed)
    L_turned = star_body_isotropic_constant(1.0 / Tt._gauge(qt.points), qt).value
    L_T = Estimate(L_T.value, max(L_T.std_error, abs(L_T.value - L_turned)), L_T.n_samples, None)
    d_turned = geometric_distance(Kt, Tt, sphere_directions(K.dim) @ turning(K.dim, seed).T).value
    d_G = Estimate(d_G.value, max(d_G.std_error, abs(d_G.value - d_turned)), d_G.n_samples, None)
    return PerturbationResult(Kt, alpha, nf.M, nf.M_star, nf.M_prime, T, L_T, d_G, mass_ratio,
                              {"c_alpha": c_alpha}, extra, A)
