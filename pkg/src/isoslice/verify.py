"""Verification suite: one check routine per result id, run over a corpus."""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np
from scipy.integrate import quad as adaptive_quad

from .constants import LEDGER, resolve
from .convex_bodies import Ball, Body, Box, beta_integral, binom_bounds, unit_ball_volume
from .estimate import Estimate
from .io import default_corpus, labelled, quasi_corpus
from .logconcave import (
    BoundViolation, RadialProfile, busemann_check, density_corpus, distance_support_check,
    exp_gauge, indicator, l_equivalence_check, lemma_bounds, ln_comparison_report,
    one_dim_moment_bounds, power,
)
from .pipeline import mass_concentration_check, perturb_body
from .quasi import (
    QuasiBody, tail_constant_grid, one_dim_tail_bound, quasi_L_bound_check, quasi_perturb,
    quasi_tail_mass_check,
)
from .report import Report
from .sampling import isotropic_transform, volume
from .sections import (
    NearOriginError, Subspace, marginal_moment_check, near_origin_perturb, projection_perturb,
    section_volume_check,
)

__all__ = ["IDS", "Corpus", "VerificationSuite", "run_verify", "UnknownId"]

IDS = ("eq3", "eq4", "lem-2.2", "lem-2.3", "lem-2.4", "thm-2.1", "cor-2.5", "prop-3.1", "cor-3.2",
       "thm-1.2", "lem-4.1", "lem-4.2", "lem-4.3", "thm-1.4", "lem-5.1", "prop-5.2", "prop-5.3")


class UnknownId(ValueError):
    pass


@dataclass
class Corpus:
    """Bodies grouped by dimension, plus the quasi-convex bodies."""

    bodies: dict            # dim -> list of Body
    quasi: dict             # dim -> list of QuasiBody
    densities: dict | None = None   # dim -> list of Density; None = derived

    @classmethod
    def default(cls, dims=(2, 3, 4), quasi_dims=(2, 3)) -> "Corpus":
        return cls({n: default_corpus(n) for n in dims}, {n: quasi_corpus(n) for n in quasi_dims})

    @classmethod
    def from_bodies(cls, bodies) -> "Corpus":
        by_dim, q = {}, {}
        for i, b in enumerate(bodies):
            if not getattr(b, "label", None):
                labelled(b, f"{b.kind}#{i}")
            by_dim.setdefault(b.dim, []).append(b)
            q.setdefault(b.dim, []).append(QuasiBody([b], C=1.0, label=b.label))
        dens = {n: [d for K in bs for d in (indicator(K), power(K, 2 * n), exp_gauge(K))]
                for n, bs in by_dim.items()}
        return cls(by_dim, q, dens)

    def density_family(self, n):
        if self.densities is not None:
            return self.densities.get(n, [])
        return density_corpus(n)

    def dims(self, limit=None):
        return sorted(n for n in self.bodies if limit is None or n <= limit)


@dataclass
class VerificationSuite:
    ids: list
    reports: list = field(default_factory=list)
    constants: dict = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return all(r.passed for r in self.reports)

    def to_dict(self) -> dict:
        ledger = {k: {"value": self.constants[k], "default": LEDGER[k]["value"], "role": LEDGER[k]["role"]}
                  for k in sorted(self.constants)}
        return {"ids": list(self.ids), "passed": self.passed, "constants": ledger,
                "reports": [r.to_dict() for r in sorted(self.reports, key=lambda r: (r.id, r.body))]}


def _label(x, n=None):
    name = getattr(x, "label", None) or getattr(x, "name", None) or getattr(x, "kind", "?")
    if n is not None and not str(name).endswith(f":{n}"):
        name = f"{name}:{n}"
    return str(name)


def _family(label: str) -> str:
    """The label without its dimension field, e.g. lp:3:1.5 -> lp:1.5.

    Random polytopes, whose size grows with n, form a single family.
    """
    parts = label.split(":")
    if len(parts) < 2 or parts[0].startswith("random"):
        return parts[0]
    return ":".join([parts[0]] + parts[2:])


def _volume_one(K: Body) -> Body:
    from .convex_bodies import LinearMap, apply_linear

    v = volume(K).value
    return apply_linear(K, LinearMap.scaling(K.dim, v ** (-1.0 / K.dim)))


# ---------------------------------------------------------------------------
# individual ids

def check_eq3(ctx):
    """(n/k)^k <= C(n,k) < (en/k)^k; the lower side is compared in exact
    rational arithmetic (it is an equality for k = 1 and k = n)."""
    rep = Report("eq3", "exact", {"n_max": 60})
    bad = []
    for n in range(1, 61):
        for k in range(1, n + 1):
            _, c, hi = binom_bounds(n, k)
            if not (Fraction(n, k) ** k <= c < hi):
                bad.append((n, k))
    rep.values.update(pairs=60 * 61 // 2, violations=len(bad))
    rep.check("(n/k)^k <= C(n,k) < (en/k)^k for 1 <= k <= n <= 60", not bad, str(bad[:5]))
    return [rep]


def check_eq4(ctx):
    rep = Report("eq4", "exact", {"max_degree": 20})
    worst = 0.0
    for a in range(21):
        for b in range(21 - a):
            ref, _ = adaptive_quad(lambda s: s ** a * (1 - s) ** b, 0, 1, epsabs=0, epsrel=2e-14, limit=200)
            worst = max(worst, abs(beta_integral(a, b) - ref) / ref)
    rep.values["max_relative_error"] = worst
    rep.check("beta integral matches adaptive quadrature to 1e-12", worst <= 1e-12)
    return [rep]


def check_lem22(ctx):
    reports, table = [], {}
    for n in ctx.corpus.dims(4):
        for K in ctx.corpus.bodies[n]:
            for mult in (2, 4, 10):
                s = mult * n
                rep = distance_support_check(power(K, s), K)
                rep.body = f"{_label(K, n)}/s={s}"
                reports.append(rep)
                table.setdefault(_family(_label(K)), []).append(rep.values["containment_n_over_s"])
    for fam, vals in sorted(table.items()):
        rep = Report("lem-2.2", f"stability:{fam}", {"s_multiples": [2, 4, 10], "dims": ctx.corpus.dims(4)})
        ratio = max(vals) / min(vals)
        rep.values.update(containment_n_over_s=vals, spread=ratio)
        rep.check("d n / s varies by less than 2x", ratio < 2.0, f"max/min = {ratio:.4g}")
        reports.append(rep)
    return reports


def check_lem24(ctx):
    reports = []
    rep = Report("lem-2.4", "equality-cases", {"dims": list(range(1, 9))})
    worst_lo = worst_hi = 0.0
    for n in range(1, 9):
        lo, _ = lemma_bounds(n)
        ind = RadialProfile(lambda t: (t <= 1.0).astype(float), 1.0, True)
        _, r, _ = one_dim_moment_bounds(ind, n)
        worst_lo = max(worst_lo, abs(r / lo - 1))
        ex = RadialProfile(lambda t: np.exp(-t), math.inf, True)
        _, r, hi = one_dim_moment_bounds(ex, n)
        worst_hi = max(worst_hi, abs(r / hi - 1))
    rep.values.update(indicator_rel_error=worst_lo, exponential_rel_error=worst_hi)
    rep.check("indicator attains the lower bound to 1e-9", worst_lo <= 1e-9)
    rep.check("exponential attains the upper bound to 1e-9", worst_hi <= 1e-9)
    reports.append(rep)
    rng = np.random.default_rng(np.random.SeedSequence([ctx.seed, 24]))
    generic = [("gaussian", lambda t: np.exp(-t * t), math.inf),
               ("power-2", lambda t: np.clip(1 - t, 0, None) ** 2, 1.0),
               ("logistic-like", lambda t: 2 / (1 + np.exp(t)), math.inf)]
    for name, g, R in generic:
        rep = Report("lem-2.4", name, {"dims": list(range(1, 9))})
        inside = True
        for n in range(1, 9):
            try:
                lo, r, hi = one_dim_moment_bounds(RadialProfile(g, R, True), n)
            except BoundViolation as exc:
                inside = False
                rep.values[f"n={n}"] = str(exc)
                continue
            inside &= lo * (1 + 1e-9) < r < hi * (1 - 1e-9)
            rep.values[f"n={n}"] = r
        rep.check("generic log-concave profile strictly inside", inside)
        reports.append(rep)
    for n in ctx.corpus.dims(4):
        for f in ctx.corpus.density_family(n):
            theta = rng.standard_normal(n)
            rep = Report("lem-2.4", _label(f, n), {"theta": theta / np.linalg.norm(theta)})
            try:
                lo, r, hi = one_dim_moment_bounds(RadialProfile.from_density(f, theta), n)
                rep.values.update(lower=lo, ratio=r, upper=hi)
                rep.check("ratio within bounds", True)
            except BoundViolation as exc:
                rep.check("ratio within bounds", False, str(exc))
            reports.append(rep)
    return reports


def _density_dims(ctx):
    return [n for n in ctx.corpus.dims() if n in (2, 3)] or ctx.corpus.dims(3)


def check_thm21(ctx):
    reports = []
    for n in _density_dims(ctx):
        for f in ctx.corpus.density_family(n):
            rep = busemann_check(f, ctx.samples(10_000), ctx.seed)
            rep.body = _label(f, n)
            reports.append(rep)
    return reports


def check_lem23(ctx):
    reports = []
    for n in _density_dims(ctx):
        for f in ctx.corpus.density_family(n):
            rep = l_equivalence_check(f, ctx.samples(200_000), ctx.seed)
            rep.body = _label(f, n)
            r = rep.values["ratio"]
            rep.check("L_Kf / L_f in [1/3, 3]", 1 / 3 <= r.value - 3 * r.std_error and r.value + 3 * r.std_error <= 3)
            if f.name == "indicator":
                rep.check("indicator ratio equals one within 3 sigma", r.within(1.0))
            reports.append(rep)
    return reports


def check_cor25(ctx):
    reports = []
    for n in _density_dims(ctx):
        rep = ln_comparison_report(ctx.corpus.density_family(n), ctx.samples(200_000), ctx.seed)
        rep.body = f"family:{n}"
        reports.append(rep)
    return reports


def check_prop31(ctx):
    reports = []
    c = ctx.constants
    for n in ctx.corpus.dims(4):
        for K in ctx.corpus.bodies[n]:
            _, Kt = isotropic_transform(K, ctx.samples(100_000), ctx.seed)
            rep = mass_concentration_check(Kt, c["c_alpha"], ctx.samples(200_000), ctx.seed)
            rep.body = _label(K, n)
            reports.append(rep)
    return reports


def _perturbations(ctx):
    if ctx.cache.get("perturb") is None:
        out = []
        for n in ctx.corpus.dims(4):
            for K in ctx.corpus.bodies[n]:
                out.append((K, perturb_body(K, ctx.constants["c_alpha"], ctx.samples(100_000), ctx.seed)))
        ctx.cache["perturb"] = out
    return ctx.cache["perturb"]


def check_cor32(ctx):
    reports = []
    c = ctx.constants
    for K, res in _perturbations(ctx):
        rep = res.to_report("cor-3.2", _label(K), {"seed": ctx.seed})
        core_share = 1.0 / res.mass_ratio.value
        err = res.mass_ratio.std_error / res.mass_ratio.value ** 2
        rep.values.update(core_share=Estimate(core_share, err, res.mass_ratio.n_samples, ctx.seed))
        rep.check("core carries more than half of F by 3 sigma", core_share - 0.5 > 3 * err)
        prod = res.extra["E_norm_sq_M_prime_sq"]
        rep.check("E|x|^2 M'^2 bounded", prod <= c["second_moment_product_max"], f"{prod:.4g}")
        lo, hi = c["L_T_range"]
        rep.check("L_F (via L_T) in band", lo <= res.L_T.value <= hi)
        reports.append(rep)
    return reports


def check_thm12(ctx):
    reports = []
    c = ctx.constants
    for K, res in _perturbations(ctx):
        rep = res.to_report("thm-1.2", _label(K), {"seed": ctx.seed})
        d = res.d_G.value
        rep.check("finite distance", math.isfinite(d))
        rep.check("d_G <= factor * alpha", d <= c["dG_over_alpha_max"] * res.alpha, f"d_G = {d:.4g}")
        lo, hi = c["L_T_range"]
        rep.check("L_T in band", lo <= res.L_T.value <= hi, f"L_T = {res.L_T.value:.4g}")
        if isinstance(K, Ball):
            # the core is the whole ball, so F is the indicator and the ratio is one
            rep.check("ball: mass ratio equals 1", abs(res.mass_ratio.value - 1.0) <= 1e-9)
        else:
            rep.check("mass ratio > 1", res.mass_ratio.value > 1.0)
        if isinstance(K, Ball):
            n = K.dim
            L_ball = math.sqrt(1 / (n + 2)) * unit_ball_volume(n) ** (-1 / n)
            rep.values["L_ball"] = L_ball
            rep.check("ball: d_G <= 1.05", d <= 1.05)
            rep.check("ball: L_T equals L_ball within 3 sigma", res.L_T.within(L_ball))
        reports.append(rep)
    return reports


def check_lem41(ctx):
    rows = tail_constant_grid()
    c1 = ctx.constants["c1_tail"]
    rep = Report("lem-4.1", "grid", {"c1": c1, "points": len(rows)})
    ok = all(one_dim_tail_bound(r["a"], r["b"], r["alpha"], r["n"], c1)[2] for r in rows)
    vals = [r["c1_min"] for r in rows]
    spread = max(vals) / min(vals)
    rep.values.update(c1_min_max=max(vals), c1_min_min=min(vals), spread=spread)
    rep.check("tail bound holds on the grid", ok)
    rep.check("minimal c1 stable (max/min < 3)", spread < 3.0, f"max/min = {spread:.4g}")
    return [rep]


def _quasi_bodies(ctx):
    return [(n, Q) for n in sorted(ctx.corpus.quasi) if n <= 3 for Q in ctx.corpus.quasi[n]]


def check_lem42(ctx):
    reports = []
    c = ctx.constants
    for n, Q in _quasi_bodies(ctx):
        rep = quasi_tail_mass_check(Q, None, ctx.samples(200_000), ctx.seed, c["c1_tail_mass"])
        reports.append(rep)
    return reports


def check_lem43(ctx):
    return [quasi_L_bound_check(Q, None, ctx.samples(200_000), ctx.seed) for _, Q in _quasi_bodies(ctx)]


def check_thm14(ctx):
    reports = []
    c = ctx.constants
    for n, Q in _quasi_bodies(ctx):
        res = quasi_perturb(Q, c["c3"], ctx.samples(100_000), ctx.seed)
        rep = res.to_report("thm-1.4", Q.label, {"seed": ctx.seed})
        rep.check("finite distance", math.isfinite(res.d_G.value))
        rep.check("L_T below threshold", res.L_T.value <= c["quasi_L_max"])
        rep.check("mass ratio at least one", res.mass_ratio.value >= 1 - 1e-9)
        # T need not be convex, but conv T ⊆ d_G(conv K, T) T gives a quasi-triangle inequality
        rng = np.random.default_rng(np.random.SeedSequence([ctx.seed, 14]))
        X, Y = rng.standard_normal((2, 2000, n))
        g = res.T._gauge
        excess = float(np.max(g(X + Y) / (g(X) + g(Y))))
        rep.values["max_triangle_ratio"] = excess
        rep.check("quasi-triangle inequality with constant d_G", excess <= res.d_G.value * (1 + 1e-8))
        reports.append(rep)
    return reports


def check_lem51(ctx):
    reports = []
    for n in ctx.corpus.dims():
        if n < 3:
            continue
        for K in ctx.corpus.bodies[n]:
            rep = section_volume_check(K, seed=ctx.seed, n_samples=ctx.samples(100_000))
            rep.body = _label(K, n)
            reports.append(rep)
    return reports


def check_prop52(ctx):
    reports = []
    c = ctx.constants
    for n in ctx.corpus.dims(4):
        if n < 3:
            continue
        for K in ctx.corpus.bodies[n]:
            _, Kt = isotropic_transform(K, ctx.samples(100_000), ctx.seed)
            E = Subspace.random(n, 2, ctx.seed)
            rep = marginal_moment_check(Kt, E, ctx.samples(20_000), ctx.seed)
            rep.body = _label(K, n)
            res = projection_perturb(Kt, E)
            rep.values.update(L_T=res.L_T, d_G=res.d_G)
            rep.check("projection d_G below threshold", res.d_G.value <= c["projection_dG_max"])
            reports.append(rep)
    return reports


def near_origin_cases(ctx):
    """(label, body, gamma, beta, delta) cases; default corpus uses a ball
    (trivial branch) and an elongated box (full branch) in dimension 3."""
    if ctx.user_corpus:
        return [(_label(K, n), _volume_one(K), 0.5, 1.1, 1.0)
                for n in ctx.corpus.dims() for K in ctx.corpus.bodies[n]]
    w = 1 / math.sqrt(24)
    return [("ball:3", _volume_one(Ball(3)), 0.5, 1.1, 1.0),
            ("elongated-box:3", Box([3.0, w, w]), 0.5, 1.1, 1.0)]


def check_prop53(ctx):
    reports = []
    for label, K, g, b, d in near_origin_cases(ctx):
        try:
            _, rep = near_origin_perturb(K, g, b, d, ctx.constants["c_prime"], ctx.samples(100_000), ctx.seed)
        except NearOriginError as exc:
            rep = Report("prop-5.3", label, {"gamma": g, "beta": b, "delta": d})
            rep.values["hypothesis"] = exc.kind
            rep.check(f"hypothesis ({exc.kind})", False, str(exc))
        rep.body = label
        reports.append(rep)
    return reports


CHECKS = {
    "eq3": check_eq3, "eq4": check_eq4, "lem-2.2": check_lem22, "lem-2.3": check_lem23,
    "lem-2.4": check_lem24, "thm-2.1": check_thm21, "cor-2.5": check_cor25,
    "prop-3.1": check_prop31, "cor-3.2": check_cor32, "thm-1.2": check_thm12,
    "lem-4.1": check_lem41, "lem-4.2": check_lem42, "lem-4.3": check_lem43, "thm-1.4": check_thm14,
    "lem-5.1": check_lem51, "prop-5.2": check_prop52, "prop-5.3": check_prop53,
}
assert set(CHECKS) == set(IDS)


@dataclass
class _Context:
    corpus: Corpus
    seed: int
    constants: dict
    budget: int | None
    user_corpus: bool
    cache: dict = field(default_factory=dict)

    def samples(self, default):
        return default if self.budget is None else int(self.budget)


def run_verify(ids=None, corpus: Corpus | None = None, seed: int = 0, samples: int | None = None,
               constants: dict | None = None) -> VerificationSuite:
    """Run the checks for ``ids`` (all ids when None) and collect their reports."""
    ids = list(IDS) if not ids else list(ids)
    unknown = [i for i in ids if i not in CHECKS]
    if unknown:
        raise UnknownId(f"unknown id(s): {', '.join(unknown)}")
    ctx = _Context(corpus or Corpus.default(), int(seed), resolve(constants), samples, corpus is not None)
    suite = VerificationSuite(ids, [], ctx.constants)
    for i in ids:
        suite.reports.extend(CHECKS[i](ctx))
    return suite
