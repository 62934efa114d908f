"""Acceptance suite: one test per criterion, each printing a single
PASS/FAIL line with its measured quantities and runtime.

Run with ``pytest tests/test_acceptance.py -v``.  Criteria that cannot be
met are marked ``xfail(strict=True)``; the analysis is in the project's
decisions ledger.
"""
import math
import time
from fractions import Fraction

import numpy as np
import pytest
from scipy.integrate import quad as adaptive_quad

from isoslice import cli
from isoslice.constants import CONSTANTS
from isoslice.convex_bodies import (
    Box, LinearMap, apply_linear, beta_integral, binom_bounds, sphere_directions, unit_ball_volume,
)
from isoslice.io import default_corpus
from isoslice.logconcave import body_from_density, indicator
from isoslice.pipeline import perturb_body
from isoslice.quasi import QuasiBody, quasi_perturb
from isoslice.sampling import isotropic_transform, set_threads, uniform_sample
from isoslice.sections import Subspace, marginal_moment_check, near_origin_perturb, projection_perturb
from isoslice.verify import Corpus, run_verify

SEED = 0


class CriterionUnmet(Exception):
    """A criterion that is implemented as stated but not attained."""


class Line:
    """Collects the facts of one criterion and prints its summary line."""

    def __init__(self, capsys, number, budget):
        self.capsys, self.number, self.budget = capsys, number, budget
        self.start = time.perf_counter()

    def emit(self, ok, detail):
        elapsed = time.perf_counter() - self.start
        in_time = self.budget is None or elapsed < self.budget
        status = "PASS" if ok and in_time else "FAIL"
        limit = "" if self.budget is None else f" / < {self.budget:g} s"
        with self.capsys.disabled():
            print(f"\n[criterion {self.number:>2}] {status}: {detail} (runtime {elapsed:.1f} s{limit})")
        return ok and in_time, elapsed


def _failed(reports):
    return [(r.id, r.body, [c.name for c in r.checks if not c.passed]) for r in reports if not r.passed]


def _random_map(n, seed, cond=10.0):
    rng = np.random.default_rng(np.random.SeedSequence([seed, 8, n]))
    U, _ = np.linalg.qr(rng.standard_normal((n, n)))
    V, _ = np.linalg.qr(rng.standard_normal((n, n)))
    return LinearMap(U @ np.diag(np.geomspace(1.0, cond, n)) @ V)


def _z(a, b):
    # exact quantities still carry floating-point rounding
    err = math.hypot(a.std_error, b.std_error) + 1e-12 * max(abs(a.value), abs(b.value))
    return abs(a.value - b.value) / err


# ---------------------------------------------------------------------------

def test_criterion_01_exact_identities(capsys):
    line = Line(capsys, 1, 1.0)
    worst = 0.0
    for a in range(21):
        for b in range(21 - a):
            ref, _ = adaptive_quad(lambda s: s ** a * (1 - s) ** b, 0, 1, epsabs=0, epsrel=2e-14, limit=200)
            worst = max(worst, abs(beta_integral(a, b) - ref) / ref)
    # exact rational comparison; the lower side is an identity at k = 1 and k = n
    bad = []
    for n in range(1, 61):
        for k in range(1, n + 1):
            _, c, hi = binom_bounds(n, k)
            lo = Fraction(n, k) ** k
            lower_ok = lo == c if k in (1, n) else lo < c
            if not (lower_ok and c < hi):
                bad.append((n, k))
    ok, _ = line.emit(worst <= 1e-12 and not bad,
                      f"beta max rel err {worst:.2e} (<= 1e-12); binomial bound violations {len(bad)} of 1830")
    assert ok, (worst, bad[:5])


def test_criterion_02_moment_bound_equality_cases(capsys):
    line = Line(capsys, 2, 5.0)
    suite = run_verify(["lem-2.4"], Corpus.default((2, 3), ()), SEED)
    eq = next(r for r in suite.reports if r.body == "equality-cases")
    generic = [r for r in suite.reports if r.body in ("gaussian", "power-2", "logistic-like")]
    ok, _ = line.emit(suite.passed,
                      f"indicator rel err {eq['indicator_rel_error']:.1e}, exponential rel err "
                      f"{eq['exponential_rel_error']:.1e}; generic profiles strictly inside: "
                      f"{all(r.passed for r in generic)}")
    assert ok, _failed(suite.reports)


def test_criterion_03_indicator_self_consistency(capsys):
    line = Line(capsys, 3, 10.0)
    worst, count = 0.0, 0
    for n in (2, 3, 4):
        U = sphere_directions(n)
        for K in default_corpus(n):
            r = body_from_density(indicator(K))._gauge(U) / K._gauge(U)
            assert np.allclose(r, (n + 2) ** (1 / (n + 2)), rtol=1e-9)
            worst = max(worst, float(r.max() / r.min()) - 1)
            count += 1
    ok, _ = line.emit(worst < 1e-9, f"{count} bodies, max/min gauge ratio - 1 = {worst:.1e} (< 1e-9)")
    assert ok


def test_criterion_04_busemann(capsys):
    line = Line(capsys, 4, 60.0)
    suite = run_verify(["thm-2.1"], Corpus.default((2, 3), ()), SEED)
    pairs = {r.params["pairs"] for r in suite.reports}
    viol = sum(r["violations"] for r in suite.reports)
    ok, _ = line.emit(suite.passed and pairs == {10_000} and len(suite.reports) == 10,
                      f"{len(suite.reports)} densities x 10^4 pairs, violations beyond 1e-8: {viol}")
    assert ok, _failed(suite.reports)


def test_criterion_05_l_equivalence(capsys):
    line = Line(capsys, 5, 300.0)
    suite = run_verify(["lem-2.3"], Corpus.default((2, 3), ()), SEED)
    ratios = [r["ratio"].value for r in suite.reports]
    ok, _ = line.emit(suite.passed and len(suite.reports) == 10,
                      f"L_Kf/L_f in [{min(ratios):.3f}, {max(ratios):.3f}] over {len(ratios)} densities "
                      f"(band [1/3, 3] incl. 3 sigma); indicator ratio = 1 within 3 sigma")
    assert ok, _failed(suite.reports)


def test_criterion_06_distance_stability(capsys):
    line = Line(capsys, 6, 300.0)
    suite = run_verify(["lem-2.2"], Corpus.default((2, 3, 4), ()), SEED)
    stab = [r for r in suite.reports if r.body.startswith("stability:")]
    spread = max(r["spread"] for r in stab)
    ok, _ = line.emit(suite.passed and len(stab) == 7,
                      f"max spread of d_G n/s over s in {{2n,4n,10n}}, n in {{2,3,4}}: {spread:.3f} (< 2)")
    assert ok, _failed(suite.reports)


def test_criterion_07_mass_concentration(capsys):
    line = Line(capsys, 7, 600.0)
    suite = run_verify(["prop-3.1"], Corpus.default((2, 3, 4), ()), SEED, constants={"c_alpha": 16 * math.e})
    # the ball's core is the whole ball, so its margin is exact (zero error)
    sig = min(r["margin"].value / r["margin"].std_error if r["margin"].std_error else math.inf
              for r in suite.reports)
    mv = [r["V1_over_V0"] / r["bound_4M_Mstar"] for r in suite.reports if "V1_over_V0" in r.values]
    ok, _ = line.emit(suite.passed and len(suite.reports) == 21 and len(mv) == 14,
                      f"smallest margin {sig:.1f} sigma (> 3); V1/V0 / (4 M M*) <= {max(mv):.3f} at n <= 3")
    assert ok, _failed(suite.reports)


def test_criterion_08_pipeline(capsys):
    line = Line(capsys, 8, 900.0)
    c = CONSTANTS
    problems, L_range, d_max, z_max = [], [math.inf, -math.inf], 0.0, 0.0
    for n in (2, 3, 4):
        A = _random_map(n, SEED)
        for K in default_corpus(n):
            a = perturb_body(K, c["c_alpha"], 100_000, SEED)
            b = perturb_body(apply_linear(K, A), c["c_alpha"], 100_000, SEED)
            L_range = [min(L_range[0], a.L_T.value), max(L_range[1], a.L_T.value)]
            d_max = max(d_max, a.d_G.value / a.alpha)
            if not (math.isfinite(a.d_G.value) and a.d_G.value <= 10 * a.alpha):
                problems.append((K.label, "d_G", a.d_G.value))
            if not 0.2 <= a.L_T.value <= 0.6:
                problems.append((K.label, "L_T", a.L_T.value))
            if K.label.startswith("ball"):
                L_ball = math.sqrt(1 / (n + 2)) * unit_ball_volume(n) ** (-1 / n)
                if not (a.d_G.value <= 1.05 and a.L_T.within(L_ball)):
                    problems.append((K.label, "ball", a.d_G.value, a.L_T.value))
            z = max(_z(a.L_T, b.L_T), _z(a.d_G, b.d_G))
            z_max = max(z_max, z)
            if z > 3:
                problems.append((K.label, "linear invariance", z))
    ok, _ = line.emit(not problems,
                      f"21 bodies: L_T in [{L_range[0]:.3f}, {L_range[1]:.3f}], max d_G/alpha {d_max:.3f} (<= 10); "
                      f"balls exact; invariance under cond-10 map within {z_max:.2f} sigma")
    assert ok, problems


@pytest.mark.xfail(strict=True, raises=CriterionUnmet,
                   reason="minimal-c1 grid for the one-dimensional tail bound spreads by about 4.8x, "
                          "not < 3; see the decisions ledger")
def test_criterion_09_quasi_convex(capsys):
    line = Line(capsys, 9, 900.0)
    suite = run_verify(["lem-4.1", "lem-4.2"], Corpus.default((2,), (2, 3)), SEED)
    grid = next(r for r in suite.reports if r.id == "lem-4.1")
    tails = [r for r in suite.reports if r.id == "lem-4.2"]
    assert len(tails) == 4 and all(r.passed for r in tails), _failed(tails)
    assert grid.checks[0].passed, "tail bound itself must hold on the grid"
    ratios = []
    for K in (Box.cube(3), default_corpus(3)[2], default_corpus(2)[3]):
        _, Kt = isotropic_transform(K)
        q = quasi_perturb(QuasiBody([Kt], C=1.0, label=K.kind), CONSTANTS["c3"], 100_000, SEED)
        p = perturb_body(Kt, CONSTANTS["c_alpha"], 100_000, SEED)
        ratios.append(q.L_T.value / p.L_T.value)
    assert all(0.5 <= r <= 2 for r in ratios), ratios
    spread = grid["spread"]
    ok, _ = line.emit(spread < 3,
                      f"minimal tail constant c1 spread {spread:.3f} (needs < 3); tail checks at alpha = 8 C/overlap "
                      f"pass on {len(tails)} bodies; single-piece L_T ratios "
                      f"{', '.join(f'{r:.3f}' for r in ratios)} (within 2x)")
    if not ok:
        raise CriterionUnmet(f"minimal-c1 spread {spread:.3f} >= 3")


def test_criterion_10_sections(capsys):
    line = Line(capsys, 10, 600.0)
    sig = []
    for K in (Box.cube(3), default_corpus(3)[0]):
        _, Kt = isotropic_transform(K)
        rep = marginal_moment_check(Kt, Subspace.random(3, 2, SEED), 100_000, SEED)
        assert rep.passed, rep.checks
        sig.append(rep["worst_sigma"])
    _, C = isotropic_transform(Box.cube(3))
    dG = projection_perturb(C, Subspace.coordinate(3, [0, 1])).d_G.value
    w = 1 / math.sqrt(24)
    _, rep = near_origin_perturb(Box([3.0, w, w]), 0.5, 1.1, 1.0, CONSTANTS["c_prime"], 100_000, SEED)
    margin = rep["surface_bound"] - rep["surface_ratio"]
    ok, _ = line.emit(dG <= 1.1 and rep.passed and rep["branch"] == "full" and margin > 0,
                      f"covariance identity worst {max(sig):.2f} sigma (<= 3); cube axis-plane d_G {dG:.3f} (<= 1.1); "
                      f"elongated box full branch passed, surface margin {margin:.3f} (> 0)")
    assert ok, rep.checks


def test_criterion_11_determinism(capsys, tmp_path):
    line = Line(capsys, 11, None)
    runs = {
        "verify": ["verify", "--ids", "thm-2.1,lem-2.3", "--dims", "2", "--samples", "20000"],
        "perturb": ["perturb", "--body", "cross:3", "--samples", "20000"],
        "near-origin": ["near-origin", "--body", "ball:3", "--gamma", "0.5", "--beta", "1.1", "--delta", "1",
                        "--samples", "20000"],
    }
    outputs = {}
    try:
        for name, argv in runs.items():
            for threads in (1, 4, 1):
                path = tmp_path / f"{name}-{threads}-{len(outputs)}.json"
                cli.main(argv + ["--seed", "11", "--threads", str(threads), "--out", str(path)])
                outputs.setdefault(name, []).append(path.read_bytes())
        set_threads(1)
        a = uniform_sample(Box.cube(3), 5 * 4096 + 3, seed=2)
        set_threads(4)
        b = uniform_sample(Box.cube(3), 5 * 4096 + 3, seed=2)
    finally:
        set_threads(None)
    same = {k: len(set(v)) == 1 for k, v in outputs.items()}
    ok, _ = line.emit(all(same.values()) and np.array_equal(a, b),
                      f"byte-identical across repeats and 1/4 threads: {same}; raw samples identical: "
                      f"{np.array_equal(a, b)}")
    assert ok
