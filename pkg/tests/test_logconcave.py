import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.integrate import quad
from scipy.special import beta as beta_fn

from isoslice.convex_bodies import Ball, Box, CrossPolytope, gauge, sphere_directions
from isoslice.logconcave import (
    BoundViolation, RadialProfile, body_from_density, busemann_check, concavity_check,
    density_corpus, density_from_config, distance_support_check, evenness_check, exp_gauge,
    gauge_f, gaussian, indicator, l_equivalence_check, lemma_bounds, ln_comparison_report,
    one_dim_moment_bounds, power, radial_moment, triangle_product,
)

CORPUS = [(n, f) for n in (2, 3) for f in density_corpus(n)]


def _ids(item):
    n, f = item
    return f"{f.name}:{n}"


# --- radial moments and gauges ---------------------------------------------------

@pytest.mark.parametrize("n", [1, 2, 3, 4])
def test_radial_moment_ball_indicator(n):
    theta = np.eye(n)[0]
    assert radial_moment(indicator(Ball(n)), theta, n + 1) == pytest.approx(1 / (n + 2), rel=1e-12)


@pytest.mark.parametrize("n", [1, 2, 3, 4])
def test_radial_moment_exponential(n):
    theta = np.ones(n) / math.sqrt(n)
    assert radial_moment(exp_gauge(Ball(n)), theta, n + 1) == pytest.approx(math.factorial(n + 1), rel=1e-9)


def test_radial_moment_square_diagonal():
    theta = np.array([1.0, 1.0]) / math.sqrt(2)
    assert radial_moment(indicator(Box.cube(2)), theta, 3) == pytest.approx(1.0, rel=1e-12)


def test_radial_moment_negative_order():
    with pytest.raises(ValueError):
        radial_moment(indicator(Ball(2)), [1.0, 0.0], -1)


def test_radial_moment_matches_adaptive_quadrature():
    f = power(CrossPolytope.regular(3), 5.0)
    theta = np.array([0.3, -0.5, 0.81])
    theta /= np.linalg.norm(theta)
    R = 1 / float(gauge(CrossPolytope.regular(3), theta))
    ref, _ = quad(lambda r: (1 - r / R) ** 5 * r ** 4, 0, R, epsabs=0, epsrel=1e-13)
    assert radial_moment(f, theta, 4) == pytest.approx(ref, rel=1e-10)


@pytest.mark.parametrize("K", [Box([1.0, 2.0]), CrossPolytope.regular(3), Ball(4, 0.5)], ids=lambda K: K.kind)
def test_indicator_gauge_is_scaled_body_gauge(K):
    n = K.dim
    X = sphere_directions(n)[:1000]
    ratio = gauge_f(indicator(K), X) / gauge(K, X)
    assert np.allclose(ratio, (n + 2) ** (1 / (n + 2)), rtol=1e-10)
    assert ratio.max() / ratio.min() < 1 + 1e-9


def test_gaussian_gauge():
    X = np.random.default_rng(0).normal(size=(20, 2))
    assert np.allclose(gauge_f(gaussian(np.eye(2)), X), np.linalg.norm(X, axis=1) / 2 ** 0.25, rtol=1e-9)


@settings(max_examples=25, deadline=None)
@given(st.lists(st.floats(-3, 3), min_size=3, max_size=3).filter(lambda v: np.linalg.norm(v) > 1e-3),
       st.floats(0.1, 10.0))
def test_gauge_f_homogeneous(x, t):
    f = exp_gauge(CrossPolytope.regular(3))
    x = np.array(x)
    assert gauge_f(f, t * x) == pytest.approx(t * gauge_f(f, x), rel=1e-9)


def test_gauge_f_zero_rejected():
    with pytest.raises(ValueError):
        gauge_f(indicator(Ball(2)), [0.0, 0.0])


# --- K_f -------------------------------------------------------------------------

def test_body_of_indicator_is_scaled_copy():
    K = Box([1.0, 3.0])
    Kf = body_from_density(indicator(K))
    X = sphere_directions(2)
    assert np.allclose(gauge(Kf, X), 4 ** 0.25 * gauge(K, X), rtol=1e-10)


def test_body_of_gaussian_is_ball():
    Kf = body_from_density(gaussian(np.eye(3)))
    X = sphere_directions(3)[:500]
    # radius (integral e^{-r^2/2} r^4 dr)^{1/5} = (3 sqrt(pi/2))^{1/5}
    r = (3 * math.sqrt(math.pi / 2)) ** 0.2
    assert np.allclose(gauge(Kf, X), 1 / r, rtol=1e-9)


def test_body_needs_positive_center():
    f = power(Ball(2), 3.0)
    f.phi = lambda u: np.where(u < 0.1, 0.0, 1.0)
    with pytest.raises(ValueError):
        body_from_density(f)


def test_power_body_closed_form():
    # ||theta||_f^{-(n+2)} = ||theta||_K^{-(n+2)} B(n+2, s+1)
    n, s = 2, 8.0
    K = Box.cube(2)
    X = sphere_directions(2)[::7]
    expected = gauge(K, X) * beta_fn(n + 2, s + 1) ** (-1 / (n + 2))
    assert np.allclose(gauge_f(power(K, s), X), expected, rtol=1e-10)


@pytest.mark.parametrize("item", CORPUS, ids=_ids)
def test_busemann_on_corpus(item):
    _, f = item
    rep = busemann_check(f, n_pairs=2000, seed=1)
    assert rep.passed, rep.values


# --- densities -------------------------------------------------------------------

@pytest.mark.parametrize("item", CORPUS, ids=_ids)
def test_density_even_and_concave(item):
    _, f = item
    assert evenness_check(f)
    assert concavity_check(f).passed
    assert f.f0 == pytest.approx(1.0)


def test_concavity_check_catches_non_concave():
    f = power(Ball(2), 3.0)
    # an oscillating radial profile declared concave (s = 1)
    f.concavity, f.s = "s-concave", 1.0
    f.phi = lambda u: np.where(u <= 1, 0.1 + np.cos(6 * u) ** 2, 0.0)
    assert not concavity_check(f).passed


@pytest.mark.parametrize("item", CORPUS, ids=_ids)
def test_config_round_trip(item):
    _, f = item
    g = density_from_config(f.to_dict())
    X = np.random.default_rng(2).normal(size=(50, f.dim))
    assert np.allclose(f(X), g(X))


def test_unknown_config_type():
    with pytest.raises(ValueError):
        density_from_config({"type": "cauchy"})


@pytest.mark.parametrize("item", CORPUS, ids=_ids)
def test_sampler_mass(item):
    _, f = item
    if f.mass is None:
        pytest.skip("no closed-form mass")
    rng = np.random.default_rng(3)
    X, w = f.sample(rng, 20_000)
    # E[w] = integral f when every draw carries the full mass, and E[w f(X)/f(X)] otherwise
    assert np.mean(w) == pytest.approx(f.mass, rel=0.05)


# --- one-dimensional moment bounds ------------------------------------------------

@pytest.mark.parametrize("n", range(1, 9))
def test_indicator_attains_lower_bound(n):
    lo, r, hi = one_dim_moment_bounds(RadialProfile(lambda t: (t <= 1).astype(float), 1.0), n)
    # closed form: (1/(n+2)) / (1/n)^{(n+2)/n}
    assert r == pytest.approx((1 / (n + 2)) / (1 / n) ** ((n + 2) / n), rel=1e-12)
    assert r == pytest.approx(lo, rel=1e-12)


@pytest.mark.parametrize("n", range(1, 9))
def test_exponential_attains_upper_bound(n):
    lo, r, hi = one_dim_moment_bounds(RadialProfile(lambda t: np.exp(-t)), n)
    assert r == pytest.approx(math.factorial(n + 1) / math.factorial(n - 1) ** ((n + 2) / n), rel=1e-9)
    assert r == pytest.approx(hi, rel=1e-9)


def test_gaussian_profile_between_bounds():
    lo, r, hi = one_dim_moment_bounds(RadialProfile(lambda t: np.exp(-t * t)), 2)
    # integral t^3 e^{-t^2} = 1/2, integral t e^{-t^2} = 1/2
    assert r == pytest.approx(0.5 / 0.5 ** 2, rel=1e-10)
    assert lo < r < hi


def test_non_log_concave_profile_lower_bound_only():
    g = RadialProfile(lambda t: np.where(t <= 10, 1 / (1 + t * t), 0.0), 10.0, log_concave=False)
    for n in range(1, 6):
        lo, r, hi = one_dim_moment_bounds(g, n)
        assert r >= lo
    # declared log-concave it breaks the upper bound in dimension 1
    with pytest.raises(BoundViolation):
        one_dim_moment_bounds(RadialProfile(g.g, 10.0, log_concave=True), 1)


def test_profile_requires_unit_start():
    with pytest.raises(ValueError):
        one_dim_moment_bounds(RadialProfile(lambda t: 2 * np.exp(-t)), 2)


def test_lemma_bounds_values():
    assert lemma_bounds(1) == pytest.approx((1 / 3, 2.0))
    assert lemma_bounds(2) == pytest.approx((1.0, 6.0))


@pytest.mark.parametrize("item", CORPUS, ids=_ids)
def test_corpus_profiles_satisfy_bounds(item):
    n, f = item
    for theta in sphere_directions(n)[::97][:5]:
        lo, r, hi = one_dim_moment_bounds(RadialProfile.from_density(f, theta), n)
        assert lo * (1 - 1e-9) <= r <= hi * (1 + 1e-9)


@pytest.mark.parametrize("item", CORPUS, ids=_ids)
def test_profiles_non_increasing(item):
    n, f = item
    _, _, monotone = RadialProfile.from_density(f, np.eye(n)[0]).samples()
    assert monotone


# --- distance to the support -----------------------------------------------------

def test_power_density_distance_box():
    n, s = 2, 8
    rep = distance_support_check(power(Box.cube(2), s))
    assert rep.passed
    # K_f is B(n+2, s+1)^{1/(n+2)} times the box: scale-invariant distance one
    assert rep.values["d_G"].value == pytest.approx(1.0, abs=1e-9)
    assert rep.values["containment_distance"].value == pytest.approx(beta_fn(n + 2, s + 1) ** (-1 / (n + 2)), rel=1e-9)
    assert rep.values["containment_n_over_s"] == pytest.approx(rep.values["containment_distance"].value * n / s)


def test_distance_ratio_stable_as_s_grows():
    n = 2
    small = distance_support_check(power(Box.cube(2), 4 * n)).values["containment_n_over_s"]
    large = distance_support_check(power(Box.cube(2), 100 * n)).values["containment_n_over_s"]
    assert large <= small * 1.5


@pytest.mark.parametrize("n", [2, 3])
def test_indicator_distance(n):
    rep = distance_support_check(indicator(Box.cube(n)), s=n + 0.5)
    assert rep.values["containment_distance"].value == pytest.approx((n + 2) ** (1 / (n + 2)), rel=1e-9)
    assert rep.passed


def test_distance_refuses_small_s():
    with pytest.raises(ValueError, match="s > n"):
        distance_support_check(power(Box.cube(3), 3.0))


def test_distance_refuses_log_concave():
    with pytest.raises(ValueError):
        distance_support_check(exp_gauge(Box.cube(2)), Box.cube(2))


# --- isotropic-constant equivalence ----------------------------------------------

def test_l_equivalence_indicator_ratio_one():
    rep = l_equivalence_check(indicator(CrossPolytope.regular(2)), n_samples=60_000, seed=1)
    assert rep.values["ratio"].within(1.0)
    assert rep.passed


def test_l_equivalence_exp_l1():
    rep = l_equivalence_check(exp_gauge(CrossPolytope.regular(2)), n_samples=60_000, seed=2)
    # f = e^{-|x|_1}: integral 4, second moments 2, so L_f = 1/sqrt(2); K_f = 6^{1/4} B_1
    # is a rotated square with L = 1/sqrt(12); the ratio is sqrt(1/6) ~ 0.408
    assert rep.values["L_f"].within(1 / math.sqrt(2))
    assert rep.values["L_Kf"].value == pytest.approx(1 / math.sqrt(12), rel=1e-4)
    assert rep.values["ratio"].within(math.sqrt(1 / 6))
    assert rep.passed


def test_l_equivalence_triangle():
    rep = l_equivalence_check(triangle_product(2), n_samples=60_000, seed=3)
    assert 0.5 <= rep.values["ratio"].value <= 2.0
    Lf = rep.values["L_f"]
    # per coordinate: f0 / mass = 1/2 and variance 2/3, so L_f = sqrt(2) / sqrt(12)
    assert Lf.value >= math.sqrt(2) / math.sqrt(12) - 3 * Lf.std_error
    assert Lf.within(math.sqrt(2 / 12))


def test_ln_comparison_indicators():
    fam = [indicator(Box.cube(2)), indicator(Ball(2))]
    rep = ln_comparison_report(fam, n_samples=40_000, seed=4)
    assert rep.values["ratio"] == pytest.approx(1.0, abs=0.02)
    assert rep.passed


def test_ln_comparison_singleton_reduces():
    f = exp_gauge(CrossPolytope.regular(2))
    rep = ln_comparison_report([f], n_samples=40_000, seed=5)
    single = l_equivalence_check(f, n_samples=40_000, seed=5)
    assert rep.values["ratio"] == pytest.approx(single.values["ratio"].value, rel=1e-12)


def test_ln_comparison_mixed_family_bounded_by_worst_ratio():
    fam = [indicator(Box.cube(2)), exp_gauge(CrossPolytope.regular(2)), triangle_product(2)]
    rep = ln_comparison_report(fam, n_samples=40_000, seed=6)
    assert rep.values["ratio"] <= rep.values["max_single_ratio"] * (1 + 1e-12)


def test_ln_comparison_rejects_empty_and_mixed():
    with pytest.raises(ValueError):
        ln_comparison_report([])
    with pytest.raises(ValueError):
        ln_comparison_report([indicator(Ball(2)), indicator(Ball(3))])
