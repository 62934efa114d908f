import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.integrate import quad

from isoslice.convex_bodies import Ball, Box, CrossPolytope, LinearMap, apply_linear, unit_ball_volume
from isoslice.logconcave import concavity_check
from isoslice.sampling import isotropic_transform
from isoslice.sections import (
    MarginalDensity, NearOriginError, Subspace, log_volume_profile, marginal_moment_check,
    near_origin_perturb, projection_body, projection_marginal, projection_perturb, section_volume,
    section_volume_check,
)


def _unit_ball(n):
    return Ball(n, unit_ball_volume(n) ** (-1 / n))


def _square_disc_area(w, s):
    """Area of [-w, w]^2 ∩ s D."""
    if s <= w:
        return math.pi * s * s
    if s >= w * math.sqrt(2):
        return 4 * w * w
    th = math.acos(w / s)
    return math.pi * s * s - 4 * s * s * (th - math.sin(th) * math.cos(th))


# --- subspaces -------------------------------------------------------------------

@settings(max_examples=20, deadline=None)
@given(st.integers(2, 6), st.data())
def test_random_subspace_orthonormal(n, data):
    k = data.draw(st.integers(1, n - 1))
    E = Subspace.random(n, k, data.draw(st.integers(0, 10_000)))
    full = np.vstack([E.basis, E.complement])
    assert np.allclose(full @ full.T, np.eye(n), atol=1e-12)
    assert E.dim == k and E.codim == n - k and E.ambient == n


def test_subspace_from_basis_and_perp():
    E = Subspace.from_basis([[1.0, 1.0, 0.0], [0.0, 1.0, 1.0]])
    assert E.dim == 2
    v = np.array([1.0, -1.0, 1.0]) / math.sqrt(3)
    assert np.allclose(np.abs(E.complement[0]), np.abs(v))
    P = E.perp()
    assert P.dim == 1 and np.allclose(P.complement, E.basis)


def test_subspace_rejects_degenerate():
    with pytest.raises(ValueError):
        Subspace.from_basis([[1.0, 0.0], [2.0, 0.0]])
    with pytest.raises(ValueError):
        Subspace(np.array([[1.0, 0.0]]), np.array([[1.0, 0.0]]))


def test_coordinate_subspace():
    E = Subspace.coordinate(4, [0, 2])
    assert np.array_equal(E.basis, np.eye(4)[[0, 2]])
    assert np.array_equal(E.complement, np.eye(4)[[1, 3]])


# --- section volumes -------------------------------------------------------------

def test_section_unit_cube():
    K = Box.cube(3, 0.5)
    v = section_volume(K, Subspace.coordinate(3, [0, 1]))
    # polar quadrature of a non-smooth radial function: small, self-reported error
    assert abs(v.value - 1.0) <= max(3 * v.std_error, 1e-12) and abs(v.value - 1.0) < 1e-4
    assert section_volume(K, Subspace.coordinate(3, [2])).value == pytest.approx(1.0)


def test_section_unit_ball():
    K = _unit_ball(3)
    r = K.radius
    for seed in (1, 2):
        v = section_volume(K, Subspace.random(3, 2, seed))
        assert v.value == pytest.approx(math.pi * r * r, rel=1e-9)


def test_section_requires_isotropic():
    with pytest.raises(ValueError):
        section_volume(Box([1.0, 2.0, 3.0]), Subspace.coordinate(3, [0, 1]))


def test_section_volume_check():
    rep = section_volume_check(Box.cube(3), n_subspaces=3, n_samples=20_000)
    assert rep.passed
    assert rep.values["A"] >= 1.0


# --- projections and marginals ---------------------------------------------------

def test_projection_body_of_cube():
    P = projection_body(Box.cube(3), Subspace.coordinate(3, [0, 1]))
    X = np.random.default_rng(0).uniform(-1.5, 1.5, (1000, 2))
    assert np.array_equal(P._gauge(X) <= 1 + 1e-12, np.max(np.abs(X), axis=1) <= 1 + 1e-12)


def test_marginal_cube_axis_plane():
    f = projection_marginal(Box.cube(3), Subspace.coordinate(3, [0, 1]))
    X = np.random.default_rng(1).uniform(-1.3, 1.3, (500, 2))
    inside = np.max(np.abs(X), axis=1) <= 1
    assert np.allclose(f(X), 2.0 * inside)
    assert f.concavity == "line-s-concave" and f.s == 1.0


def test_marginal_ball_chord():
    R = 1.3
    f = projection_marginal(Ball(3, R), Subspace.random(3, 2, 4))
    X = np.random.default_rng(2).uniform(-1.5, 1.5, (500, 2))
    r2 = np.einsum("ij,ij->i", X, X)
    assert np.allclose(f(X), 2 * np.sqrt(np.clip(R * R - r2, 0, None)), atol=1e-9)


def test_marginal_ball_codim_two():
    R = 1.0
    f = projection_marginal(Ball(4, R), Subspace.random(4, 2, 5))
    X = np.random.default_rng(3).uniform(-0.7, 0.7, (40, 2))
    r2 = np.einsum("ij,ij->i", X, X)
    # fiber is a disc of radius sqrt(R^2 - |x|^2); quasi-Monte Carlo on 1024 points
    assert np.allclose(f(X), math.pi * (R * R - r2), rtol=0.03)


def test_marginal_cross_chords_by_search():
    # a body without facet data uses the bracketing search for chords
    K = apply_linear(Ball(3), LinearMap(np.diag([1.0, 2.0, 0.5])))
    E = Subspace.coordinate(3, [0, 1])
    f = projection_marginal(K, E)
    X = np.array([[0.0, 0.0], [0.5, 0.5], [0.9, 0.0]])
    q = 1 - X[:, 0] ** 2 - (X[:, 1] / 2) ** 2
    assert np.allclose(f(X), 2 * 0.5 * np.sqrt(q), atol=1e-9)


def test_marginal_at_origin_is_fiber_section():
    K = _unit_ball(3)
    E = Subspace.random(3, 2, 6)
    f = projection_marginal(K, E)
    assert f.f0 == pytest.approx(section_volume(K, E.perp()).value, rel=1e-12)


@pytest.mark.parametrize("K", [Box.cube(3), CrossPolytope.regular(3)], ids=lambda K: K.kind)
def test_marginal_line_concave(K):
    f = projection_marginal(K, Subspace.random(3, 2, 7))
    assert concavity_check(f, n_triples=300).passed


def test_marginal_needs_proper_subspace():
    with pytest.raises(ValueError):
        MarginalDensity(Ball(2), Subspace.coordinate(2, [0, 1]))


@pytest.mark.parametrize("K", [Box.cube(3), _unit_ball(3)], ids=lambda K: K.kind)
def test_marginal_moment_identity(K):
    _, Kt = isotropic_transform(K)
    rep = marginal_moment_check(Kt, Subspace.random(3, 2, 8), n_samples=20_000, seed=1)
    assert rep.passed, rep.values["worst_sigma"]


# --- projection perturbation -----------------------------------------------------

def test_projection_cube_axis_plane():
    _, K = isotropic_transform(Box.cube(3))
    res = projection_perturb(K, Subspace.coordinate(3, [0, 1]))
    assert res.d_G.value <= 1.1
    assert res.extra["s"] == 1.0 and res.alpha == pytest.approx(0.5)


def test_projection_ball_random_plane():
    res = projection_perturb(_unit_ball(4), Subspace.random(4, 2, 9))
    assert math.isfinite(res.L_T.value)
    assert 1.0 <= res.d_G.value <= 4.0


def test_projection_rejects_full_space_and_lines():
    K = _unit_ball(3)
    with pytest.raises(ValueError, match="proper subspace"):
        projection_perturb(K, Subspace.coordinate(3, [0, 1, 2]))
    with pytest.raises(ValueError):
        projection_perturb(K, Subspace.coordinate(3, [0]))


# --- near-origin perturbation ----------------------------------------------------

def test_near_origin_ball_trivial():
    res, rep = near_origin_perturb(_unit_ball(3), 0.5, 1.1, 1.0, n_samples=20_000)
    assert rep.values["branch"] == "trivial"
    assert res.T is res.K
    assert rep.passed


def test_near_origin_elongated_box():
    w = 1 / math.sqrt(24)
    K = Box([3.0, w, w])
    res, rep = near_origin_perturb(K, 0.5, 1.1, 1.0, n_samples=50_000, seed=2)
    assert rep.values["branch"] == "full"
    assert rep.passed, rep.checks
    assert rep.values["surface_ratio"] < rep.values["surface_bound"]
    # near mass against the exact slice integral of the square-disc area
    r = 0.5 * math.sqrt(3)
    ref, _ = quad(lambda x: _square_disc_area(w, math.sqrt(r * r - x * x)), -r, r, epsabs=0, epsrel=1e-10)
    assert rep.values["near_mass"].within(ref)


def test_near_origin_hypothesis_errors():
    w = 1 / math.sqrt(24)
    with pytest.raises(NearOriginError) as exc:
        near_origin_perturb(Box([3.0, 2 * w, w]), 0.5, 1.1, 1.0, n_samples=1000)
    assert exc.value.kind == "volume"
    with pytest.raises(NearOriginError) as exc:
        near_origin_perturb(Box([3.0, w, w]), 0.5, 0.5, 1.0, n_samples=1000)
    assert exc.value.kind == "containment"
    with pytest.raises(NearOriginError) as exc:
        near_origin_perturb(Box([3.0, w, w]), 0.05, 1.1, 0.1, n_samples=5000)
    assert exc.value.kind == "mass"


def test_log_volume_profile_concave():
    K = Box([2.0, 0.5, 0.25])
    logv, se, z = log_volume_profile(K, np.linspace(0.3, 2.0, 8), n_samples=50_000, seed=3)
    assert np.all(np.diff(logv) >= 0)
    assert np.all(z <= 3.0)
