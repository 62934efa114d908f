"""Numerical experiments on isomorphic slicing: convex bodies, log-concave
densities, the bodies K_f, and the perturbations that bound isotropic
constants."""
from .convex_bodies import (
    Ball, Body, Box, CrossPolytope, Ellipsoid, HPolytope, Intersection, LinearMap, LpBall,
    Transformed, VPolytope, apply_linear, beta_integral, binom_bounds, gauge,
    geometric_distance, minkowski_interpolation_gauge, polar, radial, support,
)
from .estimate import Estimate
from .logconcave import Density, body_from_density, gauge_f
from .pipeline import PerturbationResult, build_F, mass_concentration_check, perturb_body
from .quasi import QuasiBody, quasi_perturb
from .report import Report, render_csv
from .sampling import covariance, isotropic_constant_body, isotropic_transform, volume
from .sections import (
    Subspace, near_origin_perturb, projection_marginal, projection_perturb, section_volume,
)
from .verify import run_verify

__version__ = "0.1.0"
