"""Central numerical policy record.

Every threshold that steers a decision anywhere in the package lives here,
so a report can always say which policy produced it.
"""

from __future__ import annotations

from dataclasses import dataclass


@dataclass(frozen=True)
class Tolerances:
    # factorization / linear algebra
    singular_pivot: float = 1e-14      # pivot < this * ||A||_F counts as singular
    hermiticity: float = 1e-12         # relative Frobenius asymmetry allowed on Hermitian input
    rigging_min_pivot: float = 1e-12   # smallest-singular-value estimate required of F
    operator_norm_rel: float = 1e-8    # power-iteration relative convergence
    eig_max_sweeps: int = 30           # QL sweeps per eigenvalue before NoConvergence

    # limiting-absorption probe
    lap_converged: float = 1e-6        # last Cauchy increment below this => converged
    lap_monotone_steps: int = 3        # increments must decrease over this many final steps

    # coupling-plane calculus
    boundary_min_det: float = 1e-10    # |d| floor on contour samples (BoundaryZero otherwise)
    phase_step_max: float = 0.9        # radians; adjacent contour samples refined above this
    contour_sample_cap: int = 32768    # samples per winding before giving up
    cluster_threshold: float = 1e-6    # roots closer than this merge into one point
    quadtree_depth_cap: int = 40
    newton_max_iter: int = 60
    newton_step_tol: float = 1e-13     # relative step size treated as converged
    fd_step: float = 6e-6              # central-difference step scale for d'(s)
    contour_nodes: int = 64            # trapezoid baseline for Riesz quadrature
    contour_node_cap: int = 1024
    contour_rel: float = 1e-10         # Riesz doubling stops below this relative change
    det_residual_factor: float = 1e-8  # |d(r)| <= factor * (1 + boundary scale)
    pole_eval_guard: float = 1e-12     # relative distance to a pole considered "at" it

    # trajectory tracking
    y0_default: float = 1.0
    shrink_default: float = 0.5
    y_min_default: float = 1e-6
    match_step_factor: float = 3.0     # acceptance radius = factor * (prev step + floor)
    match_floor: float = 1e-8
    first_step_fraction: float = 0.1   # first-transition radius seed: box diagonal * this
    halving_cap: int = 6
    impacting_delta: float = 1e-2

    # spectral measures
    eig_membership: float = 1e-10      # closed-interval membership slack
    stone_quad_rel: float = 1e-9       # adaptive Simpson target
    stone_eval_cap: int = 60000        # integrand evaluations per stone call
    excision_floor: float = 1e-6       # minimal half-width excised around a bad lambda

    # resonance index
    index_radius_factor: float = 10.0  # match radius = factor * y * |dr/dy| + floor
    index_radius_floor: float = 1e-6


DEFAULT = Tolerances()
