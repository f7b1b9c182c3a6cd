"""plategreen: clamped-plate (biharmonic) Green's functions and positivity audits.

The package constructs Green's functions of the clamped plate problem

    (d/dx)^4-type operator:  Lu = DeltaDelta u (+ a u),   u = du/dnu = 0 on the boundary,

exactly on the half-space and the unit ball, and numerically on smoothly
perturbed balls (ellipsoids, mapped balls) via a fundamental-solution series
plus a collocation boundary correction.  On top of the evaluators it runs
structured audits of the kernel's sign structure and growth: positivity scans,
minimal sign-change separation, negative-part bounds, growth envelopes,
boundary-decay fits, near-pole rescaling limits, and degeneracy
classification, plus one-parameter domain-family sweeps that locate the loss
of positivity.

Modules
-------
geometry      analytic domain descriptions, distances, normals, pair sampling
closed_form   exact kernels (whole space, half-space, ball) and boundary traces
quadrature    cubature with weakly singular integrands, boundary quadrature
green_numeric collocation solves, series construction, grid oracle, coercivity
audit         positivity/estimate audits over a Green evaluator
family        one-parameter domain sweeps and critical-parameter bisection
cli           command-line interface emitting reports, CSV tables and SVG plots
"""

from plategreen.geometry import DomainSpec, PerturbationMap
from plategreen.closed_form import (
    Constants,
    ball_green,
    closed_form_evaluator,
    gamma0,
    halfspace_green,
)
from plategreen.green_numeric import (
    OperatorSpec,
    coercivity_estimate,
    collocation_green,
    grid_oracle_green_2d,
    perturbed_green,
    plate_solve,
)
from plategreen.audit import AuditReport, run_audit

__all__ = [
    "AuditReport",
    "Constants",
    "DomainSpec",
    "OperatorSpec",
    "PerturbationMap",
    "ball_green",
    "closed_form_evaluator",
    "coercivity_estimate",
    "collocation_green",
    "gamma0",
    "grid_oracle_green_2d",
    "halfspace_green",
    "perturbed_green",
    "plate_solve",
    "run_audit",
]

__version__ = "0.1.0"
