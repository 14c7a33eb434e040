"""Deterministic hard-potential Landau solver and estimate-verification harness."""

from .grids import (
    KineticPoint,
    PhaseField,
    SpatialGrid,
    VelocityGrid,
    dilate,
    kinetic_distance,
    mollify_initial_data,
)
from .weights import WeightSpec, bracket, weight_eval
from .norms import HolderProbe, holder_seminorm_estimate, weighted_norm
from .coefficients import (
    CoefficientField,
    EllipticityReport,
    KernelParams,
    LowerBoundBall,
    compute_coefficients,
    divergence_identities_residual,
    ellipticity_report,
    kernel_matrix,
)
from .collision import (
    CollisionOutput,
    conservation_residual,
    q_divergence,
    q_nondivergence,
    weak_form_residual,
)

__version__ = "0.1.0"
