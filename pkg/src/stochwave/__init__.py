"""Spectral simulator and verification harness for the energy-critical
2-D stochastic wave equation with exponential nonlinearity on rectangles."""

from .spectral import (
    AliasingError,
    BasisError,
    BoundaryCondition,
    Grid,
    PhysicalField,
    SpectralBasis,
    SpectralField,
    analyze,
    apply_cos_group,
    apply_rounded_group,
    apply_rounding_defect,
    apply_sinc_group,
    build_basis,
    default_grid,
    pair_evolve,
    spectral_projector,
    synthesize,
)
from .norms import (
    AdmissibilityError,
    ExponentTriple,
    NormReport,
    admissible_r,
    cluster_exponent,
    fractional_norm,
    h_a_norm,
    lq_norm,
    path_norms,
    validate_pair_condition,
)
from .nonlin import (
    ExponentialCritical,
    LipschitzBudget,
    NonlinearityRangeError,
    Polynomial,
    ZeroNonlinearity,
    eval_F,
    lipschitz_ratio_F,
    log_inequality_ratio,
    moser_trudinger_functional,
    nemytskii_channels,
    nemytskii_hs_norm_sq,
)
from .noise import NoiseBasis, WienerEnsemble, build_noise_basis, sample_increments
from .convolution import (
    ConvolutionResult,
    DiffusionProcess,
    burkholder_ratio,
    constant_diffusion,
    convolve,
    diffusion_from_noise_basis,
    stopped_convolve,
    strichartz_lp_moment,
    threshold_stopping_index,
)
from .solver import (
    BudgetConstants,
    BudgetError,
    ContractionError,
    CutoffParams,
    CutoffShape,
    SolverConfig,
    StoppingReport,
    TrajectoryRecord,
    contraction_budget,
    cutoff_theta,
    cutoff_theta_hat,
    detect_stopping,
    duhamel_deterministic,
    linear_flow,
    nesting_consistency,
    pair_system_crosscheck,
    picard_step,
    solve_truncated,
)
from .verify import (
    ConstantsLedger,
    LedgerEntry,
    SweepSpec,
    build_ledger,
    verify_cluster,
    verify_homogeneous_strichartz,
    verify_inhomogeneous_strichartz,
    verify_stochastic,
    verify_stopped_identity,
)

__version__ = "0.1.0"
