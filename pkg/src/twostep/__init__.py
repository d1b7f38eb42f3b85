"""Generalized two-step BDF2 / AM2 schemes: stability analysis, IMEX steppers and experiments."""
from .errors import (
    ConvergenceError,
    DegeneratePolynomialError,
    InputFormatError,
    NumericalError,
    SingularSystemError,
    TwoStepError,
)
from .schemes import SchemeCoefficients, SchemeFamily, custom_scheme, make_scheme, order_condition_residuals
from .stability import (
    CharacteristicCoeffs,
    CompanionMatrix,
    RegionRaster,
    StabilityVerdict,
    a_stable_closed_form,
    a_stable_sampled,
    characteristic_coeffs,
    cohn_schur_contained,
    companion_matrix,
    quadratic_roots,
    spectral_radius,
    stability_region,
)
from .integrators import (
    ForcingMode,
    LinearSkewProblem,
    Starter,
    Stepper,
    StepperConfig,
    Trajectory,
    integrate,
    start,
    step_imex_amab2,
    step_imex_bdf2,
    step_lmm,
)
from .energy import (
    GMatrix,
    bdf2_energy_identity_residual,
    energy_series,
    g_norm_sq,
    gnorm_equivalence_constants,
    max_step_bdf2,
    skew_dominance_constant,
)
from .problems import BenchmarkId, build, exact_solution, load_problem

__version__ = "0.1.0"
