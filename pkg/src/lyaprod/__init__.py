"""Lyapunov exponents of random matrix products.

Computes top Lyapunov exponents of i.i.d. and Markov-driven products of
invertible matrices by operator iteration with certified stopping, certifies
the spectral-gap contraction behind the convergence, and extracts Taylor
coefficients of the exponent under complex perturbations of the driving
measure or kernel.
"""

from .analyticity import (
    DegreeReport,
    PerturbationDirection,
    PerturbationPolynomial,
    TaylorReport,
    degree_check,
    holomorphy_residual,
    operator_power_polynomial,
    perturbation_direction,
    taylor_coefficients,
)
from .contraction import (
    CertificateSearchFailure,
    ContractionCertificate,
    ProjectiveGrid,
    averaged_contraction_bound,
    averaged_contraction_empirical,
    check_submultiplicativity,
    find_certificate,
)
from .errors import (
    CapacityError,
    ConvergenceError,
    NonErgodicError,
    NumericalError,
    ReductionError,
)
from .lyapunov import (
    LyapunovResult,
    ReducibilityReport,
    ReductionPlan,
    SecondExponentResult,
    full_support_reduction,
    lyapunov_iterative,
    lyapunov_monte_carlo,
    lyapunov_stationary,
    quotient_measure,
    reducibility_check,
    restrict_measure,
    second_exponent,
)
from .markov_cocycle import (
    CocycleMap,
    ErgodicityReport,
    FiniteKernel,
    SectionReport,
    apply_operator_power_markov,
    arrival_cocycle,
    averaged_contraction_bound_markov,
    constant_cocycle,
    ergodicity_check,
    find_certificate_markov,
    growth_observable_markov,
    invariant_section_check,
    iterate_kernel,
    kernel_norm,
    kernel_taylor,
    lyapunov_markov,
    lyapunov_markov_mc,
    path_measure,
    reduce_to_dominant_section,
)
from .markov_operator import (
    Observable,
    OperatorEvaluation,
    PairPlan,
    apply_operator_power,
    apply_operator_power_mc,
    growth_observable,
    holder_seminorm_lower,
)
from .measures import (
    AtomicMeasure,
    MassClass,
    PowerResult,
    convolve,
    convolve_power,
    dirac,
    support_within,
)
from .projlin import (
    ProjectivePoint,
    act,
    as_matrix,
    contraction_ratio,
    project,
    projective_distance,
    singular_values,
    wedge2_matrix,
    wedge2_norm,
)

__version__ = "0.1.0"
