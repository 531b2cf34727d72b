"""Legendre-transform geometry and Szegő-kernel integrals for polynomial tube domains.

The tube is ``{(z1, z2) in C^2 : Im z2 > b(Re z1)}`` for a real polynomial
``b`` of even degree ``2n >= 4`` with positive leading coefficient.
"""

from .polynomial import (
    DomainError,
    NotNonnegativeError,
    Polynomial,
    PolynomialError,
    QuadraticFactorization,
    RootList,
    convexity_intervals,
    derivative,
    evaluate,
    factor_nonneg,
    format_polynomial,
    parse_polynomial,
    real_roots,
    validate_domain,
)
from .legendre import (
    AsymptoticRatios,
    EnvelopeTable,
    Gap,
    MinimizerSet,
    asymptotic_ratios,
    biconjugate,
    gap_intervals,
    lambda_of,
    legendre,
    minimizer_set,
    minimizers_batch,
)
from .singular import (
    AValues,
    ClassificationError,
    KernelQuery,
    PairClassification,
    A_value,
    classify_pair,
    convergence_margin,
    in_lambda,
    margin_minimizing_slope,
    vanishing_factor,
)
from .laplace import (
    NResult,
    QuadratureError,
    QuadratureResult,
    ShiftedPolynomial,
    UpperBoundCheck,
    N_value,
    bnw_estimate,
    laplace_integral,
    lower_bound_I,
    shift_poly,
    upper_bound_check,
)
from .kernel_eval import (
    DivergenceProbe,
    KernelDomainError,
    KernelEvaluation,
    I_j_integrated,
    I_j_lower,
    abs_kernel,
    abs_kernel_orders,
    divergence_probe,
    kernel,
)

__version__ = "0.1.0"
