"""Best invariant (minimax) step estimators of a continuous cdf and its
transforms, under integrated bowl-shaped and balanced loss functions, with
risk verification tools and nomination-sampling applications."""

from .errors import (
    DivergentIntegral,
    DivergentMoment,
    DivergentObjective,
    ImproperPosterior,
    InvarcdfError,
    NonMonotoneResult,
    TiesDetected,
)
from .estimator import (
    StepEstimator,
    WeightVector,
    balanced_combine,
    best_invariant,
    constrained_weights,
    fit,
    genuineness_check,
    maxima_lse_weights,
    median_nom_weights,
    minima_weights,
    mle_nomination_weights,
    sel_tau_weights,
    solve_weight,
    weighted_solve,
)
from .model import BalancedSpec, LossSpec, Transform, WeightFunction, psi_eval
from .risk import (
    RiskReport,
    Sampler,
    balanced_risk_decompose,
    distribution_free_check,
    dominance_gap,
    invariant_risk,
    mc_risk,
    sel_invariant_risk,
)
from .sampling import NominationScheme, empirical_cdf, generate, true_tau_curve
from .special import (
    BetaIndex,
    QuadratureResult,
    beta_moment,
    digamma,
    inv_reg_inc_beta,
    log_beta,
    quad_beta_weighted,
    reg_inc_beta,
)

__version__ = "0.1.0"
