"""Estimation lower bounds for LTI state-space models.

Simulation and least squares for x_{i+1} = A x_i + B e_i, the closed-form
information matrix, Cramer-Rao-type and Bayesian (van Trees) lower bounds
with an explicit operator-ball prior, and a seeded Monte Carlo suite that
verifies the exact identities behind every bound.
"""

from .bounds import (
    BoundReport,
    NotDiagonalizableError,
    SpectralSplit,
    cr_bound,
    delta1,
    delta2,
    geom_sum,
    geom_sum_lower,
    l_ab,
    lab_upper_bound,
    phi,
    prop_bound_no_limit,
    prop_bound_with_limit,
    psi,
    spectral_split,
)
from .linalg import (
    SvdResult,
    eig_sym,
    haar_orthogonal,
    is_psd_dominated,
    schatten_norm,
    svd,
    sym_inv_sqrt,
)
from .minimax import (
    PriorSample,
    PriorSpec,
    grad_log_prior,
    minimax_regimes,
    prior_density,
    prior_fisher,
    sample_prior,
    score_identity_lhs,
    van_trees_bound,
    z_const,
)
from .model import (
    GramStatistics,
    SingularCovarianceError,
    SystemParams,
    Trajectory,
    fisher_information,
    gram_stats,
    least_squares,
    log_likelihood,
    sensitivity,
    simulate,
    simulate_injected,
)
from .montecarlo import (
    ConcentrationReport,
    RiskEstimate,
    bayes_risk_experiment,
    concentration_experiment,
    dominance_check,
    empirical_risk,
    mc_fisher_check,
    mc_score_mean,
    mc_selfnorm_identity,
    multiplication_experiment,
    norm_ineq_fuzz,
)
from .rng import Stream

__version__ = "0.1.0"

__all__ = [
    "BoundReport",
    "ConcentrationReport",
    "GramStatistics",
    "NotDiagonalizableError",
    "PriorSample",
    "PriorSpec",
    "RiskEstimate",
    "SingularCovarianceError",
    "SpectralSplit",
    "Stream",
    "SvdResult",
    "SystemParams",
    "Trajectory",
    "bayes_risk_experiment",
    "concentration_experiment",
    "cr_bound",
    "delta1",
    "delta2",
    "dominance_check",
    "eig_sym",
    "empirical_risk",
    "fisher_information",
    "geom_sum",
    "geom_sum_lower",
    "grad_log_prior",
    "gram_stats",
    "haar_orthogonal",
    "is_psd_dominated",
    "l_ab",
    "lab_upper_bound",
    "least_squares",
    "log_likelihood",
    "mc_fisher_check",
    "mc_score_mean",
    "mc_selfnorm_identity",
    "minimax_regimes",
    "multiplication_experiment",
    "norm_ineq_fuzz",
    "phi",
    "prior_density",
    "prior_fisher",
    "prop_bound_no_limit",
    "prop_bound_with_limit",
    "psi",
    "sample_prior",
    "schatten_norm",
    "score_identity_lhs",
    "sensitivity",
    "simulate",
    "simulate_injected",
    "spectral_split",
    "svd",
    "sym_inv_sqrt",
    "van_trees_bound",
    "z_const",
]
