"""Risk-minimal static hedges of liabilities ``<X, L>``: expansions, Monte Carlo oracle and SCR comparison."""
from .errors import ConvergenceError, DegenerateError, DomainError, NumericError, TailSampleWarning
from .expansions import (ExpansionResult, OptimalAllocation, cornish_fisher_var, covariance_allocation,
                         es2_multi, es_expand_1d, gram_charlier_cdf, phi_star_es2_multi, phi_star_var2_multi,
                         phi_star_var3_1d, special_point_derivative, surplus_moments, var2_multi, var_expand_1d)
from .kterms import KTermBundle, RotationMatrix, k_bundle, k_univariate, kderiv_finite_difference_check, rotation_matrix
from .mc_oracle import (McConfig, RiskEstimate, SurplusSimulation, derivative_at_q_mc, es_from_var_integral, es_mc,
                        minimize_risk_mc, risk_profile, simulate_surplus, var_mc)
from .models import (AssetFamily, DensityClaims, Empirical, GaussianClaims, MarketModel, NormalizationReport,
                     ShiftedLognormal, StandardNormal, UnivariateClaim, VolKind, build_asset, claim_quantile,
                     exact_central_moments, expanded_central_moments, gaussian_claim, normalize_problem,
                     univariate_model)
from .scr_modular import ScrReport, aggregate_sqrt, scr_comparison_report, scr_integrated, scr_market

__version__ = "0.1.0"
