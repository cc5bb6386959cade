"""Heterogeneous treatment and spillover effects in two-member groups.

Estimates marginal conditional spillover/direct effects (MCSE/MCDE),
local and full-population averages (LACSE/LACDE, ACSE/ACDE), and
policy-relevant treatment effects when two units choose binary treatments
simultaneously and selection is driven by a pair of correlated latent
resistances instrumented through index thresholds.
"""

from .copula import CopulaSpec, bvn_cdf, copula, copula_density, fit_rho, quadrant_probability
from .diagnostics import DiagnosticReport, index_sufficiency_report, nesting_inequality_report
from .effects import (PointMoments, acse_acde, complier_effects, lacde_fixed_peer,
                      lacde_rectangle, lacse_fixed_own, lacse_rectangle,
                      model_implied_moments)
from .errors import (BoundaryWarning, ConditionNumberWarning, ConfigError, DataError,
                     DegenerateError, EmptyWindowError, GroupMteError,
                     InfeasiblePolicyError, InsufficientOverlapError, NoMoversError,
                     RankDeficientError, SeparationError, SingularWindowError,
                     ZeroDenominatorError)
from .inference import (EVAL_POINTS, BootstrapResult, CoverageResult, Target,
                        bootstrap, coverage_experiment, default_targets)
from .io import load_config_json, load_dataset_csv, write_dataset_csv, write_rows_csv
from .model import Dataset, EffectSurface, EvalPoint, GroupRecord, Layout, make_dataset
from .mtr import evaluate_mtr, fit_all_arms, mcde_parametric, mcse_parametric
from .pipeline import ParametricFit, PipelineConfig, fit_parametric_pipeline
from .probit import ProbitModel, build_multi_index_basis, fit_probit, predict_propensity
from .prte import PolicySpec, PrteResult, counterfactual_propensity, prte, surfaces_from_fit
from .quadrature import truncated_moments
from .semiparametric import (LocalFit, SeriesModel, asymptotic_variance,
                             estimate_copula_density_semiparam, fit_partial_linear_beta,
                             fit_series_propensity, kernel_moment_matrices,
                             local_cubic_cross_derivative, select_bandwidth,
                             semiparam_mtr, trim_propensity)
from .simulation import DgpConfig, naive_mte, simulate_dataset, stream, true_effect, true_mtr

__version__ = "0.1.0"

__all__ = [name for name in dir() if not name.startswith("_")]
