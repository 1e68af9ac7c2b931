"""Tuning-parameter selection for high-dimensional lasso regression.

Functional core (solvers, variance estimators, selectors, metrics), a
seeded simulation harness with a CLI, and scikit-learn style estimator
wrappers.
"""

from .datagen import (
    NoiseKind,
    ScenarioConfig,
    SimulatedDataset,
    example1_dataset,
    example2_config,
    gen_beta,
    gen_dataset,
    gen_design,
    gen_noise,
)
from .errors import (
    ConvergenceError,
    DegenerateProblemError,
    InvalidConfigError,
    LassotuneError,
    SaturatedModelError,
)
from .estimators import (
    CrossValidatedLasso,
    RiskMinimizingLasso,
    ScaledSparseLasso,
    SquareRootLasso,
    TwoStageLasso,
)
from .metrics import (
    EvalRecord,
    RiskExpRecord,
    consistency,
    fscore,
    oracle_ols,
    pred_risk,
    risk_estimation_experiment,
)
from .selectors import (
    CriterionTrace,
    GicPenalty,
    GicSpec,
    SelectionResult,
    gcv_select,
    gcv_value,
    gic,
    kfold_cv,
    risk_estimate,
    select_risk,
    sqrt_lambda_default,
    sqrt_lasso,
    sqrt_lasso_refit,
    ssr,
    two_stage,
)
from .solvers import (
    FittedModel,
    LambdaGrid,
    LassoPath,
    default_grid,
    df_lasso,
    kkt_residual,
    lambda_max,
    lasso_cd,
    lasso_grid,
    lasso_path,
    ols_refit,
    ridge,
    ridge_df,
)
from .variance import VarianceEstimate, sigma2_cv, sigma2_rcv, sigma2_rmle

__version__ = "0.1.0"
