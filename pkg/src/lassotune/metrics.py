"""Evaluation criteria: prediction risk, estimation consistency, support
F-score, and the oracle-OLS risk-estimation experiment."""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from ._rng import derive_rng, derive_seed
from .datagen import ScenarioConfig, SimulatedDataset, gen_design, gen_noise
from .errors import InvalidConfigError, SaturatedModelError
from .selectors import make_folds
from .solvers import df_lasso, ols_refit, train_error
from .variance import sigma2_cv, sigma2_rcv, sigma2_rmle

_TEST_TAG = 0x7E57


@dataclass(frozen=True)
class EvalRecord:
    """Per-replication scores of one method on one scenario."""

    method: str
    scenario: ScenarioConfig
    pred_risk: float
    consistency: float
    precision: float
    recall: float
    fscore: float
    replication_id: int

    def __post_init__(self):
        if self.precision * self.recall == 0.0 and self.fscore != 0.0:
            raise InvalidConfigError("fscore must vanish with either component")
        if (self.fscore == 1.0) != (self.precision == 1.0 and self.recall == 1.0):
            raise InvalidConfigError("fscore is 1 exactly when precision and recall are")


@dataclass(frozen=True)
class RiskExpRecord:
    """One risk estimate for the oracle OLS fit, against the test-set truth."""

    estimator: str
    estimate: float
    true_risk: float

    @property
    def squared_error(self) -> float:
        return (self.estimate - self.true_risk) ** 2


@dataclass(frozen=True)
class TestSet:
    X: np.ndarray
    Y: np.ndarray


def make_test_set(dataset: SimulatedDataset, n_test: int, rng: np.random.Generator) -> TestSet:
    """Fresh draws from the dataset's own (design, coefficients, noise) law."""
    cfg = dataset.config
    Xt = gen_design(n_test, cfg.p, cfg.rho, rng)
    eps = gen_noise(n_test, cfg.noise_kind, rng)
    Yt = Xt @ dataset.beta_star + math.sqrt(dataset.sigma2) * eps
    return TestSet(X=Xt, Y=Yt)


def pred_risk_on(test: TestSet, beta: np.ndarray, sigma2: float) -> float:
    """Mean squared test error minus the noise floor."""
    resid = test.Y - test.X @ beta
    return float(np.mean(resid**2)) - sigma2


def pred_risk(
    beta: np.ndarray,
    dataset: SimulatedDataset,
    n_test: int = 5000,
    rng: np.random.Generator | None = None,
) -> float:
    """Out-of-sample risk of a coefficient vector, excess over the noise level.

    Approximated by the average squared error on ``n_test`` fresh test
    observations.  Pass a generator to pair evaluations across methods.
    """
    if rng is None:
        cfg = dataset.config
        rng = derive_rng(cfg.seed, cfg.replication_id, _TEST_TAG)
    return pred_risk_on(make_test_set(dataset, n_test, rng), beta, dataset.sigma2)


def consistency(beta: np.ndarray, beta_star: np.ndarray) -> float:
    """Normalized estimation error ||b - b*||^2 / ||b*||^2.

    Values near 1 usually mean an overly sparse fit (b near zero).
    """
    denom = float(beta_star @ beta_star)
    if denom == 0.0:
        raise InvalidConfigError("consistency is undefined for beta_star = 0")
    diff = beta - beta_star
    return float(diff @ diff) / denom


def fscore(support, support_star) -> tuple[float, float, float]:
    """(precision, recall, F) of a recovered support against the truth.

    An empty selection has precision 0 by convention; F is 0 whenever
    either component is 0.
    """
    s = set(np.asarray(support, dtype=int).tolist())
    s_star = set(np.asarray(support_star, dtype=int).tolist())
    if not s_star:
        raise InvalidConfigError("the true support must be nonempty")
    hits = len(s & s_star)
    precision = hits / len(s) if s else 0.0
    recall = hits / len(s_star)
    f = 0.0 if precision * recall == 0.0 else 2.0 * precision * recall / (precision + recall)
    return precision, recall, f


def oracle_ols(dataset: SimulatedDataset) -> np.ndarray:
    """Least squares restricted to the true support."""
    s_star = dataset.support_star
    if len(s_star) >= dataset.n:
        raise SaturatedModelError(
            f"true support of size {len(s_star)} saturates n = {dataset.n}"
        )
    return ols_refit(dataset.X, s_star, dataset.Y)


def _cv_prediction_estimate(X, Y, support, K, rng) -> float:
    """K-fold estimate of the prediction error of OLS on a fixed support."""
    folds = make_folds(X.shape[0], K, rng)
    errs = []
    mask = np.ones(X.shape[0], dtype=bool)
    for fold in folds:
        mask[:] = True
        mask[fold] = False
        beta = ols_refit(X[mask], support, Y[mask])
        errs.append(float(np.mean((Y[fold] - X[fold] @ beta) ** 2)))
    return float(np.mean(errs))


def risk_estimation_experiment(
    dataset: SimulatedDataset, seed: int, n_test: int = 5000
) -> list[RiskExpRecord]:
    """Compare five estimators of the oracle-OLS prediction risk.

    The target is the full prediction risk E(Y - X'b)^2 of the OLS fit on
    the true support, measured on a fresh test set.  K-fold CV estimates
    it directly (refitting OLS-on-S* within folds, K in {2, 10}); the
    unbiased-risk estimators are converted to the same scale by adding
    their own variance plug-in back:  train + C_n * s2 * df  with
    C_n = 2/n.
    """
    X, Y = dataset.X, dataset.Y
    n = dataset.n
    beta_o = oracle_ols(dataset)
    support_o = np.flatnonzero(beta_o)
    df = df_lasso(X, support_o)
    train = train_error(X, Y, beta_o)
    c_n = 2.0 / n

    test = make_test_set(dataset, n_test, derive_rng(seed, _TEST_TAG))
    true_risk = pred_risk_on(test, beta_o, dataset.sigma2) + dataset.sigma2

    records = []
    for K, tag in ((2, 0x2F), (10, 0xAF)):
        est = _cv_prediction_estimate(X, Y, dataset.support_star, K, derive_rng(seed, tag))
        records.append(RiskExpRecord(f"CV-{K}-Fold", est, true_risk))
    estimators = (
        ("R-CV-2", sigma2_cv),
        ("R-RCV-2", sigma2_rcv),
        ("R-RMLE-2", sigma2_rmle),
    )
    for idx, (name, fn) in enumerate(estimators):
        s2 = fn(X, Y, K=10, seed=derive_seed(seed, 0x5E, idx)).value
        records.append(RiskExpRecord(name, train + c_n * s2 * df, true_risk))
    return records
