"""Tuning-parameter selection methods for the lasso.

Covers minimization of the unbiased risk estimate

    R(b; s2, C_n) = train(b) - s2 + C_n * s2 * df(b),

the generalized-information-criterion family log(train) + C_n g(df)
(AIC, BIC, GCV), K-fold cross-validation, a GCV-screened two-stage
procedure, scaled sparse regression, and the square-root lasso with an
optional OLS refit.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum

import numpy as np
from scipy.special import ndtri

from ._rng import derive_rng, derive_seed
from .errors import (
    ConvergenceError,
    DegenerateProblemError,
    InvalidConfigError,
    SaturatedModelError,
)
from .solvers import (
    LambdaGrid,
    LassoPath,
    as_lambda_grid,
    default_grid,
    df_lasso,
    lasso_cd,
    lasso_grid,
    lasso_path,
    ols_refit,
    train_error,
)
from .variance import sigma2_cv

_FOLD_TAG = 0xF01D


class GicPenalty(str, Enum):
    IDENTITY = "identity"  # g(x) = x
    GCV_LOG = "gcv_log"  # g(x) = log(1 - x/n)


@dataclass(frozen=True)
class GicSpec:
    """Penalty constant and shape function of a generalized information criterion."""

    c_n: float
    g: GicPenalty = GicPenalty.IDENTITY

    def __post_init__(self):
        if not math.isfinite(self.c_n):
            raise InvalidConfigError("c_n must be finite")

    @staticmethod
    def aic(n: int) -> "GicSpec":
        return GicSpec(c_n=2.0 / n, g=GicPenalty.IDENTITY)

    @staticmethod
    def bic(n: int) -> "GicSpec":
        return GicSpec(c_n=math.log(n) / n, g=GicPenalty.IDENTITY)


@dataclass(frozen=True)
class CriterionTrace:
    """A criterion evaluated over decreasing penalties, with its argmin.

    Ties are broken toward the largest penalty, which is the first index
    because the evaluation points are stored in decreasing order.
    """

    lambdas: np.ndarray
    values: np.ndarray
    minimizer_index: int

    @classmethod
    def from_values(cls, lambdas, values) -> "CriterionTrace":
        lambdas = np.asarray(lambdas, dtype=float)
        values = np.asarray(values, dtype=float)
        if lambdas.shape != values.shape:
            raise InvalidConfigError("one criterion value per penalty required")
        if lambdas.size > 1 and not np.all(np.diff(lambdas) < 0):
            raise InvalidConfigError("evaluation points must be strictly decreasing")
        return cls(lambdas=lambdas, values=values, minimizer_index=int(np.argmin(values)))

    @property
    def lambda_min_value(self) -> float:
        return float(self.lambdas[self.minimizer_index])


@dataclass(frozen=True)
class SelectionResult:
    """A chosen coefficient vector plus the selector's identity and trace."""

    method: str
    beta: np.ndarray
    lam: float | None
    support: np.ndarray
    sigma2_used: float | None = None
    trace: CriterionTrace | None = None
    diagnostics: dict = field(default_factory=dict)


# ---------------------------------------------------------------------------
# risk-estimate selection
# ---------------------------------------------------------------------------


def risk_estimate(train_err: float, sigma2: float, df: float, c_n: float) -> float:
    """Excess-risk estimate train - sigma2 + C_n * sigma2 * df."""
    if sigma2 < 0:
        raise InvalidConfigError(f"sigma2 must be >= 0, got {sigma2}")
    if df < 0:
        raise InvalidConfigError(f"df must be >= 0, got {df}")
    return train_err - sigma2 + c_n * sigma2 * df

def select_risk(
    path: LassoPath,
    X: np.ndarray,
    Y: np.ndarray,
    sigma2: float,
    c_n: float,
    method: str = "risk",
) -> SelectionResult:
    """Minimize the risk estimate over the knots of a solution path.

    Degrees of freedom at each knot are the recorded rank(X_S).  Paired
    with a variance source and penalty constant this implements the
    R-CV-2 / R-RMLE-2 / R-RCV-2 / R-CV-logn selectors.
    """
    if len(path) == 0:
        raise InvalidConfigError("path has no knots")
    values = np.array(
        [
            risk_estimate(train_error(X, Y, path.betas[k]), sigma2, path.ranks[k], c_n)
            for k in range(len(path))
        ]
    )
    trace = CriterionTrace.from_values(path.knots, values)
    i = trace.minimizer_index
    beta = path.betas[i]
    return SelectionResult(
        method=method,
        beta=beta.copy(),
        lam=float(path.knots[i]),
        support=np.flatnonzero(beta),
        sigma2_used=float(sigma2),
        trace=trace,
        diagnostics={"c_n": c_n},
    )


# ---------------------------------------------------------------------------
# information criteria
# ---------------------------------------------------------------------------


def gic(train_err: float, df: float, spec: GicSpec, n: int) -> float:
    """log(train) + C_n g(df); -inf on a saturated (zero training error) fit."""
    if train_err < 0:
        raise InvalidConfigError(f"training error must be >= 0, got {train_err}")
    if train_err == 0.0:
        return -math.inf
    if spec.g is GicPenalty.IDENTITY:
        pen = spec.c_n * df
    else:
        frac = 1.0 - df / n
        if frac <= 0.0:
            pen = math.inf if spec.c_n < 0 else -math.inf
        else:
            pen = spec.c_n * math.log(frac)
    return math.log(train_err) + pen


def gcv_value(train_err: float, df: float, n: int) -> float:
    """train / (1 - df/n)^2, infinite once df reaches n."""
    frac = 1.0 - df / n
    if frac <= 0.0:
        return math.inf
    return train_err / frac**2


def gcv_select(path: LassoPath, X: np.ndarray, Y: np.ndarray) -> SelectionResult:
    """Minimize generalized cross-validation over the path knots."""
    n = X.shape[0]
    values = np.array(
        [gcv_value(train_error(X, Y, path.betas[k]), path.ranks[k], n) for k in range(len(path))]
    )
    if not np.any(np.isfinite(values)):
        raise SaturatedModelError("every knot of the path is saturated")
    trace = CriterionTrace.from_values(path.knots, values)
    i = trace.minimizer_index
    beta = path.betas[i]
    return SelectionResult(
        method="GCV",
        beta=beta.copy(),
        lam=float(path.knots[i]),
        support=np.flatnonzero(beta),
        trace=trace,
        diagnostics={"saturated_knots": int(np.sum(~np.isfinite(values)))},
    )


# ---------------------------------------------------------------------------
# K-fold cross-validation
# ---------------------------------------------------------------------------


def make_folds(n: int, K: int, rng: np.random.Generator) -> list[np.ndarray]:
    """Random partition into K near-equal folds, canonically ordered."""
    perm = rng.permutation(n)
    folds = [np.sort(f) for f in np.array_split(perm, K)]
    folds.sort(key=lambda f: int(f[0]))
    return folds


def cv_curve(
    X: np.ndarray,
    Y: np.ndarray,
    folds: list[np.ndarray],
    grid: LambdaGrid,
    tol: float = 1e-5,
) -> np.ndarray:
    """Averaged held-out squared error over the grid, one row per fold.

    Folds are evaluated in canonical order so the reduction does not
    depend on who computed which fold.
    """
    n = X.shape[0]
    folds = sorted((np.sort(f) for f in folds), key=lambda f: int(f[0]))
    errors = np.empty((len(folds), len(grid)))
    mask = np.ones(n, dtype=bool)
    for k, fold in enumerate(folds):
        mask[:] = True
        mask[fold] = False
        betas = lasso_grid(X[mask], Y[mask], grid, tol=tol)
        preds = X[fold] @ betas.T
        errors[k] = np.mean((Y[fold][:, None] - preds) ** 2, axis=0)
    return errors


def kfold_cv(
    X: np.ndarray,
    Y: np.ndarray,
    K: int = 10,
    grid: LambdaGrid | None = None,
    seed: int = 0,
) -> SelectionResult:
    """Select the penalty minimizing the K-fold validation error curve.

    Every fold is fit over the same shared grid (warm-started downward),
    making the validation errors directly comparable across folds.  The
    returned fit is on the full data at the selected penalty, and the
    trace carries the CV curve, itself a prediction-risk estimate.
    """
    n = X.shape[0]
    if K < 2 or K > n:
        raise InvalidConfigError(f"K must lie in [2, n], got K={K} with n={n}")
    grid = default_grid(X, Y) if grid is None else as_lambda_grid(grid)
    folds = make_folds(n, K, derive_rng(seed, _FOLD_TAG))
    curve = cv_curve(X, Y, folds, grid).mean(axis=0)
    trace = CriterionTrace.from_values(grid.values, curve)
    lam = float(grid.values[trace.minimizer_index])
    # a deep-grid minimizer with p >> n sits near an interpolant where
    # coordinate descent crawls; give the final fit a generous budget
    fit = lasso_cd(X, Y, lam, tol=1e-7, max_sweeps=2_000_000)
    return SelectionResult(
        method=f"CV-{K}-Fold",
        beta=fit.beta,
        lam=lam,
        support=fit.support,
        trace=trace,
        diagnostics={"k": K, "fold_sizes": [len(f) for f in folds], "sweeps": fit.sweeps},
    )


# ---------------------------------------------------------------------------
# two-stage screening
# ---------------------------------------------------------------------------


def two_stage(
    X: np.ndarray,
    Y: np.ndarray,
    K: int = 10,
    grid: LambdaGrid | None = None,
    seed: int = 0,
    path: LassoPath | None = None,
) -> SelectionResult:
    """GCV screen, then risk-estimate selection on the screened columns.

    Stage one picks the GCV minimizer along the full path (GCV tends to
    under-regularize, so its support is a generous screen).  Stage two
    reruns the path on the screened columns and minimizes the risk
    estimate with the cross-validated variance plug-in and the heavier
    penalty C_n = log(n)/n.
    """
    n, p = X.shape
    if path is None:
        path = lasso_path(X, Y)
    screen = gcv_select(path, X, Y)
    s1 = screen.support
    if s1.size == 0:
        return SelectionResult(
            method="2-stage",
            beta=np.zeros(p),
            lam=None,
            support=s1,
            trace=screen.trace,
            diagnostics={"empty_screen": True, "lambda_gcv": screen.lam},
        )
    if df_lasso(X, s1) >= n:
        raise SaturatedModelError("GCV screen saturates the model")
    Xr = X[:, s1]
    # stage-two CV runs on the screened design, so it gets its own grid
    var = sigma2_cv(Xr, Y, K=K, grid=None, seed=derive_seed(seed, 0x25A6))
    path2 = lasso_path(Xr, Y)
    c_n = math.log(n) / n
    sel = select_risk(path2, Xr, Y, var.value, c_n, method="2-stage")
    beta = np.zeros(p)
    beta[s1] = sel.beta
    return SelectionResult(
        method="2-stage",
        beta=beta,
        lam=sel.lam,
        support=s1[np.flatnonzero(sel.beta)],
        sigma2_used=var.value,
        trace=sel.trace,
        diagnostics={
            "screen_support": s1,
            "lambda_gcv": screen.lam,
            "c_n": c_n,
        },
    )


# ---------------------------------------------------------------------------
# scaled sparse regression
# ---------------------------------------------------------------------------


def ssr(
    X: np.ndarray,
    Y: np.ndarray,
    lambda0: float | None = None,
    a: float = 0.0,
    tol: float = 1e-6,
    max_iter: int = 100,
) -> SelectionResult:
    """Joint scale-and-coefficient estimation by alternating minimization.

    The objective  (2 n sigma)^{-1} ||Y - Xb||^2 + (1-a) sigma / 2
    + lambda0 ||b||_1  is minimized by alternating
    (i) a lasso solve in b: multiplying through by 2 sigma shows the
        stationary b solves the (1/n)-scaled lasso at an effective penalty
        lambda = 2 sigma lambda0;
    (ii) the closed-form scale update sigma^2 = ||Y - Xb||^2 / (n (1-a)).
    Iterations stop once successive sigma values agree within ``tol`` and
    are then polished a few more steps so the returned pair is a fixed
    point to well below the declared tolerance.
    """
    n, p = X.shape
    if lambda0 is None:
        lambda0 = math.sqrt(2.0 * math.log(p) / n)
    if not lambda0 > 0:
        raise InvalidConfigError(f"lambda0 must be > 0, got {lambda0}")
    if not 0.0 <= a < 1.0:
        raise InvalidConfigError(f"a must lie in [0, 1), got {a}")
    sigma = float(np.linalg.norm(Y)) / math.sqrt(n)
    if sigma < 1e-12:
        raise DegenerateProblemError("response is identically zero")
    beta = np.zeros(p)
    iterations = 0
    converged = False
    for _ in range(max_iter):
        iterations += 1
        fit = lasso_cd(X, Y, 2.0 * sigma * lambda0, warm_start=beta)
        beta = fit.beta
        rss = float(np.sum((Y - X @ beta) ** 2))
        sigma_new = math.sqrt(rss / (n * (1.0 - a)))
        if sigma_new < 1e-12:
            raise DegenerateProblemError("residual scale collapsed to zero")
        step = abs(sigma_new - sigma)
        sigma = sigma_new
        if step < tol:
            converged = True
            break
    if not converged:
        raise ConvergenceError(
            f"scale iteration did not settle within {max_iter} steps",
            last_result=_ssr_result(beta, sigma, lambda0, a, iterations, converged),
        )
    # polish to a tight fixed point; contraction makes this a few cheap steps
    for _ in range(50):
        fit = lasso_cd(X, Y, 2.0 * sigma * lambda0, warm_start=beta)
        beta = fit.beta
        rss = float(np.sum((Y - X @ beta) ** 2))
        sigma_new = math.sqrt(rss / (n * (1.0 - a)))
        step = abs(sigma_new - sigma)
        sigma = sigma_new
        iterations += 1
        if step < 1e-11:
            break
    return _ssr_result(beta, sigma, lambda0, a, iterations, converged)


def _ssr_result(beta, sigma, lambda0, a, iterations, converged) -> SelectionResult:
    return SelectionResult(
        method="SSR",
        beta=beta,
        lam=None,
        support=np.flatnonzero(beta),
        sigma2_used=sigma**2,
        diagnostics={
            "iterations": iterations,
            "lambda0": lambda0,
            "a": a,
            "lambda_effective": 2.0 * sigma * lambda0,
            "sigma": sigma,
            "converged": converged,
        },
    )


# ---------------------------------------------------------------------------
# square-root lasso
# ---------------------------------------------------------------------------


def sqrt_lasso(
    X: np.ndarray,
    Y: np.ndarray,
    lambda_n: float,
    tol: float = 1e-8,
    max_iter: int = 100,
) -> SelectionResult:
    """Minimize ||Y - Xb||_2 / sqrt(n) + (lambda_n / n) ||b||_1.

    Solved by a fixed-point scheme on the residual scale: with
    s = ||Y - Xb|| / sqrt(n), the stationarity condition matches the
    (1/n)-scaled lasso at penalty 2 lambda_n s / n, so each step is one
    lasso solve followed by a scale refresh.  The objective is
    nondifferentiable at interpolation, so a vanishing residual raises.
    """
    n, p = X.shape
    if not lambda_n > 0:
        raise InvalidConfigError(f"lambda_n must be > 0, got {lambda_n}")
    sigma = float(np.linalg.norm(Y)) / math.sqrt(n)
    if sigma < 1e-12:
        raise DegenerateProblemError("response is identically zero")
    beta = np.zeros(p)
    iterations = 0
    converged = False
    for _ in range(max_iter):
        iterations += 1
        fit = lasso_cd(X, Y, 2.0 * lambda_n * sigma / n, warm_start=beta)
        beta = fit.beta
        sigma_new = float(np.linalg.norm(Y - X @ beta)) / math.sqrt(n)
        if sigma_new < 1e-12:
            raise DegenerateProblemError("residual vanished: objective nondifferentiable")
        step = abs(sigma_new - sigma)
        sigma = sigma_new
        if step < tol:
            converged = True
            break
    objective = sigma + (lambda_n / n) * float(np.sum(np.abs(beta)))
    result = SelectionResult(
        method="SQRT",
        beta=beta,
        lam=None,
        support=np.flatnonzero(beta),
        sigma2_used=sigma**2,
        diagnostics={
            "iterations": iterations,
            "lambda_n": lambda_n,
            "objective": objective,
            "converged": converged,
        },
    )
    if not converged:
        raise ConvergenceError(
            f"scale iteration did not settle within {max_iter} steps", last_result=result
        )
    return result


def sqrt_lambda_default(n: int, p: int, c: float = 1.1, alpha_level: float = 0.05) -> float:
    """Canonical scale-free penalty c sqrt(n) PhiInv(1 - alpha/(2p))."""
    if not 0.0 < alpha_level < 1.0:
        raise InvalidConfigError(f"alpha_level must lie in (0, 1), got {alpha_level}")
    return c * math.sqrt(n) * float(ndtri(1.0 - alpha_level / (2.0 * p)))


def sqrt_lasso_refit(X: np.ndarray, Y: np.ndarray, lambda_n: float) -> SelectionResult:
    """Square-root lasso followed by OLS on its support (same support, less shrinkage)."""
    base = sqrt_lasso(X, Y, lambda_n)
    beta = ols_refit(X, base.support, Y)
    return SelectionResult(
        method="SQRT-refitted",
        beta=beta,
        lam=None,
        support=base.support,
        sigma2_used=base.sigma2_used,
        diagnostics=dict(base.diagnostics),
    )
