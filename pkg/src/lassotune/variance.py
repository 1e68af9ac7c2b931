"""Noise-variance estimators that remain usable when p exceeds n.

Three estimators, all anchored at a cross-validated lasso fit:

* ``sigma2_cv`` - residual sum of squares of the CV-selected lasso fit,
  divided by n - rank(X_S).
* ``sigma2_rmle`` - squared norm of the projection of Y off the column
  space of the selected variables, same denominator.  By the projection
  argument it can never exceed ``sigma2_cv`` at the same selected penalty.
* ``sigma2_rcv`` - refitted cross-validation: select on one random half,
  estimate by OLS refit on the other, average over the swap.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ._rng import derive_rng, derive_seed
from .errors import SaturatedModelError
from .solvers import LambdaGrid, default_grid, df_lasso, lasso_cd, ols_refit

_RCV_TAG = 0x5CF1


@dataclass(frozen=True)
class VarianceEstimate:
    """A sigma^2 estimate tagged with its estimator and intermediates."""

    value: float
    estimator: str  # "CV", "RMLE", or "RCV"
    lambda_cv: float | None
    df_used: int
    half_estimates: tuple[float, float] | None = None
    fallback: bool = False


def _cv_anchor(X, Y, K, grid, seed, cv_result):
    """Shared CV-selected fit used by the CV and RMLE estimators.

    If the selected fit is nearly saturated (df >= n - 1), walk back toward
    larger grid penalties until df <= n/2 and flag the estimate; this keeps
    sweeps running while recording the pathology.
    """
    from .selectors import kfold_cv  # deferred: selectors imports this module

    n = X.shape[0]
    cv = cv_result if cv_result is not None else kfold_cv(X, Y, K=K, grid=grid, seed=seed)
    lam = cv.lam
    beta = cv.beta
    df = df_lasso(X, cv.support)
    fallback = False
    if df >= n - 1:
        fallback = True
        lambdas = cv.trace.lambdas
        pos = int(np.searchsorted(-lambdas, -lam))
        for k in range(pos - 1, -1, -1):
            fit = lasso_cd(X, Y, lambdas[k], tol=1e-7, max_sweeps=2_000_000)
            if fit.df <= n / 2:
                lam, beta, df = lambdas[k], fit.beta, fit.df
                break
        else:
            raise SaturatedModelError(
                "no grid penalty yields a model with df <= n/2"
            )
    if df >= n:
        raise SaturatedModelError(f"selected model has df = {df} with n = {n}")
    return lam, beta, df, fallback


def sigma2_cv(
    X: np.ndarray,
    Y: np.ndarray,
    K: int = 10,
    grid: LambdaGrid | None = None,
    seed: int = 0,
    cv_result=None,
) -> VarianceEstimate:
    """Residual-based estimate at the CV-selected penalty: RSS / (n - df)."""
    n = X.shape[0]
    lam, beta, df, fallback = _cv_anchor(X, Y, K, grid, seed, cv_result)
    resid = Y - X @ beta
    return VarianceEstimate(
        value=float(resid @ resid) / (n - df),
        estimator="CV",
        lambda_cv=float(lam),
        df_used=int(df),
        fallback=fallback,
    )


def sigma2_rmle(
    X: np.ndarray,
    Y: np.ndarray,
    K: int = 10,
    grid: LambdaGrid | None = None,
    seed: int = 0,
    cv_result=None,
) -> VarianceEstimate:
    """Projection-based estimate: ||(I - H) Y||^2 / (n - rank), with H the
    projector onto the columns selected at the CV penalty."""
    n = X.shape[0]
    lam, beta, df, fallback = _cv_anchor(X, Y, K, grid, seed, cv_result)
    support = np.flatnonzero(beta)
    resid = _project_off(X, support, Y)
    return VarianceEstimate(
        value=float(resid @ resid) / (n - df),
        estimator="RMLE",
        lambda_cv=float(lam),
        df_used=int(df),
        fallback=fallback,
    )


def _project_off(X, support, Y):
    """Residual of Y against col(X_S); identity when S is empty."""
    if len(support) == 0:
        return Y
    U, d, _ = np.linalg.svd(X[:, support], full_matrices=False)
    tol = d.max(initial=0.0) * max(X.shape[0], len(support)) * np.finfo(float).eps
    Ur = U[:, d > tol]
    return Y - Ur @ (Ur.T @ Y)


def sigma2_rcv(
    X: np.ndarray,
    Y: np.ndarray,
    K: int = 10,
    grid: LambdaGrid | None = None,
    seed: int = 0,
    refit: str = "ols",
) -> VarianceEstimate:
    """Refitted cross-validation over a single random half split.

    Selection runs a fresh K-fold CV lasso on one half; the variance is
    estimated on the other half, by default through an OLS refit on the
    selected columns (``refit="ols"``), which decouples selection from
    estimation.  ``refit="plugin"`` instead plugs the selection-half lasso
    coefficients into the held-out residuals.
    """
    if refit not in ("ols", "plugin"):
        raise ValueError(f"refit must be 'ols' or 'plugin', got {refit!r}")
    n = X.shape[0]
    rng = derive_rng(seed, _RCV_TAG)
    perm = rng.permutation(n)
    first = np.sort(perm[: n // 2])
    second = np.sort(perm[n // 2 :])
    s1 = _half_estimate(X, Y, first, second, K, derive_seed(seed, _RCV_TAG, 1), refit)
    s2 = _half_estimate(X, Y, second, first, K, derive_seed(seed, _RCV_TAG, 2), refit)
    return VarianceEstimate(
        value=0.5 * (s1 + s2),
        estimator="RCV",
        lambda_cv=None,
        df_used=0,
        half_estimates=(s1, s2),
    )


def _half_estimate(X, Y, sel_idx, fit_idx, K, seed, refit):
    from .selectors import kfold_cv

    Xs, Ys = X[sel_idx], Y[sel_idx]
    Xf, Yf = X[fit_idx], Y[fit_idx]
    n_fit = len(fit_idx)
    grid = default_grid(Xs, Ys)
    cv = kfold_cv(Xs, Ys, K=K, grid=grid, seed=seed)
    lam, beta_sel, _, _ = _cv_anchor(Xs, Ys, K, grid, seed, cv)
    support = np.flatnonzero(beta_sel)
    rank = df_lasso(Xf, support)
    if rank >= n_fit:
        raise SaturatedModelError(
            f"selected set of size {len(support)} saturates the refit half (n = {n_fit})"
        )
    if refit == "ols":
        resid = Yf - Xf @ ols_refit(Xf, support, Yf)
    else:
        full = np.zeros(X.shape[1])
        full[support] = beta_sel[support]
        resid = Yf - Xf @ full
    return float(resid @ resid) / (n_fit - rank)
