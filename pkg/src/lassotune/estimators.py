"""Scikit-learn compatible wrappers around the selection methods.

Each estimator picks its own lasso penalty during ``fit`` and exposes the
usual ``coef_`` / ``predict`` surface, so the selectors compose with
pipelines, ``clone`` and the rest of the ecosystem.  Models are fit
without an intercept, matching the centered designs they target.
"""
from __future__ import annotations

import math

import numpy as np
from sklearn.base import BaseEstimator, RegressorMixin
from sklearn.utils.validation import check_array, check_is_fitted, check_X_y

from .selectors import (
    kfold_cv,
    select_risk,
    sqrt_lambda_default,
    sqrt_lasso,
    sqrt_lasso_refit,
    ssr,
    two_stage,
)
from .solvers import default_grid, lasso_path
from .variance import sigma2_cv, sigma2_rcv, sigma2_rmle

_VARIANCE_FNS = {"cv": sigma2_cv, "rmle": sigma2_rmle, "rcv": sigma2_rcv}


class _SelectedLasso(RegressorMixin, BaseEstimator):
    """Shared predict/validation plumbing for the fitted-selector estimators."""

    def _validate(self, X, y):
        return check_X_y(X, y, dtype=np.float64, y_numeric=True)

    def _finish(self, X, result):
        self.coef_ = result.beta
        self.lambda_ = result.lam
        self.support_ = result.support
        self.sigma2_ = result.sigma2_used
        self.selection_ = result
        self.n_features_in_ = X.shape[1]
        return self

    def predict(self, X):
        check_is_fitted(self, "coef_")
        X = check_array(X, dtype=np.float64)
        return X @ self.coef_


class RiskMinimizingLasso(_SelectedLasso):
    """Lasso tuned by minimizing an unbiased risk estimate along the path.

    Parameters
    ----------
    variance : {"cv", "rmle", "rcv"} or float
        Plug-in noise-variance estimator, or a known variance value.
    penalty : {"2/n", "log(n)/n"} or float
        The complexity constant C_n of the risk estimate.
    cv_folds : int
        Folds for the variance estimator's internal cross-validation.
    random_state : int
        Seed for the internal fold/split streams.
    """

    def __init__(self, variance="cv", penalty="2/n", cv_folds=10, random_state=0):
        self.variance = variance
        self.penalty = penalty
        self.cv_folds = cv_folds
        self.random_state = random_state

    def fit(self, X, y):
        X, y = self._validate(X, y)
        n = X.shape[0]
        if isinstance(self.variance, str):
            fn = _VARIANCE_FNS.get(self.variance)
            if fn is None:
                raise ValueError(f"variance must be one of {sorted(_VARIANCE_FNS)} or a float")
            sigma2 = fn(X, y, K=self.cv_folds, seed=self.random_state).value
        else:
            sigma2 = float(self.variance)
        if self.penalty == "2/n":
            c_n = 2.0 / n
        elif self.penalty == "log(n)/n":
            c_n = math.log(n) / n
        else:
            c_n = float(self.penalty)
        path = lasso_path(X, y)
        return self._finish(X, select_risk(path, X, y, sigma2, c_n))


class CrossValidatedLasso(_SelectedLasso):
    """Lasso tuned by K-fold cross-validation over a shared penalty grid."""

    def __init__(self, cv_folds=10, grid_size=100, grid_eps=1e-3, random_state=0):
        self.cv_folds = cv_folds
        self.grid_size = grid_size
        self.grid_eps = grid_eps
        self.random_state = random_state

    def fit(self, X, y):
        X, y = self._validate(X, y)
        grid = default_grid(X, y, m=self.grid_size, eps=self.grid_eps)
        return self._finish(
            X, kfold_cv(X, y, K=self.cv_folds, grid=grid, seed=self.random_state)
        )


class TwoStageLasso(_SelectedLasso):
    """GCV screen followed by risk-estimate selection on the screened columns."""

    def __init__(self, cv_folds=10, random_state=0):
        self.cv_folds = cv_folds
        self.random_state = random_state

    def fit(self, X, y):
        X, y = self._validate(X, y)
        return self._finish(X, two_stage(X, y, K=self.cv_folds, seed=self.random_state))


class ScaledSparseLasso(_SelectedLasso):
    """Joint coefficient/scale estimation with a fixed universal penalty level."""

    def __init__(self, lambda0=None, a=0.0, tol=1e-6, max_iter=100):
        self.lambda0 = lambda0
        self.a = a
        self.tol = tol
        self.max_iter = max_iter

    def fit(self, X, y):
        X, y = self._validate(X, y)
        return self._finish(
            X, ssr(X, y, lambda0=self.lambda0, a=self.a, tol=self.tol, max_iter=self.max_iter)
        )


class SquareRootLasso(_SelectedLasso):
    """Square-root lasso with its scale-free canonical penalty.

    ``refit=True`` replaces the shrunken coefficients with the OLS fit on
    the selected support.
    """

    def __init__(self, c=1.1, alpha_level=0.05, refit=False):
        self.c = c
        self.alpha_level = alpha_level
        self.refit = refit

    def fit(self, X, y):
        X, y = self._validate(X, y)
        lam = sqrt_lambda_default(X.shape[0], X.shape[1], c=self.c, alpha_level=self.alpha_level)
        result = sqrt_lasso_refit(X, y, lam) if self.refit else sqrt_lasso(X, y, lam)
        return self._finish(X, result)
