"""Core estimators: lasso (coordinate descent and a LARS-style path), ridge,
OLS refits, and the rank-based lasso degrees-of-freedom estimator.

The lasso objective is fixed throughout as

    (1/n) ||Y - X b||_2^2 + lambda ||b||_1,

so the zero-solution threshold is lambda_max = 2 ||X'Y||_inf / n and the
coordinate update soft-thresholds at lambda/2.  The path solver and the
coordinate-descent solver are independent implementations and serve as
mutual correctness oracles.
"""
from __future__ import annotations

from dataclasses import dataclass
from enum import Enum

import numpy as np
from numba import njit

from .errors import ConvergenceError, DegenerateProblemError, InvalidConfigError

_DEN_TOL = 1e-10  # LARS entry denominators at or below this are treated as ties


class GridOrigin(str, Enum):
    KKT_MAX = "kkt_max"
    USER_SUPPLIED = "user_supplied"


@dataclass(frozen=True)
class LambdaGrid:
    """Strictly decreasing positive penalty values."""

    values: np.ndarray
    origin: GridOrigin = GridOrigin.USER_SUPPLIED

    def __post_init__(self):
        vals = np.asarray(self.values, dtype=float)
        object.__setattr__(self, "values", vals)
        if vals.ndim != 1 or vals.size == 0:
            raise InvalidConfigError("grid must be a nonempty 1-D array")
        if not np.all(vals > 0):
            raise InvalidConfigError("grid values must be strictly positive")
        if vals.size > 1 and not np.all(np.diff(vals) < 0):
            raise InvalidConfigError("grid values must be strictly decreasing")

    def __len__(self) -> int:
        return len(self.values)


def as_lambda_grid(grid) -> LambdaGrid:
    if isinstance(grid, LambdaGrid):
        return grid
    return LambdaGrid(values=np.asarray(grid, dtype=float))


@dataclass(frozen=True)
class FittedModel:
    """A single lasso fit with its optimality diagnostics."""

    beta: np.ndarray
    lam: float
    support: np.ndarray
    df: int
    train_err: float
    kkt_residual: float
    sweeps: int
    converged: bool


@dataclass(frozen=True)
class LassoPath:
    """Knot sequence of a piecewise-linear lasso solution path.

    ``knots`` are the decreasing penalty values at which the active set
    changes; ``betas[k]`` is the coefficient vector exactly at ``knots[k]``
    (all zero at the first knot), and ``ranks[k]`` is rank(X_S) for the
    support of ``betas[k]``.
    """

    knots: np.ndarray
    betas: np.ndarray
    active_sets: tuple
    ranks: tuple

    def __post_init__(self):
        if len(self.knots) != len(self.betas):
            raise InvalidConfigError("one coefficient vector per knot required")
        if np.any(self.betas[0] != 0):
            raise InvalidConfigError("path must start at the all-zero solution")
        if len(self.knots) > 1 and not np.all(np.diff(self.knots) < 0):
            raise InvalidConfigError("knots must be strictly decreasing")

    @property
    def lambda_max(self) -> float:
        return float(self.knots[0])

    def __len__(self) -> int:
        return len(self.knots)


def lambda_max(X: np.ndarray, Y: np.ndarray) -> float:
    """Smallest penalty at which the all-zero vector is optimal."""
    n = X.shape[0]
    return 2.0 * float(np.max(np.abs(X.T @ Y), initial=0.0)) / n


def default_grid(X: np.ndarray, Y: np.ndarray, m: int = 100, eps: float = 1e-3) -> LambdaGrid:
    """m log-spaced penalties from lambda_max down to eps * lambda_max."""
    if m < 1:
        raise InvalidConfigError(f"grid size must be >= 1, got {m}")
    if not 0.0 < eps < 1.0:
        raise InvalidConfigError(f"eps must lie in (0, 1), got {eps}")
    lmax = lambda_max(X, Y)
    if lmax <= 0.0:
        raise DegenerateProblemError("response is orthogonal to every column")
    return LambdaGrid(values=np.geomspace(lmax, eps * lmax, m), origin=GridOrigin.KKT_MAX)


# ---------------------------------------------------------------------------
# coordinate descent
# ---------------------------------------------------------------------------


@njit(cache=True)
def _cd_solve(X, Y, lam, beta, tol, max_sweeps):  # pragma: no cover - compiled
    n, p = X.shape
    colsq = np.empty(p)
    for j in range(p):
        s = 0.0
        for i in range(n):
            v = X[i, j]
            s += v * v
        colsq[j] = s / n
    r = Y.copy()
    for j in range(p):
        bj = beta[j]
        if bj != 0.0:
            for i in range(n):
                r[i] -= X[i, j] * bj
    half = 0.5 * lam
    # relative slack so ulp-level summation differences cannot push a
    # coordinate off zero when |z_j| equals the threshold exactly
    thr = half * (1.0 + 1e-12)
    sweeps = 0
    converged = False
    act = np.empty(p, np.int64)
    while sweeps < max_sweeps:
        # full pass over all coordinates; this is the official convergence check
        maxd = 0.0
        for j in range(p):
            if colsq[j] == 0.0:
                beta[j] = 0.0
                continue
            bj = beta[j]
            zj = 0.0
            for i in range(n):
                zj += X[i, j] * r[i]
            zj = zj / n + colsq[j] * bj
            if zj > thr:
                bn = (zj - half) / colsq[j]
            elif zj < -thr:
                bn = (zj + half) / colsq[j]
            else:
                bn = 0.0
            d = bn - bj
            if d != 0.0:
                beta[j] = bn
                for i in range(n):
                    r[i] -= X[i, j] * d
                ad = abs(d)
                if ad > maxd:
                    maxd = ad
        sweeps += 1
        if maxd < tol:
            converged = True
            break
        # accelerate on the current active set before the next full pass
        nact = 0
        for j in range(p):
            if beta[j] != 0.0:
                act[nact] = j
                nact += 1
        while sweeps < max_sweeps:
            maxd = 0.0
            for t in range(nact):
                j = act[t]
                bj = beta[j]
                zj = 0.0
                for i in range(n):
                    zj += X[i, j] * r[i]
                zj = zj / n + colsq[j] * bj
                if zj > thr:
                    bn = (zj - half) / colsq[j]
                elif zj < -thr:
                    bn = (zj + half) / colsq[j]
                else:
                    bn = 0.0
                d = bn - bj
                if d != 0.0:
                    beta[j] = bn
                    for i in range(n):
                        r[i] -= X[i, j] * d
                    ad = abs(d)
                    if ad > maxd:
                        maxd = ad
            sweeps += 1
            if maxd < tol:
                break
    return sweeps, converged


def kkt_residual(X: np.ndarray, Y: np.ndarray, beta: np.ndarray, lam: float) -> float:
    """Worst violation of the lasso stationarity conditions at beta.

    On the active set |(2/n) X_j'(Y - Xb)| must equal lambda with the sign
    of b_j; off it the gradient magnitude must not exceed lambda.
    """
    n = X.shape[0]
    g = (2.0 / n) * (X.T @ (Y - X @ beta))
    active = beta != 0
    worst = 0.0
    if np.any(active):
        worst = float(np.max(np.abs(g[active] - lam * np.sign(beta[active]))))
    if np.any(~active):
        worst = max(worst, float(np.max(np.abs(g[~active])) - lam), 0.0)
    return worst


def _finish_fit(X, Y, beta, lam, sweeps, converged) -> FittedModel:
    n = X.shape[0]
    support = np.flatnonzero(beta)
    resid = Y - X @ beta
    return FittedModel(
        beta=beta,
        lam=float(lam),
        support=support,
        df=df_lasso(X, support),
        train_err=float(resid @ resid) / n,
        kkt_residual=kkt_residual(X, Y, beta, lam),
        sweeps=int(sweeps),
        converged=bool(converged),
    )


def lasso_cd(
    X: np.ndarray,
    Y: np.ndarray,
    lam: float,
    warm_start: np.ndarray | None = None,
    tol: float = 1e-8,
    max_sweeps: int = 100_000,
) -> FittedModel:
    """Cyclic coordinate descent for the lasso at a single penalty.

    Converged when the largest coefficient change in a full sweep drops
    below ``tol``.  Raises ``ConvergenceError`` (carrying the last iterate)
    if the sweep budget is exhausted first.
    """
    if not lam > 0:
        raise InvalidConfigError(f"lambda must be > 0, got {lam}")
    Xf = np.asfortranarray(X, dtype=np.float64)
    Yf = np.ascontiguousarray(Y, dtype=np.float64)
    beta = (
        np.zeros(X.shape[1])
        if warm_start is None
        else np.array(warm_start, dtype=np.float64, copy=True)
    )
    sweeps, converged = _cd_solve(Xf, Yf, float(lam), beta, float(tol), int(max_sweeps))
    model = _finish_fit(X, Y, beta, lam, sweeps, converged)
    if not converged:
        raise ConvergenceError(
            f"coordinate descent did not converge in {max_sweeps} sweeps at lambda={lam:g}",
            last_result=model,
        )
    return model


def lasso_grid(
    X: np.ndarray,
    Y: np.ndarray,
    lambdas,
    tol: float = 1e-6,
    max_sweeps: int = 2_000_000,
) -> np.ndarray:
    """Warm-started coordinate-descent solutions down a decreasing grid.

    Returns an (m, p) array of coefficient vectors.  This is the cheap
    bulk entry point used by cross-validation; it skips the per-fit
    diagnostics of :func:`lasso_cd`.  The sweep budget covers the whole
    grid: deep grid points with p >> n sit close to an interpolating,
    non-unique solution where coordinate descent crawls, so they get
    whatever budget the easy points did not use.
    """
    grid = as_lambda_grid(lambdas)
    Xf = np.asfortranarray(X, dtype=np.float64)
    Yf = np.ascontiguousarray(Y, dtype=np.float64)
    p = X.shape[1]
    betas = np.empty((len(grid), p))
    beta = np.zeros(p)
    budget = int(max_sweeps)
    for k, lam in enumerate(grid.values):
        sweeps, converged = _cd_solve(Xf, Yf, float(lam), beta, float(tol), budget)
        budget -= sweeps
        if not converged:
            raise ConvergenceError(
                f"coordinate descent did not converge at grid point {k} (lambda={lam:g})",
                last_result=betas[:k],
            )
        betas[k] = beta
    return betas


# ---------------------------------------------------------------------------
# LARS-style path
# ---------------------------------------------------------------------------


def lasso_path(X: np.ndarray, Y: np.ndarray, max_iter: int | None = None) -> LassoPath:
    """Exact solution path via least-angle steps with the drop modification.

    Variables enter when their absolute residual correlation ties the
    active maximum and leave when a coefficient crosses zero.  Exact ties
    are broken toward the lowest column index.  The path terminates when
    the active set reaches min(n-1, p) variables or the residual
    correlation hits zero (the least-squares end of the path).
    """
    X = np.asarray(X, dtype=float)
    Y = np.asarray(Y, dtype=float)
    n, p = X.shape
    if not np.any(X):
        raise InvalidConfigError("design matrix is identically zero")
    c = X.T @ Y
    C = float(np.max(np.abs(c)))
    knots = [2.0 * C / n]
    betas = [np.zeros(p)]
    abs_eps = 1e-12 * max(C, 1.0)
    n_max = min(n - 1, p)
    if max_iter is None:
        max_iter = 8 * p + 32
    if C <= abs_eps:
        return _build_path(X, [0.0], betas)

    tie_tol = 1e-9 * C
    active: list[int] = []
    beta = np.zeros(p)
    dropped = -1
    # first entry: lowest index attaining the maximum correlation
    j0 = int(np.flatnonzero(np.abs(c) >= C - tie_tol)[0])
    active.append(j0)

    for _ in range(max_iter):
        XA = X[:, active]
        s = np.sign(c[active])
        G = XA.T @ XA
        try:
            d = np.linalg.solve(G, s)
        except np.linalg.LinAlgError:
            d = np.linalg.lstsq(G, s, rcond=None)[0]
        if not np.all(np.isfinite(d)) or np.allclose(d, 0.0):
            break
        u = XA @ d
        a = X.T @ u

        gamma = C  # residual correlation reaches zero
        event, target = "stop", -1
        inactive = np.setdiff1d(np.arange(p), active, assume_unique=False)
        # a just-dropped variable sits exactly on the correlation envelope, so
        # its zero-step re-entry candidate is spurious; genuine (sign-flipped)
        # re-entries at a positive step stay eligible
        floor = 1e-10 * C
        for j in inactive:
            g_min = floor if j == dropped else 0.0
            for num, den in ((C - c[j], 1.0 - a[j]), (C + c[j], 1.0 + a[j])):
                if den > _DEN_TOL:
                    g = num / den
                    # strict improvement keeps the lowest index on exact ties
                    if g_min <= g < gamma * (1.0 - 1e-12):
                        gamma, event, target = g, "enter", int(j)
        for idx, k in enumerate(active):
            if beta[k] != 0.0 and d[idx] != 0.0:
                g = -beta[k] / d[idx]
                if 0.0 < g < gamma * (1.0 - 1e-12):
                    gamma, event, target = g, "drop", int(k)

        beta[active] += gamma * d
        c -= gamma * a
        C -= gamma
        if event == "drop":
            beta[target] = 0.0

        lam = 2.0 * C / n
        if abs(lam - knots[-1]) <= 1e-12 * max(knots[0], 1.0):
            betas[-1] = beta.copy()  # merged event at the same penalty
        else:
            knots.append(lam)
            betas.append(beta.copy())

        if event == "stop" or C <= abs_eps:
            break
        if event == "enter":
            active.append(target)
            dropped = -1
            # growth cap guards against interpolation; with p <= n-1 every
            # column can be active and the path rides to its least-squares end
            if len(active) >= n_max and p > n_max:
                break
        else:
            active.remove(target)
            dropped = target
    else:
        raise ConvergenceError(f"path did not terminate within {max_iter} steps")

    return _build_path(X, knots, betas)


def _build_path(X, knots, betas) -> LassoPath:
    supports = tuple(np.flatnonzero(b) for b in betas)
    ranks = tuple(df_lasso(X, s) for s in supports)
    return LassoPath(
        knots=np.asarray(knots, dtype=float),
        betas=np.asarray(betas),
        active_sets=supports,
        ranks=ranks,
    )


# ---------------------------------------------------------------------------
# ridge, OLS, degrees of freedom
# ---------------------------------------------------------------------------


def ridge(X: np.ndarray, Y: np.ndarray, lam: float) -> np.ndarray:
    """Ridge coefficients (X'X + lambda I)^{-1} X'Y via the SVD of X."""
    if not lam > 0:
        raise InvalidConfigError(f"lambda must be > 0, got {lam}")
    U, d, Vt = np.linalg.svd(np.asarray(X, dtype=float), full_matrices=False)
    shrink = d / (d**2 + lam)
    return Vt.T @ (shrink * (U.T @ Y))


def ridge_df(X: np.ndarray, lam: float) -> float:
    """Effective degrees of freedom sum_i d_i^2 / (d_i^2 + lambda).

    At lambda = 0 this is the numerical rank of X.
    """
    if lam < 0:
        raise InvalidConfigError(f"lambda must be >= 0, got {lam}")
    d = np.linalg.svd(np.asarray(X, dtype=float), compute_uv=False)
    if lam == 0.0:
        if d.size == 0:
            return 0.0
        tol = d.max(initial=0.0) * max(X.shape) * np.finfo(float).eps
        return float(np.count_nonzero(d > tol))
    return float(np.sum(d**2 / (d**2 + lam)))


def df_lasso(X: np.ndarray, support) -> int:
    """Rank of the selected columns; the unbiased lasso degrees of freedom."""
    support = np.asarray(support, dtype=int)
    if support.size == 0:
        return 0
    return int(np.linalg.matrix_rank(np.asarray(X, dtype=float)[:, support]))


def ols_refit(X: np.ndarray, support, Y: np.ndarray) -> np.ndarray:
    """Least squares on the selected columns, zeros elsewhere.

    Rank-deficient selections fall back to the minimum-norm solution.
    """
    p = X.shape[1]
    beta = np.zeros(p)
    support = np.asarray(support, dtype=int)
    if support.size == 0:
        return beta
    coef, *_ = np.linalg.lstsq(np.asarray(X, dtype=float)[:, support], Y, rcond=None)
    beta[support] = coef
    return beta


def train_error(X: np.ndarray, Y: np.ndarray, beta: np.ndarray) -> float:
    """(1/n) ||Y - X beta||^2."""
    r = Y - X @ beta
    return float(r @ r) / X.shape[0]
