import math

import numpy as np
import pytest

from lassotune import (
    CriterionTrace,
    GicPenalty,
    GicSpec,
    InvalidConfigError,
    ScenarioConfig,
    example1_dataset,
    gen_dataset,
    gen_design,
)
from lassotune.selectors import (
    cv_curve,
    gcv_select,
    gcv_value,
    gic,
    kfold_cv,
    make_folds,
    risk_estimate,
    select_risk,
    sqrt_lambda_default,
    sqrt_lasso,
    sqrt_lasso_refit,
    ssr,
    two_stage,
)
from lassotune.solvers import (
    LassoPath,
    as_lambda_grid,
    default_grid,
    lasso_cd,
    lasso_path,
    ols_refit,
    train_error,
)


def synthetic_path(X, betas, knots):
    """Wrap explicit coefficient vectors as a path-like object."""
    from lassotune.solvers import df_lasso

    supports = tuple(np.flatnonzero(b) for b in betas)
    ranks = tuple(df_lasso(X, s) for s in supports)
    return LassoPath(
        knots=np.asarray(knots, dtype=float),
        betas=np.asarray(betas, dtype=float),
        active_sets=supports,
        ranks=ranks,
    )


class TestRiskEstimate:
    def test_reduces_to_training_error(self):
        assert risk_estimate(0.37, 0.0, 5, 0.0) == 0.37

    def test_arithmetic_case(self):
        n = 50
        assert risk_estimate(1.0, 1.0, 0, 2.0 / n) == 0.0

    def test_proportional_to_mallows_cp(self):
        # nested OLS models: the risk estimate equals (s2/n) * Cp + const
        rng = np.random.default_rng(0)
        n, p = 50, 5
        X = rng.standard_normal((n, p))
        Y = X[:, :2] @ np.array([1.0, -0.7]) + rng.standard_normal(n)
        rss_full = np.sum((Y - X @ np.linalg.lstsq(X, Y, rcond=None)[0]) ** 2)
        s2 = rss_full / (n - p)
        risks, cps = [], []
        for k in range(1, p + 1):
            beta = ols_refit(X, np.arange(k), Y)
            rss = np.sum((Y - X @ beta) ** 2)
            risks.append(risk_estimate(rss / n, s2, k, 2.0 / n))
            cps.append(rss / s2 - n + 2 * k)
        ratio = np.diff(risks) / np.diff(cps)
        np.testing.assert_allclose(ratio, s2 / n, rtol=1e-9)
        assert int(np.argmin(risks)) == int(np.argmin(cps))

    def test_negative_inputs_rejected(self):
        with pytest.raises(InvalidConfigError):
            risk_estimate(1.0, -0.1, 1, 0.1)
        with pytest.raises(InvalidConfigError):
            risk_estimate(1.0, 0.1, -1, 0.1)


class TestSelectRisk:
    def instance(self, seed=1, n=60, p=40):
        rng = np.random.default_rng(seed)
        X = gen_design(n, p, 0.2, rng)
        beta = np.zeros(p)
        beta[:4] = rng.laplace(size=4)
        Y = X @ beta + rng.standard_normal(n)
        return X, Y

    def test_method_label_passthrough(self):
        X, Y = self.instance()
        path = lasso_path(X, Y)
        sel = select_risk(path, X, Y, 1.0, 2.0 / 60, method="R-CV-2")
        assert sel.method == "R-CV-2"
        assert sel.sigma2_used == 1.0

    def test_zero_variance_selects_minimum_training_error(self):
        X, Y = self.instance(seed=2)
        path = lasso_path(X, Y)
        sel = select_risk(path, X, Y, 0.0, 2.0 / 60)
        trains = [train_error(X, Y, b) for b in path.betas]
        assert sel.lam == path.knots[int(np.argmin(trains))]

    def test_penalty_monotonicity_over_random_instances(self):
        # a heavier complexity penalty never selects a denser (smaller) lambda
        n = 50
        rng = np.random.default_rng(3)
        for _ in range(100):
            p = int(rng.integers(5, 40))
            X = gen_design(n, p, float(rng.choice([0.0, 0.5])), rng)
            beta = np.zeros(p)
            beta[: max(1, p // 5)] = rng.laplace(size=max(1, p // 5))
            Y = X @ beta + rng.standard_normal(n)
            path = lasso_path(X, Y)
            lam_small = select_risk(path, X, Y, 1.0, 2.0 / n).lam
            lam_large = select_risk(path, X, Y, 1.0, math.log(n) / n).lam
            assert lam_large >= lam_small

    def test_flat_trace_breaks_ties_to_largest_lambda(self):
        X, Y = self.instance(seed=4)
        zero = np.zeros(X.shape[1])
        path = synthetic_path(X, [zero, zero, zero], [3.0, 2.0, 1.0])
        sel = select_risk(path, X, Y, 1.0, 0.1)
        assert sel.lam == 3.0
        assert sel.trace.minimizer_index == 0


class TestGic:
    def test_gcv_log_identity(self):
        rng = np.random.default_rng(5)
        n = 40
        for _ in range(50):
            train = float(rng.uniform(0.01, 5.0))
            df = float(rng.uniform(0, n - 1))
            lhs = gic(train, df, GicSpec(c_n=-2.0, g=GicPenalty.GCV_LOG), n)
            rhs = math.log(gcv_value(train, df, n))
            assert abs(lhs - rhs) < 1e-12

    def test_zero_df_reduces_to_log_train(self):
        for spec in (GicSpec.aic(30), GicSpec.bic(30), GicSpec(c_n=-2.0, g=GicPenalty.GCV_LOG)):
            assert gic(0.5, 0.0, spec, 30) == math.log(0.5)

    def test_saturated_fit_returns_neg_infinity(self):
        assert gic(0.0, 3, GicSpec.aic(10), 10) == -math.inf

    def test_example1_aic_argmin_at_grid_minimum(self):
        from lassotune.solvers import lasso_grid, ridge, ridge_df, df_lasso

        grid = np.geomspace(1.0, 1e-5, 50)
        for sigma in (0.5, 1.0, 1.5, 5.0):
            ds = example1_dataset(sigma)
            aic = GicSpec.aic(2)
            ridge_vals = [
                gic(train_error(ds.X, ds.Y, ridge(ds.X, ds.Y, lam)), ridge_df(ds.X, lam), aic, 2)
                for lam in grid
            ]
            betas = lasso_grid(ds.X, ds.Y, grid)
            lasso_vals = [
                gic(train_error(ds.X, ds.Y, b), df_lasso(ds.X, np.flatnonzero(b)), aic, 2)
                for b in betas
            ]
            assert int(np.argmin(ridge_vals)) == len(grid) - 1
            assert int(np.argmin(lasso_vals)) == len(grid) - 1


class TestGcvSelect:
    def test_saturated_knots_excluded(self):
        rng = np.random.default_rng(6)
        X = rng.standard_normal((10, 4))
        Y = rng.standard_normal(10)
        beta_full = np.linalg.lstsq(X, Y, rcond=None)[0]
        path = synthetic_path(X, [np.zeros(4), beta_full], [1.0, 0.5])
        sel = gcv_select(path, X, Y)
        assert np.isfinite(sel.trace.values[sel.trace.minimizer_index])

    def test_constant_df_segment_orders_by_training_error(self):
        rng = np.random.default_rng(7)
        X = rng.standard_normal((20, 3))
        Y = X @ np.array([1.0, 0.5, -0.5]) + 0.1 * rng.standard_normal(20)
        b1 = ols_refit(X, [0, 1, 2], Y)
        path = synthetic_path(X, [np.zeros(3), 0.5 * b1, b1], [1.0, 0.5, 0.25])
        sel = gcv_select(path, X, Y)
        trains = np.array([train_error(X, Y, b) for b in path.betas[1:]])
        gcvs = sel.trace.values[1:]
        assert np.all(np.argsort(trains) == np.argsort(gcvs))

    def test_example1_path_gcv_reaches_interpolant(self):
        ds = example1_dataset(1.0)
        path = lasso_path(ds.X, ds.Y)
        sel = gcv_select(path, ds.X, ds.Y)
        # rank(X) < n: GCV chases the zero-training-error end of the path
        assert sel.lam == path.knots[-1]


class TestKfoldCV:
    def test_leave_one_out_matches_brute_force(self):
        # n=4, p=1: every fold is a singleton and the lasso has a closed form
        x = np.array([1.0, 2.0, -1.0, 0.5])
        Y = np.array([1.2, 2.1, -0.7, 0.4])
        X = x[:, None]
        grid = as_lambda_grid(np.geomspace(1.0, 0.01, 20))

        def lasso_1d(xs, ys, lam):
            n = len(xs)
            z = xs @ ys / n
            c = xs @ xs / n
            return np.sign(z) * max(abs(z) - lam / 2, 0.0) / c

        brute = np.zeros(len(grid))
        for i in range(4):
            mask = np.arange(4) != i
            for k, lam in enumerate(grid.values):
                b = lasso_1d(x[mask], Y[mask], lam)
                brute[k] += (Y[i] - x[i] * b) ** 2 / 4

        sel = kfold_cv(X, Y, K=4, grid=grid, seed=0)
        np.testing.assert_allclose(sel.trace.values, brute, rtol=1e-6)
        assert sel.lam == grid.values[int(np.argmin(brute))]

    def test_zero_noise_recovers_support(self):
        rng = np.random.default_rng(8)
        X = gen_design(60, 20, 0.0, rng)
        beta = np.zeros(20)
        beta[[2, 9, 15]] = [1.5, -2.0, 1.0]
        Y = X @ beta
        sel = kfold_cv(X, Y, K=10, seed=1)
        # curve minimized in the small-lambda region, support recovered
        assert sel.lam <= sel.trace.lambdas[len(sel.trace.lambdas) // 2]
        assert {2, 9, 15} <= set(sel.support.tolist())

    def test_same_seed_same_selection(self):
        rng = np.random.default_rng(9)
        X = gen_design(50, 30, 0.1, rng)
        Y = X[:, 0] + rng.standard_normal(50)
        a = kfold_cv(X, Y, K=5, seed=7)
        b = kfold_cv(X, Y, K=5, seed=7)
        assert a.lam == b.lam
        np.testing.assert_array_equal(a.beta, b.beta)

    def test_fold_evaluation_order_invariant(self):
        rng = np.random.default_rng(10)
        X = gen_design(30, 10, 0.0, rng)
        Y = X[:, 0] + rng.standard_normal(30)
        grid = default_grid(X, Y, m=10)
        folds = make_folds(30, 5, np.random.default_rng(3))
        a = cv_curve(X, Y, folds, grid)
        b = cv_curve(X, Y, list(reversed(folds)), grid)
        np.testing.assert_array_equal(a, b)

    def test_invalid_k_rejected(self):
        X = np.eye(4)
        Y = np.ones(4)
        with pytest.raises(InvalidConfigError):
            kfold_cv(X, Y, K=5)
        with pytest.raises(InvalidConfigError):
            kfold_cv(X, Y, K=1)

    def test_near_equal_fold_sizes(self):
        folds = make_folds(23, 10, np.random.default_rng(0))
        sizes = sorted(len(f) for f in folds)
        assert sizes in ([2, 2, 2, 2, 2, 2, 2, 3, 3, 3],)
        assert np.array_equal(np.sort(np.concatenate(folds)), np.arange(23))


class TestTwoStage:
    def instance(self, seed=11):
        cfg = ScenarioConfig(
            n=60, p=100, rho=0.1, sparsity_exponent=0.4, snr=5.0, seed=seed
        )
        ds = gen_dataset(cfg)
        return ds

    def test_final_support_subset_of_screen(self):
        ds = self.instance()
        sel = two_stage(ds.X, ds.Y, seed=3)
        screen = set(sel.diagnostics["screen_support"].tolist())
        assert set(sel.support.tolist()) <= screen

    def test_stage_two_penalty_constant(self):
        ds = self.instance(seed=12)
        sel = two_stage(ds.X, ds.Y, seed=4)
        assert sel.diagnostics["c_n"] == math.log(60) / 60

    def test_empty_screen_returns_flagged_null_model(self):
        # one nearly orthogonal column: GCV cannot beat the zero fit, so the
        # screen comes back empty and the method reports the null model
        n = 20
        Y = np.zeros(n)
        Y[0] = 1.0
        x = np.zeros(n)
        x[1] = 1.0
        x[0] = 0.1  # sample correlation ~ 0.1, well under the GCV break-even
        X = x[:, None]
        sel = two_stage(X, Y, K=5, seed=0)
        assert sel.diagnostics.get("empty_screen") is True
        assert np.all(sel.beta == 0)
        assert len(sel.support) == 0

    @pytest.mark.slow
    def test_stage_two_never_enlarges_support(self):
        for rep in range(50):
            cfg = ScenarioConfig(
                n=100,
                p=200,
                rho=0.1,
                sparsity_exponent=0.4,
                snr=10.0,
                seed=55,
                replication_id=rep,
            )
            ds = gen_dataset(cfg)
            sel = two_stage(ds.X, ds.Y, seed=rep)
            screen = set(sel.diagnostics["screen_support"].tolist())
            assert set(sel.support.tolist()) <= screen


class TestSSR:
    def instance(self, seed=13, n=100, p=200, snr=1.0):
        cfg = ScenarioConfig(n=n, p=p, rho=0.1, sparsity_exponent=0.4, snr=snr, seed=seed)
        return gen_dataset(cfg)

    def test_fixed_point_certificate(self):
        ds = self.instance()
        sel = ssr(ds.X, ds.Y)
        sigma = sel.diagnostics["sigma"]
        lam0 = sel.diagnostics["lambda0"]
        refit = lasso_cd(ds.X, ds.Y, 2.0 * sigma * lam0, warm_start=sel.beta)
        assert np.max(np.abs(refit.beta - sel.beta)) <= 1e-6
        rss = float(np.sum((ds.Y - ds.X @ refit.beta) ** 2))
        assert abs(math.sqrt(rss / ds.n) - sigma) <= 1e-8

    def test_scale_update_is_rss_over_n_when_a_zero(self):
        ds = self.instance(seed=14)
        sel = ssr(ds.X, ds.Y, a=0.0)
        rss = float(np.sum((ds.Y - ds.X @ sel.beta) ** 2))
        np.testing.assert_allclose(sel.sigma2_used, rss / ds.n, rtol=1e-7)

    @pytest.mark.slow
    def test_null_scenario_scale_near_one(self):
        sigmas = []
        for rep in range(100):
            rng = np.random.default_rng(6000 + rep)
            X = gen_design(100, 200, 0.1, rng)
            Y = rng.standard_normal(100)
            sigmas.append(ssr(X, Y).diagnostics["sigma"])
        assert 0.8 <= np.median(sigmas) <= 1.2

    def test_invalid_inputs(self):
        ds = self.instance(seed=15)
        with pytest.raises(InvalidConfigError):
            ssr(ds.X, ds.Y, lambda0=-1.0)
        with pytest.raises(InvalidConfigError):
            ssr(ds.X, ds.Y, a=1.0)


class TestSqrtLasso:
    def instance(self, seed=16, n=50, p=80):
        cfg = ScenarioConfig(n=n, p=p, rho=0.1, sparsity_exponent=0.4, snr=5.0, seed=seed)
        return gen_dataset(cfg)

    def test_kkt_certificate(self):
        ds = self.instance()
        lam_n = sqrt_lambda_default(ds.n, ds.p)
        sel = sqrt_lasso(ds.X, ds.Y, lam_n)
        resid = ds.Y - ds.X @ sel.beta
        grad = ds.X.T @ resid / (math.sqrt(ds.n) * np.linalg.norm(resid))
        assert np.max(np.abs(grad)) <= lam_n / ds.n + 1e-6
        for j in sel.support:
            assert abs(abs(grad[j]) - lam_n / ds.n) <= 1e-6

    def test_objective_dominates_zero_vector(self):
        ds = self.instance(seed=17)
        lam_n = sqrt_lambda_default(ds.n, ds.p)
        sel = sqrt_lasso(ds.X, ds.Y, lam_n)
        assert sel.diagnostics["objective"] <= np.linalg.norm(ds.Y) / math.sqrt(ds.n) + 1e-12

    def test_against_generic_convex_solver(self):
        cvxpy = pytest.importorskip("cvxpy")
        rng = np.random.default_rng(18)
        X = rng.standard_normal((5, 8))
        Y = rng.standard_normal(5)
        lam_n = 4.0
        sel = sqrt_lasso(X, Y, lam_n, tol=1e-10)
        b = cvxpy.Variable(8)
        objective = cvxpy.Minimize(
            cvxpy.norm(Y - X @ b, 2) / np.sqrt(5) + (lam_n / 5) * cvxpy.norm1(b)
        )
        problem = cvxpy.Problem(objective)
        problem.solve(solver="CLARABEL")
        assert abs(sel.diagnostics["objective"] - problem.value) <= 1e-6

    def test_refit_same_support_lower_training_error(self):
        ds = self.instance(seed=19)
        lam_n = sqrt_lambda_default(ds.n, ds.p)
        plain = sqrt_lasso(ds.X, ds.Y, lam_n)
        refit = sqrt_lasso_refit(ds.X, ds.Y, lam_n)
        np.testing.assert_array_equal(plain.support, refit.support)
        assert train_error(ds.X, ds.Y, refit.beta) <= train_error(ds.X, ds.Y, plain.beta) + 1e-12

    def test_empty_support_refit_is_zero(self):
        # a penalty above ||X'Y||_inf sqrt(n) / ||Y|| guarantees the zero fit
        rng = np.random.default_rng(20)
        X = gen_design(50, 100, 0.0, rng)
        Y = rng.standard_normal(50)
        lam_n = 10.0 * 50
        plain = sqrt_lasso(X, Y, lam_n)
        refit = sqrt_lasso_refit(X, Y, lam_n)
        assert len(plain.support) == 0
        assert np.all(refit.beta == 0)
        np.testing.assert_array_equal(plain.support, refit.support)


class TestSqrtLambdaDefault:
    def phi_inv_oracle(self, q):
        # independent quantile via the standard-library erf and bisection
        from math import erf, sqrt

        lo, hi = -10.0, 10.0
        for _ in range(200):
            mid = (lo + hi) / 2
            if 0.5 * (1 + erf(mid / sqrt(2))) < q:
                lo = mid
            else:
                hi = mid
        return (lo + hi) / 2

    def test_quantile_routine_against_oracle(self):
        assert abs(self.phi_inv_oracle(0.975) - 1.959964) < 1e-5
        for n, p in ((100, 200), (100, 1000), (30, 150)):
            got = sqrt_lambda_default(n, p, c=1.0)
            expected = math.sqrt(n) * self.phi_inv_oracle(1 - 0.05 / (2 * p))
            assert abs(got - expected) < 1e-6 * expected

    def test_default_multiplier(self):
        assert sqrt_lambda_default(100, 200) == pytest.approx(
            1.1 * sqrt_lambda_default(100, 200, c=1.0), rel=1e-12
        )

    def test_median_quantile_boundary_gives_zero_penalty(self):
        # alpha/(2p) -> 1/2 puts the quantile at the median of the normal,
        # so the penalty collapses to 0, which the solver then rejects
        lam = sqrt_lambda_default(25, 1, c=1.1, alpha_level=1 - 1e-12)
        assert abs(lam) < 1e-5
        rng = np.random.default_rng(21)
        with pytest.raises(InvalidConfigError):
            sqrt_lasso(rng.standard_normal((10, 3)), rng.standard_normal(10), 0.0)

    def test_invalid_alpha(self):
        with pytest.raises(InvalidConfigError):
            sqrt_lambda_default(10, 10, alpha_level=0.0)
        with pytest.raises(InvalidConfigError):
            sqrt_lambda_default(10, 10, alpha_level=1.0)


class TestCriterionTrace:
    def test_ties_resolve_to_largest_lambda(self):
        trace = CriterionTrace.from_values([3.0, 2.0, 1.0], [1.0, 1.0, 1.0])
        assert trace.minimizer_index == 0

    def test_minimizer_attains_minimum(self):
        trace = CriterionTrace.from_values([3.0, 2.0, 1.0], [2.0, 0.5, 1.0])
        assert trace.values[trace.minimizer_index] == trace.values.min()

    def test_increasing_lambdas_rejected(self):
        with pytest.raises(InvalidConfigError):
            CriterionTrace.from_values([1.0, 2.0], [0.0, 0.0])
