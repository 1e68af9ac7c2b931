"""Experiment runner: scenario sweeps over the method registry, the two
worked examples, the oracle risk-estimation experiment, and CSV summaries.

Every (scenario, replication) task derives its own random streams from
(base seed, scenario hash, replication id), so results are byte-identical
regardless of worker count or scheduling.  Per-method failures are recorded
in-row with an error code instead of aborting the sweep.
"""
from __future__ import annotations

import csv
import io
import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np

from ._rng import derive_rng, derive_seed
from .config import load_config
from .datagen import (
    NoiseKind,
    ScenarioConfig,
    SimulatedDataset,
    example1_dataset,
    example2_config,
    gen_dataset,
)
from .errors import (
    ConvergenceError,
    DegenerateProblemError,
    InvalidConfigError,
    LassotuneError,
    SaturatedModelError,
)
from .metrics import (
    EvalRecord,
    consistency,
    fscore,
    make_test_set,
    pred_risk_on,
    risk_estimation_experiment,
)
from .selectors import (
    GicSpec,
    gcv_value,
    gic,
    kfold_cv,
    select_risk,
    sqrt_lambda_default,
    sqrt_lasso,
    sqrt_lasso_refit,
    ssr,
    two_stage,
)
from .solvers import (
    default_grid,
    df_lasso,
    lasso_grid,
    lasso_path,
    ridge,
    ridge_df,
    train_error,
)
from .variance import sigma2_cv, sigma2_rcv, sigma2_rmle

@dataclass(frozen=True)
class MethodRegistryEntry:
    id: str
    options: dict = field(default_factory=dict)


METHOD_REGISTRY = (
    MethodRegistryEntry("CV-10-Fold", {"K": 10}),
    MethodRegistryEntry("R-CV-2", {"variance": "cv", "c_n": "2/n"}),
    MethodRegistryEntry("R-RMLE-2", {"variance": "rmle", "c_n": "2/n"}),
    MethodRegistryEntry("R-RCV-2", {"variance": "rcv", "c_n": "2/n"}),
    MethodRegistryEntry("R-CV-logn", {"variance": "cv", "c_n": "log(n)/n"}),
    MethodRegistryEntry("2-stage", {"K": 10}),
    MethodRegistryEntry("SSR", {"a": 0.0}),
    MethodRegistryEntry("SQRT", {"c": 1.1, "alpha_level": 0.05}),
    MethodRegistryEntry("SQRT-refitted", {"c": 1.1, "alpha_level": 0.05}),
)

METHOD_IDS = tuple(entry.id for entry in METHOD_REGISTRY)
assert len(set(METHOD_IDS)) == len(METHOD_IDS)

RISK_ESTIMATOR_IDS = ("CV-2-Fold", "CV-10-Fold", "R-CV-2", "R-RCV-2", "R-RMLE-2")

RECORDS_HEADER = (
    "scenario_id,n,p,rho,alpha,snr,noise,replication,method,lambda,sigma2_used,"
    "df,pred_risk,consistency,precision,recall,fscore,error_code,runtime_ms"
)

RISK_HEADER = "scenario_id,replication,estimator,estimate,true_risk,squared_error"

_ERROR_CODES = (
    (SaturatedModelError, "saturated_model"),
    (ConvergenceError, "no_convergence"),
    (DegenerateProblemError, "degenerate"),
    (InvalidConfigError, "invalid_config"),
)

# stream tags for the per-replication purposes
_SCEN_TAG, _CV_TAG, _RCV_TAG, _2S_TAG, _TEST_TAG, _RISKX_TAG = 1, 2, 3, 4, 5, 6


@dataclass(frozen=True)
class SweepSpec:
    """Cartesian scenario grid plus execution settings."""

    ns: tuple[int, ...] = (100,)
    ps: tuple[int, ...] = (200, 500, 1000)
    rhos: tuple[float, ...] = (0.1, 0.5, 0.8)
    alphas: tuple[float, ...] = (0.1, 0.4, 0.7)
    snrs: tuple[float, ...] = (0.1, 1.0, 10.0)
    noises: tuple[NoiseKind, ...] = (NoiseKind.GAUSSIAN,)
    methods: tuple[str, ...] = METHOD_IDS
    replications: int = 100
    base_seed: int = 0
    workers: int = 1

    def __post_init__(self):
        for name in ("ns", "ps", "rhos", "alphas", "snrs", "noises", "methods"):
            if len(getattr(self, name)) == 0:
                raise InvalidConfigError(f"grid {name!r} must be nonempty")
        if self.replications < 1:
            raise InvalidConfigError("replications must be >= 1")
        if self.workers < 1:
            raise InvalidConfigError("workers must be >= 1")
        for m in self.methods:
            if m not in METHOD_IDS:
                raise InvalidConfigError(f"unknown method {m!r}; known: {METHOD_IDS}")
        object.__setattr__(self, "noises", tuple(NoiseKind(k) for k in self.noises))

    def scenarios(self) -> list[ScenarioConfig]:
        out = []
        for n in self.ns:
            for p in self.ps:
                for rho in self.rhos:
                    for alpha in self.alphas:
                        for snr in self.snrs:
                            for noise in self.noises:
                                cfg = ScenarioConfig(
                                    n=n,
                                    p=p,
                                    rho=rho,
                                    sparsity_exponent=alpha,
                                    snr=snr,
                                    noise_kind=noise,
                                )
                                out.append(
                                    replace(
                                        cfg,
                                        seed=derive_seed(
                                            self.base_seed, _SCEN_TAG, cfg.scenario_hash()
                                        ),
                                    )
                                )
        return out


_CONFIG_KEYS = {
    "n": ("ns", int),
    "p": ("ps", int),
    "rho": ("rhos", float),
    "alpha": ("alphas", float),
    "snr": ("snrs", float),
    "noise": ("noises", NoiseKind),
    "methods": ("methods", str),
    "replications": ("replications", int),
    "seed": ("base_seed", int),
    "workers": ("workers", int),
}


def sweep_spec_from_config(path: str | None, **overrides) -> SweepSpec:
    """Build a spec from an optional config file plus CLI-style overrides."""
    kwargs: dict = {}
    if path is not None:
        for key, items in load_config(path).items():
            if key not in _CONFIG_KEYS:
                raise InvalidConfigError(f"unknown config key {key!r}")
            name, typ = _CONFIG_KEYS[key]
            if name in ("replications", "base_seed", "workers"):
                if len(items) != 1:
                    raise InvalidConfigError(f"{key!r} takes a single value")
                kwargs[name] = typ(items[0])
            else:
                kwargs[name] = tuple(typ(v) for v in items)
    for key, value in overrides.items():
        if value is not None:
            kwargs[key] = value
    return SweepSpec(**kwargs)


# ---------------------------------------------------------------------------
# method execution
# ---------------------------------------------------------------------------


class _ReplicationContext:
    """Shared per-replication work: dataset, grid, path, CV run, variance."""

    def __init__(self, dataset: SimulatedDataset, base_seed: int):
        self.dataset = dataset
        cfg = dataset.config
        self._keys = (base_seed, cfg.scenario_hash(), cfg.replication_id)
        self._cache: dict = {}

    def seed(self, tag: int) -> int:
        return derive_seed(*self._keys, tag)

    def _get(self, key, builder):
        if key not in self._cache:
            self._cache[key] = builder()
        return self._cache[key]

    @property
    def grid(self):
        return self._get("grid", lambda: default_grid(self.dataset.X, self.dataset.Y))

    @property
    def path(self):
        return self._get("path", lambda: lasso_path(self.dataset.X, self.dataset.Y))

    @property
    def cv(self):
        return self._get(
            "cv",
            lambda: kfold_cv(
                self.dataset.X, self.dataset.Y, K=10, grid=self.grid, seed=self.seed(_CV_TAG)
            ),
        )

    def variance(self, kind: str):
        def build():
            X, Y = self.dataset.X, self.dataset.Y
            if kind == "cv":
                return sigma2_cv(X, Y, grid=self.grid, seed=self.seed(_CV_TAG), cv_result=self.cv)
            if kind == "rmle":
                return sigma2_rmle(
                    X, Y, grid=self.grid, seed=self.seed(_CV_TAG), cv_result=self.cv
                )
            return sigma2_rcv(X, Y, K=10, seed=self.seed(_RCV_TAG))

        return self._get(("var", kind), build)

    @property
    def test_set(self):
        return self._get(
            "test", lambda: make_test_set(self.dataset, 5000, derive_rng(*self._keys, _TEST_TAG))
        )


def run_method(ctx: _ReplicationContext, method: str):
    """Run one registered selector on the replication's dataset."""
    ds = ctx.dataset
    X, Y, n = ds.X, ds.Y, ds.n
    if method == "CV-10-Fold":
        return ctx.cv
    if method == "R-CV-2":
        return select_risk(ctx.path, X, Y, ctx.variance("cv").value, 2.0 / n, method=method)
    if method == "R-RMLE-2":
        return select_risk(ctx.path, X, Y, ctx.variance("rmle").value, 2.0 / n, method=method)
    if method == "R-RCV-2":
        return select_risk(ctx.path, X, Y, ctx.variance("rcv").value, 2.0 / n, method=method)
    if method == "R-CV-logn":
        return select_risk(
            ctx.path, X, Y, ctx.variance("cv").value, math.log(n) / n, method=method
        )
    if method == "2-stage":
        return two_stage(X, Y, K=10, seed=ctx.seed(_2S_TAG), path=ctx.path)
    if method == "SSR":
        return ssr(X, Y)
    if method == "SQRT":
        return sqrt_lasso(X, Y, sqrt_lambda_default(n, ds.p))
    if method == "SQRT-refitted":
        return sqrt_lasso_refit(X, Y, sqrt_lambda_default(n, ds.p))
    raise InvalidConfigError(f"unknown method {method!r}")


def _error_code(exc: LassotuneError) -> str:
    for klass, code in _ERROR_CODES:
        if isinstance(exc, klass):
            return code
    return "error"


def _run_replication(args):
    """One (scenario, replication) task; returns fully formed row dicts."""
    config, base_seed, methods, timings = args
    dataset = gen_dataset(config)
    ctx = _ReplicationContext(dataset, base_seed)
    cfg = dataset.config
    rows = []
    for method in methods:
        t0 = time.perf_counter()
        row = {
            "scenario_id": cfg.scenario_key(),
            "n": cfg.n,
            "p": cfg.p,
            "rho": cfg.rho,
            "alpha": cfg.sparsity_exponent,
            "snr": cfg.snr,
            "noise": cfg.noise_kind.value,
            "replication": cfg.replication_id,
            "method": method,
            "lambda": "",
            "sigma2_used": "",
            "df": "",
            "pred_risk": "",
            "consistency": "",
            "precision": "",
            "recall": "",
            "fscore": "",
            "error_code": "",
            "runtime_ms": 0,
        }
        try:
            sel = run_method(ctx, method)
            p_, r_, f_ = fscore(sel.support, dataset.support_star)
            record = EvalRecord(
                method=method,
                scenario=cfg,
                pred_risk=pred_risk_on(ctx.test_set, sel.beta, dataset.sigma2),
                consistency=consistency(sel.beta, dataset.beta_star),
                precision=p_,
                recall=r_,
                fscore=f_,
                replication_id=cfg.replication_id,
            )
            row.update(
                {
                    "lambda": "" if sel.lam is None else sel.lam,
                    "sigma2_used": "" if sel.sigma2_used is None else sel.sigma2_used,
                    "df": df_lasso(dataset.X, sel.support),
                    "pred_risk": record.pred_risk,
                    "consistency": record.consistency,
                    "precision": record.precision,
                    "recall": record.recall,
                    "fscore": record.fscore,
                }
            )
        except LassotuneError as exc:
            row["error_code"] = _error_code(exc)
        if timings:
            row["runtime_ms"] = int(round(1000 * (time.perf_counter() - t0)))
        rows.append(row)
    return rows


def _run_tasks(tasks, workers, worker_fn):
    if workers <= 1:
        chunks = [worker_fn(t) for t in tasks]
    else:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            chunks = list(pool.map(worker_fn, tasks, chunksize=1))
    return [row for chunk in chunks for row in chunk]


def run_sweep(spec: SweepSpec, timings: bool = True) -> list[dict]:
    """Run every (scenario, replication, method) cell and collect rows.

    Rows come back in canonical (scenario, replication, method) order;
    per-method failures appear with an ``error_code`` instead of metrics,
    so no cell is silently dropped.
    """
    tasks = [
        (cfg.with_replication(rep), spec.base_seed, spec.methods, timings)
        for cfg in spec.scenarios()
        for rep in range(spec.replications)
    ]
    rows = _run_tasks(tasks, spec.workers, _run_replication)
    rows.sort(key=lambda r: (r["scenario_id"], r["replication"], r["method"]))
    return rows


# ---------------------------------------------------------------------------
# worked examples
# ---------------------------------------------------------------------------

EXAMPLE_SIGMAS = (0.5, 1.0, 1.5, 5.0)


def example_grid(num: int = 50) -> np.ndarray:
    """The display grid for the worked examples: lambda from 1 down to 1e-5."""
    return np.geomspace(1.0, 1e-5, num)


def run_example1(lambda_grid: np.ndarray | None = None, sigmas=EXAMPLE_SIGMAS) -> list[dict]:
    """Criterion traces for ridge and lasso on the rank-one toy dataset.

    Emits one row per (model, sigma, lambda) with training error, degrees
    of freedom, and the AIC / BIC / GCV values at that penalty.
    """
    grid = example_grid() if lambda_grid is None else np.asarray(lambda_grid, dtype=float)
    if grid.min() < 1e-5 - 1e-15 or grid.max() > 1.0 + 1e-15:
        raise InvalidConfigError("example grid must stay within [1e-5, 1]")
    grid = np.sort(grid)[::-1]
    rows = []
    for sigma in sigmas:
        ds = example1_dataset(sigma)
        X, Y, n = ds.X, ds.Y, ds.n
        aic, bic = GicSpec.aic(n), GicSpec.bic(n)
        for lam in grid:
            coef = ridge(X, Y, lam)
            tr = train_error(X, Y, coef)
            df = ridge_df(X, lam)
            rows.append(_example1_row("ridge", sigma, lam, tr, df, aic, bic, n))
        for lam, beta in zip(grid, lasso_grid(X, Y, grid)):
            tr = train_error(X, Y, beta)
            df = df_lasso(X, np.flatnonzero(beta))
            rows.append(_example1_row("lasso", sigma, lam, tr, df, aic, bic, n))
    return rows


def _example1_row(model, sigma, lam, tr, df, aic, bic, n):
    return {
        "model": model,
        "sigma": sigma,
        "lambda": float(lam),
        "train_err": tr,
        "df": df,
        "aic": gic(tr, df, aic, n),
        "bic": gic(tr, df, bic, n),
        "gcv": gcv_value(tr, df, n),
    }


def example1_argmins(rows: list[dict]) -> dict:
    """Map (model, sigma, criterion) -> lambda attaining the criterion minimum."""
    out: dict = {}
    for crit in ("aic", "bic", "gcv"):
        for row in rows:
            key = (row["model"], row["sigma"], crit)
            if key not in out or row[crit] < out[key][0]:
                out[key] = (row[crit], row["lambda"])
    return {key: lam for key, (_, lam) in out.items()}


def _example2_replication(args):
    sigma, seed, rep, grid_vals = args
    cfg = example2_config(sigma, seed).with_replication(rep)
    ds = gen_dataset(cfg)
    X, Y, n = ds.X, ds.Y, ds.n
    betas = lasso_grid(X, Y, grid_vals)
    trains = np.array([train_error(X, Y, b) for b in betas])
    dfs = np.array([df_lasso(X, np.flatnonzero(b)) for b in betas], dtype=float)
    keys = (seed, cfg.scenario_hash(), rep)
    s2_cv = sigma2_cv(X, Y, seed=derive_seed(*keys, _CV_TAG)).value
    s2_rcv = sigma2_rcv(X, Y, seed=derive_seed(*keys, _RCV_TAG)).value
    aic = GicSpec.aic(n)
    criteria = {
        "R-sigma-1": trains - 1.0 + (2.0 / n) * 1.0 * dfs,
        "R-CV": trains - s2_cv + (2.0 / n) * s2_cv * dfs,
        "R-RCV": trains - s2_rcv + (2.0 / n) * s2_rcv * dfs,
        "AIC": np.array([gic(t, d, aic, n) for t, d in zip(trains, dfs)]),
    }
    test = make_test_set(ds, 5000, derive_rng(*keys, _TEST_TAG))
    rows = []
    for name, values in criteria.items():
        i = int(np.argmin(values))
        rows.append(
            {
                "sigma": sigma,
                "replication": rep,
                "method": name,
                "lambda": float(grid_vals[i]),
                "at_grid_min": int(i == len(grid_vals) - 1),
                "pred_risk": pred_risk_on(test, betas[i], ds.sigma2),
            }
        )
    return rows


def run_example2(
    replications: int,
    seed: int,
    sigmas=EXAMPLE_SIGMAS,
    workers: int = 1,
) -> tuple[list[dict], list[dict]]:
    """Four risk criteria on the n=30, p=150 single-signal scenario.

    For each noise scale, selects a penalty on the display grid by the
    fixed-variance risk estimate, its CV and RCV plug-in versions, and
    AIC; reports the selected penalties and their test risk.
    """
    if replications < 1:
        raise InvalidConfigError("replications must be >= 1")
    grid_vals = example_grid()
    tasks = [
        (sigma, derive_seed(seed, i), rep, grid_vals)
        for i, sigma in enumerate(sigmas)
        for rep in range(replications)
    ]
    rows = _run_tasks(tasks, workers, _example2_replication)
    rows.sort(key=lambda r: (r["sigma"], r["replication"], r["method"]))
    summary = []
    for sigma in sigmas:
        for method in ("R-sigma-1", "R-CV", "R-RCV", "AIC"):
            sub = [r for r in rows if r["sigma"] == sigma and r["method"] == method]
            summary.append(
                {
                    "sigma": sigma,
                    "method": method,
                    "median_lambda": float(np.median([r["lambda"] for r in sub])),
                    "frac_at_grid_min": float(np.mean([r["at_grid_min"] for r in sub])),
                    "median_pred_risk": float(np.median([r["pred_risk"] for r in sub])),
                }
            )
    return rows, summary


# ---------------------------------------------------------------------------
# risk-estimation experiment
# ---------------------------------------------------------------------------


def _risk_replication(args):
    config, base_seed = args
    dataset = gen_dataset(config)
    seed = derive_seed(base_seed, config.scenario_hash(), config.replication_id, _RISKX_TAG)
    rows = []
    for rec in risk_estimation_experiment(dataset, seed):
        rows.append(
            {
                "scenario_id": config.scenario_key(),
                "replication": config.replication_id,
                "estimator": rec.estimator,
                "estimate": rec.estimate,
                "true_risk": rec.true_risk,
                "squared_error": rec.squared_error,
            }
        )
    return rows


def run_risk_experiment(spec: SweepSpec) -> tuple[list[dict], list[dict]]:
    """Oracle-OLS risk-estimation records plus the aggregated MSE table."""
    tasks = [
        (cfg.with_replication(rep), spec.base_seed)
        for cfg in spec.scenarios()
        for rep in range(spec.replications)
    ]
    rows = _run_tasks(tasks, spec.workers, _risk_replication)
    rows.sort(key=lambda r: (r["scenario_id"], r["replication"], r["estimator"]))
    mse_rows = aggregate_mse(rows, spec)
    return rows, mse_rows


def aggregate_mse(rows: list[dict], spec: SweepSpec) -> list[dict]:
    """Mean squared error of each estimator per scenario cell."""
    out = []
    for cfg in spec.scenarios():
        sid = cfg.scenario_key()
        entry = {
            "snr": cfg.snr,
            "alpha": cfg.sparsity_exponent,
            "p": cfg.p,
            "rho": cfg.rho,
        }
        for est in RISK_ESTIMATOR_IDS:
            vals = [
                r["squared_error"]
                for r in rows
                if r["scenario_id"] == sid and r["estimator"] == est
            ]
            entry[est] = float(np.mean(vals)) if vals else float("nan")
        out.append(entry)
    return out


# ---------------------------------------------------------------------------
# CSV emission and summaries
# ---------------------------------------------------------------------------


def _fmt(value) -> str:
    if isinstance(value, str):
        return value
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if value is None:
        return ""
    return format(float(value), ".10g")


def rows_to_csv(rows: list[dict], header: str) -> str:
    """Render rows under a fixed header with stable float formatting."""
    cols = header.split(",")
    buf = io.StringIO()
    buf.write(header + "\n")
    for row in rows:
        buf.write(",".join(_fmt(row.get(c, "")) for c in cols) + "\n")
    return buf.getvalue()


def write_csv(rows: list[dict], header: str, path: str) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(rows_to_csv(rows, header))


def write_plot_csv(rows: list[dict], path: str) -> None:
    """Long-format export: one row per (scenario, method, metric, value)."""
    header = "scenario_id,method,replication,metric,value"
    out = []
    for row in rows:
        if row.get("error_code"):
            continue
        for metric in ("pred_risk", "consistency", "precision", "recall", "fscore"):
            out.append(
                {
                    "scenario_id": row["scenario_id"],
                    "method": row["method"],
                    "replication": row["replication"],
                    "metric": metric,
                    "value": row[metric],
                }
            )
    write_csv(out, header, path)


SUMMARY_HEADER = "scenario_id,method,metric,count,failures,mean,sd,median,q1,q3"

_SUMMARY_METRICS = ("pred_risk", "consistency", "precision", "recall", "fscore")


def summarize(csv_path: str) -> list[dict]:
    """Per (scenario, method) location/scale summaries of each metric.

    Quartiles use the midpoint convention (numpy's ``method="midpoint"``):
    on {1,2,3,4,5} the quartiles are (2, 3, 4).  Cells where every
    replication failed carry NA markers and the failure count.
    """
    with open(csv_path, "r", encoding="utf-8", newline="") as fh:
        reader = csv.DictReader(fh)
        expected = RECORDS_HEADER.split(",")
        if reader.fieldnames != expected:
            raise InvalidConfigError(
                f"unexpected header {reader.fieldnames}; expected {expected}"
            )
        groups: dict[tuple[str, str], dict] = {}
        for lineno, row in enumerate(reader, start=2):
            if None in row or any(v is None for v in row.values()):
                raise InvalidConfigError(f"line {lineno}: malformed row")
            key = (row["scenario_id"], row["method"])
            cell = groups.setdefault(
                key, {"failures": 0, "values": {m: [] for m in _SUMMARY_METRICS}}
            )
            if row["error_code"]:
                cell["failures"] += 1
                continue
            try:
                for m in _SUMMARY_METRICS:
                    cell["values"][m].append(float(row[m]))
            except ValueError as exc:
                raise InvalidConfigError(f"line {lineno}: malformed row ({exc})") from exc

    out = []
    for (sid, method), cell in sorted(groups.items()):
        for metric in _SUMMARY_METRICS:
            vals = np.asarray(cell["values"][metric])
            row = {
                "scenario_id": sid,
                "method": method,
                "metric": metric,
                "count": int(vals.size),
                "failures": cell["failures"],
            }
            if vals.size == 0:
                row.update({k: "NA" for k in ("mean", "sd", "median", "q1", "q3")})
            else:
                q1, med, q3 = np.percentile(vals, [25, 50, 75], method="midpoint")
                row.update(
                    {
                        "mean": float(vals.mean()),
                        "sd": float(vals.std(ddof=1)) if vals.size > 1 else "NA",
                        "median": float(med),
                        "q1": float(q1),
                        "q3": float(q3),
                    }
                )
            out.append(row)
    return out
