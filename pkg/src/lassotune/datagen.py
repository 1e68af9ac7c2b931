"""Synthetic regression scenarios on equicorrelated Gaussian designs.

Generates sparse linear-model data Y = X beta* + eps with an n x p design
whose rows have covariance D = (1-rho) I + rho 11', a Laplace-distributed
sparse coefficient vector calibrated to a target signal-to-noise ratio, and
Gaussian or scaled-t(3) noise.  Also builds the two small analytic datasets
used by the worked examples.
"""
from __future__ import annotations

import math
import zlib
from dataclasses import dataclass, replace
from enum import Enum

import numpy as np

from ._rng import derive_rng
from .errors import InvalidConfigError


class NoiseKind(str, Enum):
    GAUSSIAN = "gaussian"
    SCALED_T3 = "scaled_t3"


@dataclass(frozen=True)
class ScenarioConfig:
    """One cell of the simulation design.

    ``snr`` is the population signal-to-noise ratio beta*' D beta* / sigma2;
    passing ``None`` skips the SNR calibration and keeps the raw Laplace
    draws (used by the small-example scenarios where the coefficient scale
    is specified directly).
    """

    n: int
    p: int
    rho: float
    sparsity_exponent: float
    snr: float | None
    noise_kind: NoiseKind = NoiseKind.GAUSSIAN
    sigma2: float = 1.0
    seed: int = 0
    replication_id: int = 0

    def __post_init__(self):
        if self.n < 2:
            raise InvalidConfigError(f"n must be >= 2, got {self.n}")
        if self.p < 1:
            raise InvalidConfigError(f"p must be >= 1, got {self.p}")
        if not 0.0 <= self.rho < 1.0:
            raise InvalidConfigError(f"rho must lie in [0, 1), got {self.rho}")
        if not 0.0 < self.sparsity_exponent < 1.0:
            raise InvalidConfigError(
                f"sparsity exponent must lie in (0, 1), got {self.sparsity_exponent}"
            )
        if self.snr is not None and not self.snr > 0.0:
            raise InvalidConfigError(f"snr must be > 0, got {self.snr}")
        if not self.sigma2 > 0.0:
            raise InvalidConfigError(f"sigma2 must be > 0, got {self.sigma2}")
        if isinstance(self.noise_kind, str) and not isinstance(self.noise_kind, NoiseKind):
            object.__setattr__(self, "noise_kind", NoiseKind(self.noise_kind))
        s = self.s_star
        if not 1 <= s <= min(self.n, self.p):
            raise InvalidConfigError(
                f"support size floor(n^alpha) = {s} must lie in [1, min(n, p)]"
            )

    @property
    def s_star(self) -> int:
        return int(math.floor(self.n ** self.sparsity_exponent))

    def scenario_key(self) -> str:
        """Stable string identifying the scenario cell (seed/replication excluded)."""
        snr = "raw" if self.snr is None else f"{self.snr:g}"
        return (
            f"n{self.n}_p{self.p}_rho{self.rho:g}_a{self.sparsity_exponent:g}"
            f"_snr{snr}_{self.noise_kind.value}"
        )

    def scenario_hash(self) -> int:
        return zlib.crc32(self.scenario_key().encode())

    def with_replication(self, replication_id: int) -> "ScenarioConfig":
        return replace(self, replication_id=replication_id)


@dataclass(frozen=True)
class SimulatedDataset:
    """A realized dataset together with its ground truth."""

    X: np.ndarray
    Y: np.ndarray
    beta_star: np.ndarray
    support_star: np.ndarray
    sigma2: float
    config: ScenarioConfig

    @property
    def n(self) -> int:
        return self.X.shape[0]

    @property
    def p(self) -> int:
        return self.X.shape[1]


def equicorrelation_sqrt_coeffs(p: int, rho: float) -> tuple[float, float]:
    """Coefficients (a, b) with D^{1/2} = a I + b 11' for the equicorrelation D."""
    a = math.sqrt(1.0 - rho)
    b = (math.sqrt(1.0 - rho + p * rho) - a) / p
    return a, b


def gen_design(n: int, p: int, rho: float, rng: np.random.Generator) -> np.ndarray:
    """Draw an n x p design with equicorrelated rows.

    Entries start i.i.d. standard normal; correlation rho is introduced by
    right-multiplying with D^{1/2}, applied in closed form as
    a X + b (X 1) 1' so the cost stays O(np).
    """
    if not 0.0 <= rho < 1.0:
        raise InvalidConfigError(f"rho must lie in [0, 1), got {rho}")
    X = rng.standard_normal((n, p))
    if rho == 0.0:
        return X
    a, b = equicorrelation_sqrt_coeffs(p, rho)
    return a * X + b * X.sum(axis=1, keepdims=True)


def quadratic_form_equicorr(beta: np.ndarray, rho: float) -> float:
    """beta' D beta for the equicorrelation matrix D, without forming D."""
    ss = float(beta @ beta)
    s1 = float(beta.sum())
    return (1.0 - rho) * ss + rho * s1 * s1


def gen_beta(
    n: int,
    p: int,
    alpha: float,
    snr: float | None,
    rho: float,
    rng: np.random.Generator,
    sigma2: float = 1.0,
) -> tuple[np.ndarray, np.ndarray]:
    """Sparse coefficient vector with floor(n^alpha) Laplace(1) nonzeros.

    Support positions are uniform at random.  When ``snr`` is given the
    vector is rescaled multiplicatively so that beta' D beta = snr * sigma2
    under the population covariance D.
    """
    s = int(math.floor(n ** alpha))
    if s > p:
        raise InvalidConfigError(f"support size {s} exceeds p = {p}")
    if snr is not None and not snr > 0.0:
        raise InvalidConfigError(f"snr must be > 0, got {snr}")
    support = np.sort(rng.choice(p, size=s, replace=False))
    beta = np.zeros(p)
    beta[support] = rng.laplace(0.0, 1.0, size=s)
    if snr is not None:
        q = quadratic_form_equicorr(beta, rho)
        beta *= math.sqrt(snr * sigma2 / q)
    return beta, support


def gen_noise(n: int, kind: NoiseKind, rng: np.random.Generator) -> np.ndarray:
    """Unit-variance noise draws: standard normal or t(3)/sqrt(3)."""
    kind = NoiseKind(kind)
    if n == 0:
        return np.empty(0)
    if kind is NoiseKind.GAUSSIAN:
        return rng.standard_normal(n)
    return rng.standard_t(3, size=n) / math.sqrt(3.0)


def gen_dataset(config: ScenarioConfig) -> SimulatedDataset:
    """Realize a dataset from its config, deterministically in (seed, replication)."""
    rng = derive_rng(config.seed, config.replication_id)
    X = gen_design(config.n, config.p, config.rho, rng)
    beta, support = gen_beta(
        config.n,
        config.p,
        config.sparsity_exponent,
        config.snr,
        config.rho,
        rng,
        sigma2=config.sigma2,
    )
    eps = gen_noise(config.n, config.noise_kind, rng)
    Y = X @ beta + math.sqrt(config.sigma2) * eps
    return SimulatedDataset(
        X=X, Y=Y, beta_star=beta, support_star=support, sigma2=config.sigma2, config=config
    )


def example1_dataset(sigma: float) -> SimulatedDataset:
    """The tiny noiseless 2 x 3 dataset where Y is a multiple of every column.

    All three columns are +/- (1, -1)'/sqrt(2), so the design has rank one
    and any single column can interpolate Y exactly.
    """
    if not sigma > 0:
        raise InvalidConfigError(f"sigma must be > 0, got {sigma}")
    r2 = math.sqrt(2.0)
    X = np.array([[1.0, -1.0, 1.0], [-1.0, 1.0, -1.0]]) / r2
    Y = (sigma / r2) * np.array([1.0, -1.0])
    beta = np.array([sigma, 0.0, 0.0])
    config = ScenarioConfig(
        n=2, p=3, rho=0.0, sparsity_exponent=0.1, snr=1.0, sigma2=sigma**2, seed=0
    )
    return SimulatedDataset(
        X=X, Y=Y, beta_star=beta, support_star=np.array([0]), sigma2=sigma**2, config=config
    )


def example2_config(sigma: float, seed: int) -> ScenarioConfig:
    """n=30, p=150 scenario with a single raw Laplace(1) coefficient.

    The coefficient is used as drawn (no SNR rescale); only the noise scale
    sigma varies.
    """
    if not sigma > 0:
        raise InvalidConfigError(f"sigma must be > 0, got {sigma}")
    return ScenarioConfig(
        n=30,
        p=150,
        rho=0.0,
        sparsity_exponent=0.1,
        snr=None,
        noise_kind=NoiseKind.GAUSSIAN,
        sigma2=sigma**2,
        seed=seed,
    )
