"""Measurement collection with m-fold averaging and tau-truncation,
plus the theory-driven choices of m, tau and the regularization weight.

The collection procedure draws n = floor(N/m) standard-normal sensing
vectors, answers m slider queries per vector, averages the m squared
responses, and caps the average at tau. Averaging shrinks the
noise-induced bias (effective variance nu^2/m); truncation tames the heavy
right tail of 1/(a^T Sigma a).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import BudgetTooSmall, PreconditionViolated
from .linalg import MetricMatrix
from .oracles import NoiseModel, paq_respond
from .seeding import substream_seeds

# Guards the averaging-parameter ceiling against FP round-up when the
# noise ratio sits exactly on the regime boundary.
_CEIL_SLACK = 1e-9


@dataclass(frozen=True)
class PipelineConfig:
    """Measurement budget N, averaging m, truncation tau, noise model."""

    N: int
    m: int
    tau: float
    noise: NoiseModel

    def __post_init__(self):
        if self.m < 1:
            raise BudgetTooSmall("averaging parameter m must be >= 1")
        if self.N // self.m < 1:
            raise BudgetTooSmall(f"floor(N/m) = {self.N // self.m} < 1")
        if not self.tau > 0:
            raise ValueError("truncation threshold tau must be positive")

    @property
    def n(self):
        """Number of distinct sensing vectors, floor(N/m)."""
        return self.N // self.m


@dataclass(frozen=True)
class PipelineOutput:
    """n sensing vectors with averaged and truncated squared responses.

    mean_noise retains the per-vector average of the recorded noise draws
    and discarded counts the measurements lost to the floor(N/m) division;
    both are diagnostics only.
    """

    sensing_vectors: np.ndarray
    truncated_responses: np.ndarray
    averaged_responses: np.ndarray
    truncation_hits: int
    tau: float = np.inf
    mean_noise: np.ndarray = None
    discarded: int = 0

    @property
    def n(self):
        return self.sensing_vectors.shape[0]


@dataclass(frozen=True)
class RegimeReport:
    """Which noise regime applies, and the parameter choices it implies."""

    regime: str
    noise_ratio: float
    threshold: float
    m: int
    tau: float = None
    lambda_n: float = None


def run_pipeline(metric: MetricMatrix, cfg: PipelineConfig, rng) -> PipelineOutput:
    """Collect, average and truncate N slider measurements.

    Each sensing vector consumes its own substream derived from
    (master draw, vector index), so the output is identical no matter how
    the per-vector work is ordered or distributed.
    """
    n, m = cfg.n, cfg.m
    d = metric.dim
    base = int(rng.integers(0, 2**63 - 1))
    seeds = substream_seeds(base, n)

    vectors = np.empty((n, d))
    averaged = np.empty(n)
    mean_noise = np.empty(n)
    for i in range(n):
        sub = np.random.default_rng(int(seeds[i]))
        a = sub.standard_normal(d)
        gammas = np.empty(m)
        etas = np.empty(m)
        for j in range(m):
            resp = paq_respond(metric, a, cfg.noise, sub)
            gammas[j] = resp.gamma_sq
            etas[j] = resp.noise_realization
        vectors[i] = a
        averaged[i] = gammas.mean()
        mean_noise[i] = etas.mean()

    truncated = np.minimum(averaged, cfg.tau)
    hits = int(np.sum(averaged >= cfg.tau))
    return PipelineOutput(
        sensing_vectors=vectors,
        truncated_responses=truncated,
        averaged_responses=averaged,
        truncation_hits=hits,
        tau=cfg.tau,
        mean_noise=mean_noise,
        discarded=cfg.N - n * m,
    )


def noise_ratio(noise: NoiseModel) -> float:
    """nu^2 / (b_up)^2, the quantity that separates the noise regimes."""
    return noise.variance / noise.b_up**2


def choose_m(noise: NoiseModel, N, d) -> int:
    """Averaging parameter ceil((nu^2/b_up^2)^(2/3) * (N/d)^(1/3)), >= 1.

    The ceiling is taken with a relative slack so that a noise ratio lying
    exactly on the low-noise boundary (ratio = sqrt(d/N), inner value 1)
    yields m = 1 despite FP rounding.
    """
    inner = noise_ratio(noise) ** (2.0 / 3.0) * (N / d) ** (1.0 / 3.0)
    return max(1, math.ceil(inner * (1.0 - _CEIL_SLACK)))


def choose_tau(sigma_r, r, noise: NoiseModel, N, m, d, trace=None) -> float:
    """Truncation threshold (b_up / (sigma_r r)) * sqrt(N / (m d)).

    Validates tau >= mu_b / trace; when the metric's trace is not supplied
    the conservative lower bound sigma_r * r is used in its place.
    """
    if sigma_r <= 0 or r < 1 or m < 1:
        raise ValueError("need sigma_r > 0, r >= 1, m >= 1")
    tau = noise.b_up / (sigma_r * r) * math.sqrt(N / (m * d))
    tr = sigma_r * r if trace is None else trace
    if tau < noise.mu_b / tr:
        raise PreconditionViolated(
            f"tau = {tau:.6g} below mu_b/trace = {noise.mu_b / tr:.6g}"
        )
    return tau


def choose_lambda(sigma_r, r, noise: NoiseModel, n, m, d, tau, c1_scale) -> float:
    """Regularization weight: c1_scale times the policy expression

        b_up * ( (b_up/(sigma_r r)) sqrt(d/n) + (d/n) tau
                 + (b_up/(sigma_r r))^2 / tau )  +  nu^2 / (m sigma_r r).
    """
    b_up = noise.b_up
    ratio = b_up / (sigma_r * r)
    bracket = b_up * (
        ratio * math.sqrt(d / n) + (d / n) * tau + ratio**2 / tau
    ) + noise.variance / (m * sigma_r * r)
    return c1_scale * bracket


def classify_regime(
    noise: NoiseModel, N, d, sigma_r=None, r=None, c1_scale=1.0
) -> RegimeReport:
    """High- vs low-noise classification with the implied parameter choices.

    High noise means nu^2/(b_up)^2 > sqrt(d/N); equality counts as low
    noise. tau and lambda_n are filled in only when the metric spectrum
    (sigma_r, r) is supplied.
    """
    ratio = noise_ratio(noise)
    threshold = math.sqrt(d / N)
    regime = "high_noise" if ratio > threshold else "low_noise"
    m = choose_m(noise, N, d)
    tau = lam = None
    if sigma_r is not None and r is not None:
        tau = choose_tau(sigma_r, r, noise, N, m, d)
        lam = choose_lambda(sigma_r, r, noise, N // m, m, d, tau, c1_scale)
    return RegimeReport(regime, ratio, threshold, m, tau, lam)
