"""Monte Carlo verification of the model's statistical behavior.

Closed forms exist for isotropic metrics: the noise-times-sensing bias
E[eta * gamma^2 a a^T] equals (nu^2 / (sigma d)) I for Sigma = sigma I_d,
and the inverse moments of ||a||^2 follow the inverse chi-square product
formula. These serve as oracles for the Monte Carlo estimates. Standard
errors are computed by batch means (the integrands have heavy right
tails, so per-sample variances would be unreliable).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import InvalidDim, PropertyViolated
from .estimators import SolverConfig, fit_paq
from .linalg import MetricMatrix, SymMatrix, generate_metric_orthonormal, quad_forms
from .oracles import NoiseModel
from .pipeline import PipelineConfig, choose_lambda, choose_m, choose_tau, run_pipeline

DEFAULT_BATCHES = 100


@dataclass(frozen=True)
class MonteCarloReport:
    """Estimate, batch-means standard error, and distance from target.

    For matrix-valued estimates the standard error is entrywise and
    z_score is the entrywise maximum of |estimate - target| / se. A
    degenerate integrand (identically zero) yields se = 0 and z = 0 when
    the estimate matches the target exactly.
    """

    estimate: object
    standard_error: object
    n_samples: int
    target: object
    z_score: float
    note: str = ""


def _z_from(est, se, target):
    diff = np.abs(np.asarray(est) - np.asarray(target))
    se = np.asarray(se)
    with np.errstate(divide="ignore", invalid="ignore"):
        z = np.where(diff == 0.0, 0.0, diff / se)
    return float(np.max(z))


def bias_monte_carlo(
    metric: MetricMatrix, noise: NoiseModel, n_samples, rng, n_batches=DEFAULT_BATCHES
) -> MonteCarloReport:
    """Sample mean of eta * gamma^2 * a a^T against its closed form.

    The closed-form target (nu^2 / (sigma d)) I is attached only when the
    metric is isotropic and full rank; otherwise the estimate and its
    standard error are reported without a target.
    """
    if n_samples < 10**4:
        raise ValueError("need at least 1e4 samples")
    d = metric.dim
    sig = metric.matrix.entries
    batch = n_samples // n_batches
    means = np.empty((n_batches, d, d))
    for b in range(n_batches):
        a = rng.standard_normal((batch, d))
        q = quad_forms(a, sig)
        eta = np.asarray(noise.sample(rng, batch))
        coef = eta * (noise.y + eta) / q
        means[b] = (a * coef[:, None]).T @ a / batch
    est = means.mean(axis=0)
    se = means.std(axis=0, ddof=1) / math.sqrt(n_batches)

    isotropic = metric.rank == d and (
        metric.sigma_1 - metric.sigma_r <= 1e-12 * metric.sigma_1
    )
    if isotropic:
        target = (noise.variance / (metric.sigma_1 * d)) * np.eye(d)
        z = _z_from(est, se, target)
        note = "isotropic closed form nu^2/(sigma d) * I"
    else:
        target, z, note = None, float("nan"), "no closed form for this metric"
    return MonteCarloReport(est, se, n_batches * batch, target, z, note)


def inverse_moment_check(
    d, p, n_samples, rng, n_batches=DEFAULT_BATCHES
) -> MonteCarloReport:
    """Monte Carlo mean of (1/||a||^2)^p against prod_j 1/(d - 2j).

    Requires d >= 2p + 2: below 2p + 1 the moment is infinite, and at
    d = 2p + 1 it sits on the existence boundary where the tail of the
    integrand defeats Monte Carlo averaging, so both are rejected.
    """
    if p not in (1, 4):
        raise ValueError("supported powers are 1 and 4")
    if d < 2 * p + 2:
        raise InvalidDim(
            f"inverse moment of order {p} needs d >= {2 * p + 2}, got d={d}"
        )
    target = 1.0
    for j in range(1, p + 1):
        target /= d - 2 * j
    batch = n_samples // n_batches
    means = np.empty(n_batches)
    for b in range(n_batches):
        a = rng.standard_normal((batch, d))
        q = np.einsum("ij,ij->i", a, a)
        means[b] = np.mean(q ** (-float(p)))
    est = float(means.mean())
    se = float(means.std(ddof=1) / math.sqrt(n_batches))
    return MonteCarloReport(
        est,
        se,
        n_batches * batch,
        target,
        _z_from(est, se, target),
        f"inverse chi-square moment, d={d}, p={p}",
    )


@dataclass(frozen=True)
class TruncationAudit:
    """Outcome of checking the truncation properties on one output."""

    n: int
    truncation_hits: int
    hit_rate: float
    max_clip: float


def truncation_audit(out) -> TruncationAudit:
    """Assert the three truncation properties on every element.

    TP1: truncated <= tau. TP2: truncated <= averaged. TP3: any strict
    clip implies the averaged response reached tau.
    """
    g_bar = out.averaged_responses
    g_til = out.truncated_responses
    tau = out.tau
    bad = np.nonzero(g_til > tau)[0]
    if bad.size:
        raise PropertyViolated(f"TP1 violated at index {bad[0]}")
    bad = np.nonzero(g_til > g_bar)[0]
    if bad.size:
        raise PropertyViolated(f"TP2 violated at index {bad[0]}")
    clipped = g_bar - g_til > 0
    bad = np.nonzero(clipped & ~(g_bar >= tau))[0]
    if bad.size:
        raise PropertyViolated(f"TP3 violated at index {bad[0]}")
    n = g_bar.shape[0]
    return TruncationAudit(
        n=n,
        truncation_hits=out.truncation_hits,
        hit_rate=out.truncation_hits / n,
        max_clip=float(np.max(g_bar - g_til)) if n else 0.0,
    )


@dataclass(frozen=True)
class ScaleScenario:
    """A complete noisy estimation problem for the equivariance check."""

    d: int = 20
    r: int = 10
    N: int = 2000
    y: float = 10.0
    eta_up: float = 5.0
    seed: int = 20240
    c1_scale: float = 0.1
    solver_iters: int = 400


def _scaled_metric(metric: MetricMatrix, c) -> MetricMatrix:
    return MetricMatrix(
        SymMatrix(c * metric.matrix.entries),
        metric.rank,
        c * metric.nonzero_singular_values,
    )


def scale_equivariance_check(scenario: ScaleScenario, c) -> float:
    """Max relative deviation of the scaled run from c times the base run.

    Both runs share every random realization: the same seed produces the
    same sensing vectors and the same uniform noise positions, whose
    magnitudes scale linearly with eta_up. The policy threshold tau is
    scale-invariant, so the base value is reused verbatim. The solver runs
    fixed Lipschitz steps for a fixed iteration count, keeping every
    branch decision identical across the two runs.
    """
    if not c > 0:
        raise ValueError("scale factor must be positive")
    sc = scenario
    base_rng = np.random.default_rng(sc.seed)
    base_metric = generate_metric_orthonormal(sc.d, sc.r, base_rng)
    base_noise = NoiseModel(
        "uniform" if sc.eta_up > 0 else "none", sc.eta_up, sc.y
    )
    m = choose_m(base_noise, sc.N, sc.d)
    tau = choose_tau(base_metric.sigma_r, sc.r, base_noise, sc.N, m, sc.d)

    def run(scale):
        metric = _scaled_metric(base_metric, scale) if scale != 1.0 else base_metric
        noise = NoiseModel(base_noise.kind, scale * sc.eta_up, scale * sc.y)
        lam = choose_lambda(
            metric.sigma_r, sc.r, noise, sc.N // m, m, sc.d, tau, sc.c1_scale
        )
        cfg = PipelineConfig(N=sc.N, m=m, tau=tau, noise=noise)
        out = run_pipeline(metric, cfg, np.random.default_rng(sc.seed + 1))
        solver = SolverConfig(
            lam=lam,
            max_iters=sc.solver_iters,
            rel_tol=1e-30,
            line_search=False,
        )
        return fit_paq(out, noise.y, solver).estimate.matrix.entries

    base_est = run(1.0)
    scaled_est = run(c)
    denom = c * np.linalg.norm(base_est)
    return float(np.linalg.norm(scaled_est - c * base_est) / denom)
