"""Simulated respondents.

A slider (perceptual adjustment) query presents a reference item and a ray
x + gamma*a; the simulated respondent stops at the point whose squared
Mahalanobis distance from the reference crosses the boundary y, perturbed by
bounded zero-mean noise. Ordinal respondents (pairwise, triplet, ranking-k)
answer noiselessly from the ground-truth metric.

All oracles are pure functions of their inputs plus an explicitly passed
numpy Generator, so concurrent trials with disjoint streams are safe.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DegenerateDirection, DimMismatch
from .linalg import MetricMatrix, SymMatrix, mahalanobis_sq, quad_forms

# Directions with a^T Sigma a below this relative threshold never reach the
# boundary; the model's response diverges, so we refuse to answer.
DEGENERATE_TOL = 1e-12


@dataclass(frozen=True)
class NoiseModel:
    """Bounded zero-mean noise on the boundary value y.

    kind is "none" or "uniform"; uniform draws from [-eta_up, eta_up] and
    requires eta_up <= y so that y + eta stays nonnegative. The variance,
    upper boundary and median boundary are derived, never user-supplied.
    """

    kind: str
    eta_up: float
    y: float

    def __post_init__(self):
        if self.kind not in ("none", "uniform"):
            raise ValueError(f"unknown noise kind {self.kind!r}")
        if self.y <= 0:
            raise ValueError("boundary y must be positive")
        if self.kind == "uniform":
            if not 0 <= self.eta_up <= self.y:
                raise ValueError("uniform noise requires 0 <= eta_up <= y")
        elif self.eta_up != 0:
            raise ValueError("noise kind 'none' requires eta_up == 0")

    @property
    def variance(self):
        """nu^2: (eta_up)^2 / 3 for uniform, 0 for none."""
        if self.kind == "uniform":
            return self.eta_up**2 / 3.0
        return 0.0

    @property
    def b_up(self):
        """Upper boundary y + eta_up."""
        return self.y + self.eta_up

    @property
    def mu_b(self):
        """Median boundary y + median(eta); the noise menu is symmetric."""
        return self.y

    def sample(self, rng, size=None):
        """Draw noise realizations.

        Uniform noise is produced as eta_up * U(-1, 1) so that scaling
        eta_up scales the realizations linearly for a shared stream, which
        the scale-equivariance checks rely on.
        """
        if self.kind == "uniform" and self.eta_up > 0:
            return self.eta_up * rng.uniform(-1.0, 1.0, size)
        if size is None:
            return 0.0
        return np.zeros(size)


@dataclass(frozen=True)
class PaqResponse:
    """One slider measurement: query vector, squared scale, noise draw."""

    query_vector: np.ndarray
    gamma_sq: float
    noise_realization: float


@dataclass(frozen=True)
class OrdinalOutcome:
    """Sign label in {-1, +1} together with the item vectors involved."""

    label: int
    items: tuple


def _sign(x):
    """Sign with ties broken to +1, keeping the oracles deterministic."""
    return -1 if x < 0 else 1


def sample_query_vector(d, rng):
    """One standard-normal query direction in R^d."""
    if d < 1:
        raise DimMismatch("d must be >= 1")
    return rng.standard_normal(d)


def paq_respond(metric: MetricMatrix, a, noise: NoiseModel, rng) -> PaqResponse:
    """Answer one slider query: gamma^2 = (y + eta) / (a^T Sigma a)."""
    a = np.asarray(a, dtype=float)
    q = mahalanobis_sq(a, np.zeros_like(a), metric)
    if q <= DEGENERATE_TOL * metric.sigma_1 * float(a @ a):
        raise DegenerateDirection(
            "query direction has (numerically) zero metric energy"
        )
    eta = float(noise.sample(rng))
    return PaqResponse(a, (noise.y + eta) / q, eta)


def build_inverted_sensing(resp: PaqResponse) -> SymMatrix:
    """Rank-one sensing matrix gamma^2 * a a^T built from one response."""
    a = resp.query_vector
    return SymMatrix(resp.gamma_sq * np.outer(a, a))


def pairwise_oracle(metric: MetricMatrix, x1, x2, y) -> OrdinalOutcome:
    """Noiseless similar/dissimilar comparison of a pair against boundary y."""
    d2 = mahalanobis_sq(x1, x2, metric)
    return OrdinalOutcome(_sign(d2 - y), (np.asarray(x1, float), np.asarray(x2, float)))


def triplet_oracle(metric: MetricMatrix, x1, x2, x3) -> OrdinalOutcome:
    """Which of x2, x3 is closer to the reference x1 (noiseless)."""
    d12 = mahalanobis_sq(x1, x2, metric)
    d13 = mahalanobis_sq(x1, x3, metric)
    return OrdinalOutcome(
        _sign(d12 - d13),
        (np.asarray(x1, float), np.asarray(x2, float), np.asarray(x3, float)),
    )


def ranking_oracle(metric: MetricMatrix, x0, items):
    """Permutation sorting items by squared distance to x0, ascending.

    Stable on ties, so repeated distances keep their input order.
    """
    items = np.asarray(items, dtype=float)
    if items.ndim != 2 or items.shape[0] < 2:
        raise DimMismatch("need at least two items to rank")
    x0 = np.asarray(x0, dtype=float)
    if items.shape[1] != x0.shape[0]:
        raise DimMismatch("item dimension does not match reference")
    dists = quad_forms(items - x0, metric)
    return np.argsort(dists, kind="stable")


def decompose_ranking(perm, items, x0):
    """Expand one ranking of k items into its k(k-1)/2 triplet outcomes.

    For positions p < q in the ranking, the item at p is (weakly) closer to
    the reference, so the emitted triplet (x0, item_p, item_q) carries label
    -1. Ties are a probability-zero event for continuous item distributions.
    """
    items = np.asarray(items, dtype=float)
    x0 = np.asarray(x0, dtype=float)
    perm = np.asarray(perm)
    k = perm.size
    out = []
    for p in range(k):
        xa = items[perm[p]]
        for q in range(p + 1, k):
            out.append(OrdinalOutcome(-1, (x0, xa, items[perm[q]])))
    return out
