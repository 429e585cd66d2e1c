"""Dense symmetric-matrix primitives.

Everything here operates on small dense matrices (d up to a few hundred):
eigendecomposition, projection onto the PSD cone, the trace-penalty proximal
map on the PSD cone, ground-truth metric generators, and error metrics.

All constructed matrices are symmetrized as (A + A.T)/2 before use so that
asymmetry cannot drift through iterative solvers.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import (
    DimMismatch,
    InvalidRank,
    NonFinite,
    NotPositiveSemidefinite,
    ZeroMatrix,
)

# Relative tolerance scales, both multiplied by the largest singular value.
# Absolute tolerances would break under the scale-equivariance checks.
PSD_TOL_SCALE = 1e-10
RANK_TOL_SCALE = 1e-8


def _as_dense(mat):
    """Return the underlying ndarray of a SymMatrix/MetricMatrix/array."""
    if isinstance(mat, MetricMatrix):
        return mat.matrix.entries
    if isinstance(mat, SymMatrix):
        return mat.entries
    return np.asarray(mat, dtype=float)


def _check_finite(arr):
    if not np.all(np.isfinite(arr)):
        raise NonFinite("matrix contains NaN or Inf entries")


def symmetrize(arr):
    """(A + A.T)/2 as a fresh float array."""
    arr = np.asarray(arr, dtype=float)
    return 0.5 * (arr + arr.T)


@dataclass(frozen=True)
class SymMatrix:
    """Symmetric d x d matrix; symmetrized exactly on construction."""

    entries: np.ndarray

    def __post_init__(self):
        arr = np.asarray(self.entries, dtype=float)
        if arr.ndim != 2 or arr.shape[0] != arr.shape[1]:
            raise DimMismatch(f"expected a square matrix, got shape {arr.shape}")
        if arr.shape[0] < 1:
            raise DimMismatch("dimension must be >= 1")
        object.__setattr__(self, "entries", symmetrize(arr))

    @property
    def dim(self):
        return self.entries.shape[0]


@dataclass(frozen=True)
class Spectrum:
    """Full eigendecomposition: descending eigenvalues, orthonormal columns."""

    eigenvalues: np.ndarray
    eigenvectors: np.ndarray

    def reconstruct(self):
        v = self.eigenvectors
        return symmetrize((v * self.eigenvalues) @ v.T)


@dataclass(frozen=True)
class MetricMatrix:
    """PSD metric with known spectrum metadata.

    nonzero_singular_values holds the descending eigenvalues above the
    relative rank tolerance; trace equals their sum by construction.
    Ground truths always have rank >= 1; a rank-0 instance represents the
    zero matrix, which a heavily regularized estimate can legitimately be.
    """

    matrix: SymMatrix
    rank: int
    nonzero_singular_values: np.ndarray
    trace: float = field(default=None)

    def __post_init__(self):
        sv = np.asarray(self.nonzero_singular_values, dtype=float)
        if sv.ndim != 1 or np.any(sv <= 0):
            raise InvalidRank("nonzero singular values must be positive")
        if sv.size > 1 and np.any(np.diff(sv) > 0):
            sv = np.sort(sv)[::-1]
        object.__setattr__(self, "nonzero_singular_values", sv)
        if self.rank != sv.size or not 0 <= self.rank <= self.dim:
            raise InvalidRank(
                f"rank {self.rank} inconsistent with {sv.size} singular values"
            )
        if self.trace is None:
            object.__setattr__(self, "trace", float(sv.sum()))

    @property
    def dim(self):
        return self.matrix.dim

    @property
    def sigma_1(self):
        return float(self.nonzero_singular_values[0]) if self.rank else 0.0

    @property
    def sigma_r(self):
        """Smallest nonzero singular value."""
        return float(self.nonzero_singular_values[-1]) if self.rank else 0.0

    @classmethod
    def from_dense(cls, arr):
        """Build from a dense (nearly) PSD matrix via eigendecomposition.

        Eigenvalues below the relative rank tolerance are dropped from the
        stored spectrum and the matrix is reconstructed without them, so the
        rank/trace metadata is exact. Raises NotPositiveSemidefinite when an
        eigenvalue is more negative than the PSD tolerance allows.
        """
        spec = sym_eigendecompose(arr)
        lam = spec.eigenvalues
        scale = float(lam[0]) if lam[0] > 0 else float(np.abs(lam).max())
        if scale == 0.0:
            d = spec.eigenvalues.shape[0]
            return cls(SymMatrix(np.zeros((d, d))), 0, np.empty(0))
        if lam[-1] < -PSD_TOL_SCALE * scale:
            raise NotPositiveSemidefinite(
                f"eigenvalue {lam[-1]:.3e} below -{PSD_TOL_SCALE:.0e} * scale"
            )
        keep = lam > RANK_TOL_SCALE * scale
        sv = lam[keep]
        v = spec.eigenvectors[:, keep]
        if sv.size == 0:
            d = spec.eigenvalues.shape[0]
            return cls(SymMatrix(np.zeros((d, d))), 0, np.empty(0))
        cleaned = symmetrize((v * sv) @ v.T)
        return cls(SymMatrix(cleaned), int(sv.size), sv)

    def validate(self):
        """Re-check the PSD/rank/trace invariants; raises on violation."""
        lam = sym_eigendecompose(self.matrix).eigenvalues
        s1 = max(self.sigma_1, float(np.abs(lam).max()), 1e-300)
        if lam[-1] < -PSD_TOL_SCALE * s1:
            raise NotPositiveSemidefinite(f"min eigenvalue {lam[-1]:.3e}")
        n_rank = int(np.sum(lam > RANK_TOL_SCALE * s1))
        if n_rank != self.rank:
            raise InvalidRank(f"eigenvalue count {n_rank} != rank {self.rank}")
        sv_sum = float(self.nonzero_singular_values.sum())
        if abs(self.trace - sv_sum) > 1e-8 * max(abs(sv_sum), 1e-300):
            raise NotPositiveSemidefinite("trace inconsistent with spectrum")
        return self


def sym_eigendecompose(a) -> Spectrum:
    """Eigendecomposition of a symmetric matrix, eigenvalues descending."""
    arr = symmetrize(_as_dense(a))
    _check_finite(arr)
    lam, v = np.linalg.eigh(arr)
    return Spectrum(lam[::-1].copy(), v[:, ::-1].copy())


def _shift_clip(arr, t):
    """V max(lam - t, 0) V^T for symmetric arr; the PSD projection at t=0."""
    _check_finite(arr)
    lam, v = np.linalg.eigh(arr)
    lam = np.maximum(lam - t, 0.0)
    return symmetrize((v * lam) @ v.T)


def project_psd(a) -> SymMatrix:
    """Frobenius-nearest PSD matrix: clip negative eigenvalues at zero."""
    return SymMatrix(_shift_clip(symmetrize(_as_dense(a)), 0.0))


def prox_trace_psd(a, t) -> SymMatrix:
    """Proximal map of t * trace on the PSD cone.

    Minimizes 0.5*||X - A||_F^2 + t*tr(X) over PSD X, which shifts every
    eigenvalue down by t and clips at zero. On the PSD cone the nuclear norm
    equals the trace, so this is the nuclear-norm prox restricted to PSD.
    """
    if t < 0:
        raise ValueError("shift t must be nonnegative")
    return SymMatrix(_shift_clip(symmetrize(_as_dense(a)), float(t)))


def generate_metric_orthonormal(d, r, rng) -> MetricMatrix:
    """Ground-truth metric (d/sqrt(r)) * U U^T with Haar-like orthonormal U.

    U is obtained by orthonormalizing a standard-normal d x r matrix (QR with
    the sign of diag(R) fixed, so the column distribution is rotation
    invariant). All r nonzero eigenvalues equal d/sqrt(r); the Frobenius norm
    is exactly d and the trace is d*sqrt(r).
    """
    if not 1 <= r <= d:
        raise InvalidRank(f"need 1 <= r <= d, got r={r}, d={d}")
    g = rng.standard_normal((d, r))
    q, rr = np.linalg.qr(g)
    signs = np.sign(np.diag(rr))
    signs[signs == 0] = 1.0
    u = q * signs
    scale = d / np.sqrt(r)
    mat = symmetrize(scale * (u @ u.T))
    sv = np.full(r, scale)
    return MetricMatrix(SymMatrix(mat), int(r), sv)


def generate_metric_wishart(d, r, rng) -> MetricMatrix:
    """Ground-truth metric L L^T / ||L L^T||_F with L standard normal d x r."""
    if not 1 <= r <= d:
        raise InvalidRank(f"need 1 <= r <= d, got r={r}, d={d}")
    ell = rng.standard_normal((d, r))
    m = ell @ ell.T
    fro = np.linalg.norm(m)
    if fro == 0.0:
        raise ZeroMatrix("degenerate Wishart draw")
    m = symmetrize(m / fro)
    # nonzero spectrum via the r x r Gram matrix, rescaled by the same norm
    lam = np.linalg.eigvalsh(ell.T @ ell)[::-1] / fro
    lam = lam[lam > RANK_TOL_SCALE * lam[0]]
    return MetricMatrix(SymMatrix(m), int(lam.size), lam)


def normalized_error(est, truth) -> float:
    """||est - truth||_F / ||truth||_F."""
    a = _as_dense(est)
    b = _as_dense(truth)
    if a.shape != b.shape:
        raise DimMismatch(f"shape {a.shape} vs {b.shape}")
    return float(np.linalg.norm(a - b) / np.linalg.norm(b))


def mahalanobis_sq(x, xp, metric) -> float:
    """Squared Mahalanobis distance (x - xp)^T Sigma (x - xp)."""
    x = np.asarray(x, dtype=float)
    xp = np.asarray(xp, dtype=float)
    m = _as_dense(metric)
    if x.shape != xp.shape or x.shape[0] != m.shape[0]:
        raise DimMismatch(
            f"vectors of shape {x.shape}/{xp.shape} vs metric dim {m.shape[0]}"
        )
    z = x - xp
    return float(z @ m @ z)


def quad_forms(points, metric):
    """Row-wise quadratic forms z_i^T Sigma z_i for a stack of vectors."""
    m = _as_dense(metric)
    z = np.asarray(points, dtype=float)
    return np.einsum("ij,ij->i", z @ m, z)
