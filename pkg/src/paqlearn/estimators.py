"""Convex solvers for metric estimation.

Two solver families share this module:

* a trace-regularized PSD least-squares solver (accelerated proximal
  gradient with monotone acceptance, momentum restart on objective
  increase, and backtracking line search) used for all slider-query
  estimators, and
* a projected-subgradient solver for the nuclear-norm regularized hinge
  losses of the ordinal baselines (pairwise, triplet, ranking).

Gradients of the quadratic losses are accumulated as A^T diag(c) A in
O(n d^2), never materializing a d x d sensing matrix per sample.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

from .errors import NoProgress, ZeroMatrix, ZeroResponse
from .linalg import (
    MetricMatrix,
    SymMatrix,
    _shift_clip,
    quad_forms,
    symmetrize,
)

# Objective decrease below rel_tol for this many consecutive iterations
# counts as convergence.
STALL_ITERS = 5
# Default iteration budget for the nonsmooth hinge baselines.
HINGE_ITERS = 3000


@dataclass(frozen=True)
class SolverConfig:
    """Knobs for both solver families.

    lam is the regularization weight. line_search=False runs fixed steps of
    1/L from the power-iteration seed, which keeps every floating-point
    branch scale-invariant (used by the scale-equivariance checks).
    step_scale is the c in the hinge solvers' c/sqrt(k) step rule.
    """

    lam: float = 0.0
    max_iters: int = 5000
    rel_tol: float = 1e-9
    backtrack_shrink: float = 0.5
    init: str = "zero"
    line_search: bool = True
    step_scale: float = 1.0

    def __post_init__(self):
        if self.lam < 0:
            raise ValueError("lam must be nonnegative")
        if self.max_iters < 1:
            raise ValueError("max_iters must be >= 1")
        if not self.rel_tol > 0:
            raise ValueError("rel_tol must be positive")
        if not 0 < self.backtrack_shrink < 1:
            raise ValueError("backtrack_shrink must be in (0, 1)")
        if self.init not in ("zero", "scaled_identity"):
            raise ValueError(f"unknown init {self.init!r}")


@dataclass(frozen=True)
class SolveResult:
    """Estimate with the per-iteration objective values.

    objective_trace is nonincreasing: the quadratic solver enforces
    monotone acceptance and the hinge solvers record the running best.
    fixed_point_residual is ||x - prox(x - t grad(x))||_F at the final
    iterate of the quadratic solver (None for hinge solves).
    """

    estimate: MetricMatrix
    objective_trace: list
    iterations: int
    converged: bool
    fixed_point_residual: float = None


def _quadratic_data(vectors, weights, targets):
    a = np.asarray(vectors, dtype=float)
    w = np.asarray(weights, dtype=float)
    t = np.asarray(targets, dtype=float)
    if a.ndim != 2 or a.shape[0] != w.shape[0] or w.shape != t.shape:
        raise ValueError("inconsistent sample arrays")
    return a, w, t


def _lipschitz_seed(a, w, steps=20):
    """Largest curvature of the quadratic loss via power iteration.

    The Hessian acts on symmetric V as (2/n) sum_i w_i^2 (a_i^T V a_i)
    a_i a_i^T; twenty steps from the normalized identity give a tight
    enough seed for the line search (and the fixed-step mode).
    """
    n, d = a.shape
    w2 = w * w

    def apply(v):
        c = (2.0 / n) * w2 * quad_forms(a, v)
        return symmetrize((a * c[:, None]).T @ a)

    v = np.eye(d) / math.sqrt(d)
    for _ in range(steps):
        hv = apply(v)
        nrm = np.linalg.norm(hv)
        if nrm <= 0.0:
            return 0.0
        v = hv / nrm
    return float(np.vdot(v, apply(v)))


def _solve_quadratic_psd(vectors, weights, targets, cfg: SolverConfig):
    """min over PSD Sigma of mean((targets - w * a^T Sigma a)^2) + lam tr."""
    a, w, t = _quadratic_data(vectors, weights, targets)
    n, d = a.shape
    lam = cfg.lam

    def f_val(x):
        resid = t - w * quad_forms(a, x)
        return float(resid @ resid) / n

    def f_grad(x):
        resid = t - w * quad_forms(a, x)
        c = (-2.0 / n) * (w * resid)
        return symmetrize((a * c[:, None]).T @ a)

    lip = _lipschitz_seed(a, w)
    step0 = 1.0 / lip if lip > 0 else 1.0
    step = step0

    if cfg.init == "scaled_identity":
        denom = float(np.mean(w * np.einsum("ij,ij->i", a, a)))
        c0 = max(float(np.mean(t)) / denom, 0.0) if denom > 0 else 0.0
        x = c0 * np.eye(d)
    else:
        x = np.zeros((d, d))

    def prox_step(point, grad, f_point):
        """One proximal step from point; backtracks until the local
        Lipschitz bound holds. Returns (candidate, f(candidate))."""
        nonlocal step
        while True:
            cand = _shift_clip(point - step * grad, step * lam)
            if not cfg.line_search:
                return cand, f_val(cand)
            f_cand = f_val(cand)
            diff = cand - point
            bound = (
                f_point
                + float(np.vdot(grad, diff))
                + float(np.vdot(diff, diff)) / (2.0 * step)
            )
            if f_cand <= bound + 1e-12 * (1.0 + abs(f_point)):
                return cand, f_cand
            step *= cfg.backtrack_shrink
            if step < step0 * 1e-20:
                raise NoProgress("backtracking underflowed the step size")

    obj = f_val(x) + lam * float(np.trace(x))
    trace = [obj]
    x_prev = x
    t_mom = 1.0
    stall = 0
    converged = False
    iterations = 0

    for _ in range(cfg.max_iters):
        iterations += 1
        t_next = 0.5 * (1.0 + math.sqrt(1.0 + 4.0 * t_mom * t_mom))
        theta = (t_mom - 1.0) / t_next
        y = x + theta * (x - x_prev)
        cand, f_cand = prox_step(y, f_grad(y), f_val(y))
        obj_cand = f_cand + lam * float(np.trace(cand))
        if obj_cand <= obj:
            x_prev, x = x, cand
            t_mom = t_next
            obj_new = obj_cand
        else:
            # momentum overshot: restart and take a plain descent step
            cand, f_cand = prox_step(x, f_grad(x), f_val(x))
            x_prev, x = x, cand
            t_mom = 1.0
            obj_new = f_cand + lam * float(np.trace(cand))
        trace.append(obj_new)
        if abs(obj - obj_new) <= cfg.rel_tol * max(abs(obj_new), 1e-300):
            stall += 1
            if stall >= STALL_ITERS:
                converged = True
                obj = obj_new
                break
        else:
            stall = 0
        obj = obj_new

    resid = float(
        np.linalg.norm(x - _shift_clip(x - step * f_grad(x), step * lam))
    )
    return SolveResult(
        estimate=MetricMatrix.from_dense(x),
        objective_trace=trace,
        iterations=iterations,
        converged=converged,
        fixed_point_residual=resid,
    )


def fit_paq(data, y, cfg: SolverConfig) -> SolveResult:
    """Trace-regularized least squares on averaged, truncated responses.

    data is a PipelineOutput; the implicit sensing matrices are
    gtilde_i^2 * a_i a_i^T and every target equals the boundary y.
    """
    w = data.truncated_responses
    return _solve_quadratic_psd(
        data.sensing_vectors, w, np.full(w.shape[0], float(y)), cfg
    )


def fit_paq_naive(responses, y, cfg: SolverConfig) -> SolveResult:
    """Least squares on raw inverted measurements (no averaging, no
    truncation); kept as the biased baseline."""
    a = np.asarray([r.query_vector for r in responses], dtype=float)
    w = np.asarray([r.gamma_sq for r in responses], dtype=float)
    return _solve_quadratic_psd(a, w, np.full(w.shape[0], float(y)), cfg)


def fit_paq_direct(responses, y, cfg: SolverConfig) -> SolveResult:
    """Noiseless direct regression: targets y/gamma_i^2, sensing a_i a_i^T."""
    a = np.asarray([r.query_vector for r in responses], dtype=float)
    g2 = np.asarray([r.gamma_sq for r in responses], dtype=float)
    if np.any(g2 == 0.0):
        raise ZeroResponse("gamma^2 = 0 cannot be inverted")
    return _solve_quadratic_psd(a, np.ones_like(g2), float(y) / g2, cfg)


def _unpack_outcomes(outcomes, arity):
    """Normalize (x.., eps) tuples or OrdinalOutcome objects to arrays."""
    vecs = [[] for _ in range(arity)]
    eps = []
    for out in outcomes:
        if hasattr(out, "label"):
            parts, label = out.items, out.label
        else:
            parts, label = out[:arity], out[arity]
        if len(parts) != arity:
            raise ValueError(f"expected {arity} item vectors per outcome")
        for store, p in zip(vecs, parts):
            store.append(np.asarray(p, dtype=float))
        eps.append(label)
    return [np.asarray(v) for v in vecs], np.asarray(eps, dtype=float)


def _solve_hinge_psd(z_rows, u_idx, v_idx, eps, margin, cfg: SolverConfig):
    """Projected subgradient for hinge losses over the PSD cone.

    Terms are max(0, margin - eps_i * s_i) with s_i = q[u_i] (- q[v_i]),
    where q holds the quadratic forms of the deduplicated difference
    vectors. Steps follow step_scale/sqrt(k) along the normalized
    subgradient; the returned iterate is the best one seen, which never
    exceeds the objective at the zero matrix.
    """
    z = np.asarray(z_rows, dtype=float)
    n_terms = eps.shape[0]
    d = z.shape[1]
    lam = cfg.lam

    def objective(x):
        q = quad_forms(z, x)
        s = q[u_idx] if v_idx is None else q[u_idx] - q[v_idx]
        loss = np.maximum(0.0, margin - eps * s)
        return float(loss.mean()) + lam * float(np.trace(x))

    if cfg.init == "scaled_identity":
        rn = np.einsum("ij,ij->i", z, z)
        x = (margin / max(float(rn.mean()), 1e-300)) * np.eye(d)
    else:
        x = np.zeros((d, d))

    zero_obj = objective(np.zeros((d, d)))
    best_obj = objective(x)
    best_x = x.copy()
    if zero_obj < best_obj:
        best_obj = zero_obj
        best_x = np.zeros((d, d))
    trace = [best_obj]
    converged = False
    iterations = 0
    n_rows = z.shape[0]

    for k in range(1, cfg.max_iters + 1):
        iterations = k
        q = quad_forms(z, x)
        s = q[u_idx] if v_idx is None else q[u_idx] - q[v_idx]
        active = (margin - eps * s) > 0
        sub = (-eps * active) / n_terms
        coef = np.bincount(u_idx, weights=sub, minlength=n_rows)
        if v_idx is not None:
            coef -= np.bincount(v_idx, weights=sub, minlength=n_rows)
        g = symmetrize((z * coef[:, None]).T @ z)
        if lam > 0:
            g = g + lam * np.eye(d)
        gn = float(np.linalg.norm(g))
        if gn == 0.0:
            converged = True
            break
        x = _shift_clip(x - (cfg.step_scale / math.sqrt(k) / gn) * g, 0.0)
        obj = objective(x)
        if obj < best_obj:
            best_obj = obj
            best_x = x.copy()
        trace.append(best_obj)

    return SolveResult(
        estimate=MetricMatrix.from_dense(best_x),
        objective_trace=trace,
        iterations=iterations,
        converged=converged,
    )


def _dedup_rows(rows):
    uniq, inv = np.unique(rows, axis=0, return_inverse=True)
    return uniq, inv.reshape(-1)


def hinge_config(lam, **overrides) -> SolverConfig:
    """SolverConfig with the hinge solvers' default iteration budget."""
    return replace(SolverConfig(lam=lam, max_iters=HINGE_ITERS), **overrides)


def fit_pairwise(outcomes, y, cfg: SolverConfig) -> SolveResult:
    """Hinge loss mean(max(0, y - eps * ||x1-x2||_Sigma^2)) + lam tr."""
    (x1, x2), eps = _unpack_outcomes(outcomes, 2)
    z, u_idx = _dedup_rows(x1 - x2)
    return _solve_hinge_psd(z, u_idx, None, eps, float(y), cfg)


def fit_triplet(outcomes, cfg: SolverConfig) -> SolveResult:
    """Hinge loss with unit margin on distance differences to a reference."""
    (x1, x2, x3), eps = _unpack_outcomes(outcomes, 3)
    n = eps.shape[0]
    stacked = np.vstack([x1 - x2, x1 - x3])
    z, inv = _dedup_rows(stacked)
    return _solve_hinge_psd(z, inv[:n], inv[n:], eps, 1.0, cfg)


def fit_ranking(queries, cfg: SolverConfig) -> SolveResult:
    """Decompose each ranking into triplets and fit the triplet loss."""
    from .oracles import decompose_ranking

    triplets = []
    for x0, items, perm in queries:
        if np.asarray(perm).size < 2:
            raise ValueError("ranking queries need k >= 2 items")
        triplets.extend(decompose_ranking(perm, items, x0))
    return fit_triplet(triplets, cfg)


def normalize_unit_fro(est: MetricMatrix) -> MetricMatrix:
    """Rescale a metric to unit Frobenius norm, preserving its direction."""
    fro = float(np.linalg.norm(est.matrix.entries))
    if fro == 0.0 or est.rank == 0:
        raise ZeroMatrix("cannot normalize the zero matrix")
    return MetricMatrix(
        SymMatrix(est.matrix.entries / fro),
        est.rank,
        est.nonzero_singular_values / fro,
    )
