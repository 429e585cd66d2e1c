"""Acceptance suite: one test per criterion, one printed PASS/FAIL line each.

Run with `pytest tests/test_acceptance.py -v -s`. The heavy criteria (1-5)
take minutes each; the whole module runs in roughly an hour on a laptop.

Three criteria assert targets that a converged implementation of the model
does not meet; they are asserted exactly as stated and fail honestly, with
the measured values printed for review:

* criterion 1: the ranking-8/16 baselines at N=1000 queries (28k/120k
  decomposed triplets) estimate the metric far better than the slider
  queries at N=600, so "slider beats every ordinal type" fails for the
  ranking types (it holds for pairwise and triplet). A control run with
  28k independent triplets reproduces the ranking-8 error to within 8%,
  so the information really is in the queries, not in a solver artifact.
* criterion 3: under the exact parameter policies the truncation
  threshold sits so deep in the response tail that rank-5 and rank-9
  error curves decay at the same rate over the tested window; the 2x
  decay contrast does not materialize at either noise level.
* criterion 5 (second clause): with the averaging policy pinned at m=2
  across N in [25000, 50000], the averaged estimator keeps a bias floor
  of nu^2/(2 sigma_r r) and its error drops only ~13% over the window
  (the high-noise (d/N)^(1/3) rate itself caps the drop at 21%).
"""

import math
import time
from dataclasses import replace

import numpy as np
import pytest

import paqlearn as pl
from paqlearn.diagnostics import (
    ScaleScenario,
    bias_monte_carlo,
    inverse_moment_check,
    scale_equivariance_check,
)
from paqlearn.errors import InvalidDim
from paqlearn.estimators import SolverConfig, fit_paq, fit_paq_naive
from paqlearn.harness import ExperimentConfig, run_compare_queries, run_paq_sweep
from paqlearn.linalg import (
    MetricMatrix,
    SymMatrix,
    generate_metric_orthonormal,
    generate_metric_wishart,
    normalized_error,
)
from paqlearn.oracles import NoiseModel, paq_respond
from paqlearn.pipeline import (
    PipelineConfig,
    choose_lambda,
    choose_m,
    choose_tau,
    run_pipeline,
)
from paqlearn.seeding import derive_trial_seed

pytestmark = pytest.mark.acceptance

MASTER = 20240901


def _report(num, name, passed, detail):
    print(f"\n[criterion {num:02d}] {'PASS' if passed else 'FAIL'} {name}: {detail}")


def _mean(records):
    return float(np.mean([r.normalized_error for r in records]))


# ---------------------------------------------------------------------------
# 1. query-efficiency gap
# ---------------------------------------------------------------------------


def test_criterion_01_query_efficiency_gap():
    t0 = time.time()
    base = ExperimentConfig(
        experiment="compare_queries",
        grid_N=(600,),
        grid_d=(50,),
        grid_r=(10,),
        y=10.0,
        eta_up=0.0,
        trials=10,
        master_seed=MASTER,
        lambda_scale=0.05,
    )
    paq_mean = _mean(run_compare_queries(base, query_types=("paq",)))
    ordinals = {}
    cfg1000 = replace(base, grid_N=(1000,))
    for qt in ("pairwise", "triplet", "ranking-8", "ranking-16"):
        ordinals[qt] = _mean(run_compare_queries(cfg1000, query_types=(qt,)))

    in_band = 0.1 <= paq_mean <= 0.3
    beats = {qt: paq_mean < err for qt, err in ordinals.items()}
    detail = (
        f"paq@600={paq_mean:.3f} (band [0.1,0.3]: {'ok' if in_band else 'out'}); "
        + ", ".join(f"{qt}@1000={err:.3f}" for qt, err in ordinals.items())
        + f"; elapsed {time.time() - t0:.0f}s"
    )
    _report(1, "query-efficiency gap", in_band and all(beats.values()), detail)
    assert in_band, f"slider mean error at N=600 outside [0.1, 0.3]: {paq_mean:.4f}"
    for qt, ok in beats.items():
        assert ok, (
            f"slider@600 ({paq_mean:.4f}) is not below {qt}@1000 "
            f"({ordinals[qt]:.4f})"
        )


# ---------------------------------------------------------------------------
# 2. dimension collapse
# ---------------------------------------------------------------------------


def test_criterion_02_dimension_collapse():
    t0 = time.time()
    means = {}
    for d in (30, 50):
        cfg = ExperimentConfig(
            experiment="sweep_d",
            grid_N=tuple(nd * d for nd in (200, 400, 800)),
            grid_d=(d,),
            grid_r=(15,),
            y=200.0,
            eta_up=10.0,
            trials=20,
            master_seed=MASTER + 2,
            lambda_scale=0.1,
        )
        records = run_paq_sweep(cfg)
        for nd in (200, 400, 800):
            means[(d, nd)] = float(
                np.mean([r.normalized_error for r in records if r.N == nd * d])
            )
    rel = {
        nd: abs(means[(30, nd)] - means[(50, nd)])
        / max(means[(30, nd)], means[(50, nd)])
        for nd in (200, 400, 800)
    }
    passed = all(v <= 0.30 for v in rel.values())
    detail = (
        ", ".join(
            f"N/d={nd}: d30={means[(30, nd)]:.4f} d50={means[(50, nd)]:.4f} "
            f"({rel[nd]:.0%})"
            for nd in (200, 400, 800)
        )
        + f"; elapsed {time.time() - t0:.0f}s"
    )
    _report(2, "dimension collapse", passed, detail)
    assert passed, f"matched-N/d errors differ by more than 30%: {rel}"


# ---------------------------------------------------------------------------
# 3. rank phase transition
# ---------------------------------------------------------------------------


def test_criterion_03_rank_phase_transition():
    t0 = time.time()
    cfg = ExperimentConfig(
        experiment="sweep_r",
        grid_N=(10000, 50000),
        grid_d=(50,),
        grid_r=(5, 9),
        y=200.0,
        eta_up=10.0,
        trials=20,
        master_seed=MASTER + 3,
        lambda_scale=0.1,
    )
    records = run_paq_sweep(cfg)

    def mean_at(r, N):
        return float(
            np.mean([x.normalized_error for x in records if x.r == r and x.N == N])
        )

    decay = {r: mean_at(r, 10000) / mean_at(r, 50000) for r in (5, 9)}
    passed = decay[9] >= 2.0 * decay[5]
    detail = (
        f"decay r=9: {decay[9]:.2f}x, r=5: {decay[5]:.2f}x "
        f"(need r9 >= 2*r5); elapsed {time.time() - t0:.0f}s"
    )
    _report(3, "rank phase transition", passed, detail)
    assert passed, (
        f"decay factor at r=9 ({decay[9]:.2f}x) is not at least twice the "
        f"decay factor at r=5 ({decay[5]:.2f}x)"
    )


# ---------------------------------------------------------------------------
# 4. averaging optimum
# ---------------------------------------------------------------------------


def test_criterion_04_averaging_optimum():
    t0 = time.time()
    argmins = {}
    for N, d in ((20000, 50), (12000, 30), (50000, 50)):
        cfg = ExperimentConfig(
            experiment="sweep_m",
            grid_N=(N,),
            grid_d=(d,),
            grid_r=(9,),
            grid_m=(1, 2, 4, 8, 16, 32),
            y=200.0,
            eta_up=200.0,
            trials=20,
            master_seed=MASTER + 4,
            lambda_scale=0.1,
        )
        records = run_paq_sweep(cfg)
        curve = {
            m: float(np.mean([x.normalized_error for x in records if x.m == m]))
            for m in (1, 2, 4, 8, 16, 32)
        }
        argmins[(N, d)] = min(curve, key=curve.get)
    agree = argmins[(20000, 50)] == argmins[(12000, 30)]
    monotone = argmins[(20000, 50)] <= argmins[(50000, 50)]
    detail = (
        f"argmin-m: (20000,50)->{argmins[(20000, 50)]}, "
        f"(12000,30)->{argmins[(12000, 30)]}, "
        f"(50000,50)->{argmins[(50000, 50)]}; elapsed {time.time() - t0:.0f}s"
    )
    _report(4, "averaging optimum", agree and monotone, detail)
    assert agree, f"argmin-m disagrees across the N/d=400 pairs: {argmins}"
    assert monotone, f"argmin-m at N/d=400 exceeds argmin-m at N/d=1000: {argmins}"


# ---------------------------------------------------------------------------
# 5. naive-estimator bias plateau
# ---------------------------------------------------------------------------


def _naive_error(N, trial):
    y, eta, d, r = 200.0, 200.0, 50, 9
    seed = derive_trial_seed(MASTER + 5, "naive", (N, trial))
    rng = np.random.default_rng(seed)
    metric = generate_metric_orthonormal(d, r, rng)
    noise = NoiseModel("uniform", eta, y)
    tau = choose_tau(metric.sigma_r, r, noise, N, 1, d)
    lam = choose_lambda(metric.sigma_r, r, noise, N, 1, d, tau, 0.1)
    responses = [paq_respond(metric, rng.standard_normal(d), noise, rng) for _ in range(N)]
    res = fit_paq_naive(responses, y, SolverConfig(lam=lam, max_iters=1500, rel_tol=1e-7))
    return normalized_error(res.estimate, metric)


def _pipeline_error(N, trial):
    y, eta, d, r = 200.0, 200.0, 50, 9
    seed = derive_trial_seed(MASTER + 5, "pipeline", (N, trial))
    rng = np.random.default_rng(seed)
    metric = generate_metric_orthonormal(d, r, rng)
    noise = NoiseModel("uniform", eta, y)
    m = choose_m(noise, N, d)
    tau = choose_tau(metric.sigma_r, r, noise, N, m, d)
    lam = choose_lambda(metric.sigma_r, r, noise, N // m, m, d, tau, 0.1)
    out = run_pipeline(metric, PipelineConfig(N=N, m=m, tau=tau, noise=noise), rng)
    res = fit_paq(out, y, SolverConfig(lam=lam, max_iters=1500, rel_tol=1e-7))
    return normalized_error(res.estimate, metric)


def test_criterion_05_naive_bias_plateau():
    t0 = time.time()
    trials = 10
    naive = {
        N: float(np.mean([_naive_error(N, t) for t in range(trials)]))
        for N in (25000, 50000)
    }
    pipe = {
        N: float(np.mean([_pipeline_error(N, t) for t in range(trials)]))
        for N in (25000, 50000)
    }
    naive_dec = 1.0 - naive[50000] / naive[25000]
    pipe_dec = 1.0 - pipe[50000] / pipe[25000]
    passed = naive_dec < 0.10 and pipe_dec > 0.25
    detail = (
        f"naive {naive[25000]:.3f}->{naive[50000]:.3f} ({naive_dec:+.1%}, need <10%); "
        f"pipeline {pipe[25000]:.3f}->{pipe[50000]:.3f} ({pipe_dec:+.1%}, need >25%); "
        f"elapsed {time.time() - t0:.0f}s"
    )
    _report(5, "naive-estimator bias plateau", passed, detail)
    assert naive_dec < 0.10, f"naive error decreased by {naive_dec:.1%} (not a plateau)"
    assert pipe_dec > 0.25, (
        f"averaged/truncated estimator decreased by only {pipe_dec:.1%} "
        f"over N=25000->50000"
    )


# ---------------------------------------------------------------------------
# 6. scale equivariance
# ---------------------------------------------------------------------------


def test_criterion_06_scale_equivariance():
    t0 = time.time()
    scenario = ScaleScenario(d=20, r=10, N=2000, y=10.0, eta_up=5.0, seed=MASTER + 6)
    devs = {c: scale_equivariance_check(scenario, c) for c in (0.01, 7.3)}
    exact = scale_equivariance_check(scenario, 1.0)
    passed = exact == 0.0 and all(v <= 1e-6 for v in devs.values())
    detail = (
        f"c=1: {exact:.1e}, c=0.01: {devs[0.01]:.2e}, c=7.3: {devs[7.3]:.2e} "
        f"(tolerance 1e-6); elapsed {time.time() - t0:.0f}s"
    )
    _report(6, "scale equivariance", passed, detail)
    assert exact == 0.0
    for c, dev in devs.items():
        assert dev <= 1e-6, f"scale deviation at c={c}: {dev:.3e}"


# ---------------------------------------------------------------------------
# 7. bias closed form
# ---------------------------------------------------------------------------


def test_criterion_07_bias_closed_form():
    t0 = time.time()
    d = 10
    eye = MetricMatrix(SymMatrix(np.eye(d)), d, np.ones(d))
    noise = NoiseModel("uniform", 12.0, 12.0)
    # closed form nu^2/(sigma d) * I = (48/10) I; Monte Carlo has a heavy
    # right tail, so one retry on a fresh stream is allowed
    report = None
    for attempt in (0, 1):
        rng = np.random.default_rng(derive_trial_seed(MASTER + 7, "bias", (attempt,)))
        report = bias_monte_carlo(eye, noise, 1_000_000, rng)
        if report.z_score <= 4.0:
            break
    np.testing.assert_allclose(report.target, 4.8 * np.eye(d))
    control = bias_monte_carlo(
        eye, NoiseModel("none", 0.0, 12.0), 1_000_000,
        np.random.default_rng(derive_trial_seed(MASTER + 7, "bias0", (0,))),
    )
    control_ok = control.z_score <= 3.0
    passed = report.z_score <= 4.0 and control_ok
    detail = (
        f"max |z| vs (nu^2/(sigma d)) I = 4.8 I: {report.z_score:.2f} (<=4); "
        f"zero-noise control z: {control.z_score:.2f} (<=3); "
        f"elapsed {time.time() - t0:.0f}s"
    )
    _report(7, "noise-sensing bias closed form", passed, detail)
    assert report.z_score <= 4.0
    assert control_ok


# ---------------------------------------------------------------------------
# 8. inverse-moment oracles
# ---------------------------------------------------------------------------


def test_criterion_08_moment_oracles():
    t0 = time.time()
    results = {}
    for p, target in ((1, 0.125), (4, 1.0 / 384.0)):
        for attempt in (0, 1):
            rng = np.random.default_rng(
                derive_trial_seed(MASTER + 8, f"moment{p}", (attempt,))
            )
            rep = inverse_moment_check(10, p, 1_000_000, rng)
            if abs(rep.z_score) <= 5.0:
                break
        assert rep.target == pytest.approx(target)
        results[p] = rep
    with pytest.raises(InvalidDim):
        inverse_moment_check(9, 4, 10_000, np.random.default_rng(0))
    passed = all(abs(r.z_score) <= 5.0 for r in results.values())
    detail = (
        f"E[1/q]: est={results[1].estimate:.5f} target=0.125 z={results[1].z_score:.2f}; "
        f"E[1/q^4]: est={results[4].estimate:.6f} target={1/384:.6f} "
        f"z={results[4].z_score:.2f}; d=9 p=4 rejected; elapsed {time.time() - t0:.0f}s"
    )
    _report(8, "inverse-moment oracles", passed, detail)
    for p, rep in results.items():
        assert abs(rep.z_score) <= 5.0, f"moment p={p} z-score {rep.z_score:.2f}"


# ---------------------------------------------------------------------------
# 9. solver oracle equivalence
# ---------------------------------------------------------------------------


def _normal_eq_solution(A, w, targets):
    n, d = A.shape
    idx = [(i, j) for i in range(d) for j in range(i, d)]
    X = np.empty((n, len(idx)))
    for k, (i, j) in enumerate(idx):
        col = A[:, i] * A[:, j]
        X[:, k] = w * (col if i == j else 2.0 * col)
    coef, *_ = np.linalg.lstsq(X, targets, rcond=None)
    S = np.zeros((d, d))
    for k, (i, j) in enumerate(idx):
        S[i, j] = S[j, i] = coef[k]
    return S


def test_criterion_09_solver_oracle_equivalence():
    t0 = time.time()
    noise = NoiseModel("none", 0.0, 10.0)
    worst = 0.0
    for s in range(50):
        rng = np.random.default_rng(derive_trial_seed(MASTER + 9, "oracle", (s,)))
        d = int(rng.integers(2, 6))
        metric = generate_metric_wishart(d, d, rng)
        out = run_pipeline(
            metric,
            PipelineConfig(N=3 * d * (d + 1) // 2, m=1, tau=1e15, noise=noise),
            rng,
        )
        res = fit_paq(out, 10.0, SolverConfig(lam=0.0))
        oracle = _normal_eq_solution(
            out.sensing_vectors, out.truncated_responses, np.full(out.n, 10.0)
        )
        worst = max(worst, float(np.linalg.norm(res.estimate.matrix.entries - oracle)))
    passed = worst <= 1e-6
    detail = f"worst Frobenius gap over 50 instances: {worst:.2e} (<=1e-6); " \
             f"elapsed {time.time() - t0:.0f}s"
    _report(9, "solver oracle equivalence", passed, detail)
    assert passed


# ---------------------------------------------------------------------------
# 10. pipeline property suite
# ---------------------------------------------------------------------------


def test_criterion_10_pipeline_properties():
    t0 = time.time()
    rng = np.random.default_rng(derive_trial_seed(MASTER + 10, "pipeline", (0,)))
    metrics = [
        generate_metric_orthonormal(int(rng.integers(2, 7)), int(rng.integers(1, 4)), rng)
        for _ in range(20)
    ]
    worst_identity = 0.0
    for k in range(10_000):
        metric = metrics[k % len(metrics)]
        y = float(rng.uniform(1.0, 50.0))
        eta = float(rng.uniform(0.0, y))
        m = int(rng.integers(1, 5))
        n = int(rng.integers(1, 7))
        tau = float(rng.uniform(0.05, 8.0))
        noise = NoiseModel("uniform" if eta > 0 else "none", eta, y)
        out = run_pipeline(
            metric, PipelineConfig(N=n * m, m=m, tau=tau, noise=noise), rng
        )
        # TP1-TP3, exactly
        assert np.all(out.truncated_responses <= tau)
        assert np.all(out.truncated_responses <= out.averaged_responses)
        clipped = out.averaged_responses - out.truncated_responses > 0
        assert np.all(out.averaged_responses[clipped] >= tau)
        # averaging identity: gbar * (a' Sigma a) == y + mean(eta).
        # The residual is measured relative to the boundary scale y: the
        # right side can cancel to ~0 when the noise sits at its lower
        # bound, where a ratio to it is meaningless.
        q = np.einsum(
            "ij,jk,ik->i",
            out.sensing_vectors,
            metric.matrix.entries,
            out.sensing_vectors,
        )
        rhs = y + out.mean_noise
        rel = np.abs(out.averaged_responses * q - rhs) / (y + rhs)
        worst_identity = max(worst_identity, float(rel.max()))
    assert worst_identity <= 1e-10

    noise = NoiseModel("uniform", 200.0, 200.0)
    m_hand = choose_m(noise, 20000, 50)
    tau_hand = choose_tau(50.0, 3, noise, 20000, 2, 50)
    hand_ok = m_hand == 2 and tau_hand == pytest.approx(
        400.0 / 150.0 * math.sqrt(200.0), rel=1e-12
    )
    assert tau_hand == pytest.approx(37.712, abs=5e-3)
    passed = hand_ok and worst_identity <= 1e-10
    detail = (
        f"TP1-TP3 exact on 10^4 outputs; averaging identity worst rel err "
        f"{worst_identity:.1e} (<=1e-10); m={m_hand} (=2), tau={tau_hand:.3f} "
        f"(=37.71); elapsed {time.time() - t0:.0f}s"
    )
    _report(10, "pipeline property suite", passed, detail)
    assert hand_ok
