"""Experiment orchestration: seeded sweeps, trial records, CSV and SVG
emission.

Two experiment families exist. The query comparison runs noiseless
pairwise/triplet/ranking/slider queries on a Wishart-normalized metric and
reports unit-Frobenius-normalized errors. The parameter sweeps run the full
averaging/truncation pipeline on orthonormal-factor metrics with all
parameters set by the theory-driven policies, and report unnormalized
errors. Every trial derives its own 64-bit seed from the master seed and
its coordinates, so records are individually replayable.
"""

from __future__ import annotations

import json
import math
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .diagnostics import (
    ScaleScenario,
    bias_monte_carlo,
    inverse_moment_check,
    scale_equivariance_check,
    truncation_audit,
)
from .errors import ConfigError, ZeroMatrix
from .estimators import (
    SolverConfig,
    fit_paq,
    fit_paq_direct,
    fit_pairwise,
    fit_ranking,
    fit_triplet,
    hinge_config,
    normalize_unit_fro,
)
from .linalg import (
    MetricMatrix,
    SymMatrix,
    generate_metric_orthonormal,
    generate_metric_wishart,
    normalized_error,
)
from .oracles import (
    NoiseModel,
    pairwise_oracle,
    paq_respond,
    ranking_oracle,
    triplet_oracle,
)
from .pipeline import PipelineConfig, choose_lambda, choose_m, choose_tau, run_pipeline
from .plotting import mean_sem, render_series_svg
from .seeding import derive_trial_seed

EXPERIMENTS = (
    "compare_queries",
    "sweep_d",
    "sweep_r",
    "sweep_m",
    "diagnostics",
    "scale_check",
)

QUERY_TYPES = ("pairwise", "triplet", "ranking-8", "ranking-16", "paq")

CSV_HEADER = (
    "experiment,query_type,N,d,r,m,tau,lambda,trial,seed,"
    "normalized_error,wall_time_s,truncation_hits"
)

# Solver budgets: sweeps tolerate a looser stop than unit tests since the
# statistical error dwarfs 1e-7 relative objective noise.
SWEEP_SOLVER = dict(max_iters=1500, rel_tol=1e-7)
COMPARE_SOLVER = dict(max_iters=2000, rel_tol=1e-8)


@dataclass(frozen=True)
class ExperimentConfig:
    """Validated experiment description (mirrors the JSON config schema).

    lambda_scale is the absolute regularization weight for the query
    comparison, and the constant factor multiplying the policy expression
    for the sweeps.
    """

    experiment: str
    grid_N: tuple
    grid_d: tuple
    grid_r: tuple
    grid_m: tuple = ()
    y: float = 10.0
    eta_up: float = 0.0
    trials: int = 10
    master_seed: int = 0
    lambda_scale: float = 0.05
    output_dir: str = "out"

    def __post_init__(self):
        if self.experiment not in EXPERIMENTS:
            raise ConfigError(f"unknown experiment {self.experiment!r}")
        if self.trials < 1:
            raise ConfigError("trials must be >= 1")
        if not self.y > 0:
            raise ConfigError("y must be positive")
        if not 0 <= self.eta_up <= self.y:
            raise ConfigError("need 0 <= eta_up <= y")
        for name in ("grid_N", "grid_d", "grid_r", "grid_m"):
            vals = getattr(self, name)
            object.__setattr__(self, name, tuple(int(v) for v in vals))
            if any(v < 1 for v in getattr(self, name)):
                raise ConfigError(f"{name} values must be >= 1")
        for name in ("grid_N", "grid_d", "grid_r"):
            if not getattr(self, name):
                raise ConfigError(f"{name} must be nonempty")

    @property
    def noise(self):
        kind = "uniform" if self.eta_up > 0 else "none"
        return NoiseModel(kind, self.eta_up, self.y)


_TOP_KEYS = {
    "experiment",
    "grid",
    "y",
    "eta_up",
    "trials",
    "master_seed",
    "lambda_scale",
    "output_dir",
}
_GRID_KEYS = {"N", "d", "r", "m"}


def config_from_dict(doc) -> ExperimentConfig:
    """Parse a JSON config document; unknown keys are an error."""
    if not isinstance(doc, dict):
        raise ConfigError("config must be a JSON object")
    unknown = set(doc) - _TOP_KEYS
    if unknown:
        raise ConfigError(f"unknown config keys: {sorted(unknown)}")
    grid = doc.get("grid", {})
    if not isinstance(grid, dict):
        raise ConfigError("grid must be an object")
    unknown = set(grid) - _GRID_KEYS
    if unknown:
        raise ConfigError(f"unknown grid keys: {sorted(unknown)}")
    missing = [k for k in ("experiment", "grid") if k not in doc]
    if missing:
        raise ConfigError(f"missing config keys: {missing}")
    try:
        return ExperimentConfig(
            experiment=doc["experiment"],
            grid_N=grid.get("N", ()),
            grid_d=grid.get("d", ()),
            grid_r=grid.get("r", ()),
            grid_m=grid.get("m", ()),
            y=float(doc.get("y", 10.0)),
            eta_up=float(doc.get("eta_up", 0.0)),
            trials=int(doc.get("trials", 10)),
            master_seed=int(doc.get("master_seed", 0)),
            lambda_scale=float(doc.get("lambda_scale", 0.05)),
            output_dir=str(doc.get("output_dir", "out")),
        )
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"malformed config value: {exc}") from exc


def load_config(path) -> ExperimentConfig:
    try:
        doc = json.loads(Path(path).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    return config_from_dict(doc)


@dataclass(frozen=True)
class TrialRecord:
    """One experiment outcome; seed recorded verbatim for replay."""

    experiment: str
    query_type: str
    N: int
    d: int
    r: int
    m: int
    tau: float
    lam: float
    trial: int
    seed: int
    normalized_error: float
    wall_time_s: float
    truncation_hits: int

    def sort_key(self):
        return (
            self.experiment,
            self.query_type,
            self.N,
            self.d,
            self.r,
            self.m,
            self.tau,
            self.lam,
            self.trial,
            self.seed,
        )


def _fmt_float(x):
    return f"{x:.10g}"


def emit_csv(records, path):
    """Write records (sorted by all key columns) with the fixed header."""
    if not records:
        raise ConfigError("refusing to write an empty CSV")
    rows = [CSV_HEADER]
    for rec in sorted(records, key=TrialRecord.sort_key):
        rows.append(
            ",".join(
                [
                    rec.experiment,
                    rec.query_type,
                    str(rec.N),
                    str(rec.d),
                    str(rec.r),
                    str(rec.m),
                    _fmt_float(rec.tau),
                    _fmt_float(rec.lam),
                    str(rec.trial),
                    str(rec.seed),
                    _fmt_float(rec.normalized_error),
                    _fmt_float(rec.wall_time_s),
                    str(rec.truncation_hits),
                ]
            )
        )
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text("\n".join(rows) + "\n")
    return path


_PLOT_SPEC = {
    "compare_queries": ("query responses N", lambda r: r.query_type, lambda r: r.N),
    "sweep_d": ("N / d", lambda r: f"d={r.d}", lambda r: r.N / r.d),
    "sweep_r": ("measurements N", lambda r: f"r={r.r}", lambda r: r.N),
    "sweep_m": ("averaging m", lambda r: f"N={r.N}, d={r.d}", lambda r: r.m),
}


def aggregate_records(records, series_of, x_of):
    """Group records into [(label, [(x, mean, sem), ...])] sorted stably."""
    groups = {}
    for rec in sorted(records, key=TrialRecord.sort_key):
        groups.setdefault(series_of(rec), {}).setdefault(x_of(rec), []).append(
            rec.normalized_error
        )
    series = []
    for label in sorted(groups, key=str):
        pts = [
            (x, *mean_sem(vals)) for x, vals in sorted(groups[label].items())
        ]
        series.append((str(label), pts))
    return series


def emit_plot(records, path):
    """Render the records' mean-error curves with +/- 1 SEM bands."""
    if not records:
        raise ConfigError("refusing to plot an empty record list")
    exp = records[0].experiment
    x_label, series_of, x_of = _PLOT_SPEC.get(exp, _PLOT_SPEC["compare_queries"])
    series = aggregate_records(records, series_of, x_of)
    svg = render_series_svg(series, x_label, "normalized error", title=exp)
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(svg)
    return path


def _run_jobs(jobs, worker, threads):
    if threads and threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            return list(pool.map(worker, jobs))
    return [worker(job) for job in jobs]


# ---------------------------------------------------------------------------
# query-type comparison (noiseless)
# ---------------------------------------------------------------------------


def _normalized_compare_error(result, metric):
    try:
        est = normalize_unit_fro(result.estimate)
    except ZeroMatrix:
        # a zero estimate carries no direction; score it as total error
        return 1.0
    return normalized_error(est, normalize_unit_fro(metric))


def _compare_trial(cfg: ExperimentConfig, query_type, N, trial):
    d, r = cfg.grid_d[0], cfg.grid_r[0]
    y = cfg.y
    metric_seed = derive_trial_seed(cfg.master_seed, cfg.experiment, ("metric", trial))
    metric = generate_metric_wishart(d, r, np.random.default_rng(metric_seed))
    seed = derive_trial_seed(cfg.master_seed, cfg.experiment, (query_type, N, trial))
    rng = np.random.default_rng(seed)
    lam = cfg.lambda_scale
    t0 = time.perf_counter()

    if query_type == "pairwise":
        outs = [
            pairwise_oracle(metric, rng.standard_normal(d), rng.standard_normal(d), y)
            for _ in range(N)
        ]
        res = fit_pairwise(outs, y, hinge_config(lam))
    elif query_type == "triplet":
        outs = [
            triplet_oracle(
                metric,
                rng.standard_normal(d),
                rng.standard_normal(d),
                rng.standard_normal(d),
            )
            for _ in range(N)
        ]
        res = fit_triplet(outs, hinge_config(lam))
    elif query_type.startswith("ranking-"):
        k = int(query_type.split("-", 1)[1])
        queries = []
        for _ in range(N):
            x0 = rng.standard_normal(d)
            items = rng.standard_normal((k, d))
            queries.append((x0, items, ranking_oracle(metric, x0, items)))
        res = fit_ranking(queries, hinge_config(lam))
    elif query_type == "paq":
        noise = NoiseModel("none", 0.0, y)
        responses = [
            paq_respond(metric, rng.standard_normal(d), noise, rng) for _ in range(N)
        ]
        res = fit_paq_direct(responses, y, SolverConfig(lam=lam, **COMPARE_SOLVER))
    else:
        raise ConfigError(f"unknown query type {query_type!r}")

    err = _normalized_compare_error(res, metric)
    return TrialRecord(
        experiment=cfg.experiment,
        query_type=query_type,
        N=N,
        d=d,
        r=r,
        m=1,
        tau=math.inf,
        lam=lam,
        trial=trial,
        seed=seed,
        normalized_error=err,
        wall_time_s=time.perf_counter() - t0,
        truncation_hits=0,
    )


def run_compare_queries(cfg: ExperimentConfig, threads=1, query_types=QUERY_TYPES):
    """Noiseless query-efficiency comparison across query types."""
    if cfg.experiment != "compare_queries":
        raise ConfigError("config experiment must be compare_queries")
    if cfg.eta_up != 0:
        raise ConfigError("the query comparison is noiseless; set eta_up = 0")
    jobs = [
        (qt, N, trial)
        for qt in query_types
        for N in cfg.grid_N
        for trial in range(cfg.trials)
    ]
    return _run_jobs(jobs, lambda j: _compare_trial(cfg, *j), threads)


# ---------------------------------------------------------------------------
# pipeline parameter sweeps
# ---------------------------------------------------------------------------


def _sweep_trial(cfg: ExperimentConfig, N, d, r, m_spec, trial):
    seed = derive_trial_seed(
        cfg.master_seed, cfg.experiment, (N, d, r, m_spec or 0, trial)
    )
    rng = np.random.default_rng(seed)
    metric = generate_metric_orthonormal(d, r, rng)
    noise = cfg.noise
    m = m_spec if m_spec else choose_m(noise, N, d)
    tau = choose_tau(metric.sigma_r, r, noise, N, m, d)
    lam = choose_lambda(
        metric.sigma_r, r, noise, N // m, m, d, tau, cfg.lambda_scale
    )
    t0 = time.perf_counter()
    out = run_pipeline(metric, PipelineConfig(N=N, m=m, tau=tau, noise=noise), rng)
    res = fit_paq(out, cfg.y, SolverConfig(lam=lam, **SWEEP_SOLVER))
    err = normalized_error(res.estimate, metric)
    return TrialRecord(
        experiment=cfg.experiment,
        query_type="paq",
        N=N,
        d=d,
        r=r,
        m=m,
        tau=tau,
        lam=lam,
        trial=trial,
        seed=seed,
        normalized_error=err,
        wall_time_s=time.perf_counter() - t0,
        truncation_hits=out.truncation_hits,
    )


def run_paq_sweep(cfg: ExperimentConfig, threads=1):
    """Full factorial sweep over the config grid with policy parameters."""
    if cfg.experiment not in ("sweep_d", "sweep_r", "sweep_m"):
        raise ConfigError("config experiment must be one of the sweeps")
    m_values = cfg.grid_m if cfg.grid_m else (0,)
    jobs = [
        (N, d, r, m, trial)
        for N in cfg.grid_N
        for d in cfg.grid_d
        for r in cfg.grid_r
        for m in m_values
        for trial in range(cfg.trials)
        if r <= d
    ]
    return _run_jobs(jobs, lambda j: _sweep_trial(cfg, *j), threads)


def replay_trial(cfg: ExperimentConfig, record: TrialRecord) -> TrialRecord:
    """Re-run one record from its coordinates; bitwise-identical output."""
    if record.experiment == "compare_queries":
        return _compare_trial(cfg, record.query_type, record.N, record.trial)
    m_spec = record.m if cfg.grid_m else 0
    return _sweep_trial(cfg, record.N, record.d, record.r, m_spec, record.trial)


# ---------------------------------------------------------------------------
# diagnostics and the scale check
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class CheckRow:
    """One diagnostics or scale-check result for the report CSV."""

    check: str
    value: float
    target: float
    z_score: float
    n_samples: int
    passed: bool


def _check_csv(rows, path):
    lines = ["check,value,target,z_score,n_samples,passed"]
    for row in rows:
        lines.append(
            ",".join(
                [
                    row.check,
                    _fmt_float(row.value),
                    _fmt_float(row.target),
                    _fmt_float(row.z_score),
                    str(row.n_samples),
                    str(int(row.passed)),
                ]
            )
        )
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text("\n".join(lines) + "\n")
    return path


def _with_rerun(make_report, seeds, bound):
    """Run a z-scored check, retrying once on failure (heavy-tailed
    integrands make a single Monte Carlo pass occasionally exceed the
    bound); the second verdict is final."""
    report = make_report(seeds[0])
    if abs(report.z_score) <= bound:
        return report, True
    report = make_report(seeds[1])
    return report, abs(report.z_score) <= bound


def run_diagnostics(cfg: ExperimentConfig, threads=1):
    """Bias and moment Monte Carlo checks plus a truncation audit."""
    if cfg.experiment != "diagnostics":
        raise ConfigError("config experiment must be diagnostics")
    d = cfg.grid_d[0]
    samples = cfg.grid_N[0]
    rows = []

    def seeds_for(name):
        return [
            derive_trial_seed(cfg.master_seed, "diagnostics", (name, attempt))
            for attempt in (0, 1)
        ]

    eye = MetricMatrix(SymMatrix(np.eye(d)), d, np.ones(d))
    report, ok = _with_rerun(
        lambda s: bias_monte_carlo(
            eye, cfg.noise, samples, np.random.default_rng(s)
        ),
        seeds_for("bias"),
        bound=4.0,
    )
    rows.append(
        CheckRow(
            "bias_diagonal_mean",
            float(np.mean(np.diagonal(report.estimate))),
            float(np.mean(np.diagonal(report.target))),
            report.z_score,
            report.n_samples,
            ok,
        )
    )

    powers = (1, 4) if d >= 10 else (1,)
    for p in powers:
        report, ok = _with_rerun(
            lambda s: inverse_moment_check(d, p, samples, np.random.default_rng(s)),
            seeds_for(f"moment_p{p}"),
            bound=5.0,
        )
        rows.append(
            CheckRow(
                f"inverse_moment_p{p}",
                report.estimate,
                report.target,
                report.z_score,
                report.n_samples,
                ok,
            )
        )

    r = cfg.grid_r[0]
    N = min(cfg.grid_N[0], 20000)
    rng = np.random.default_rng(seeds_for("audit")[0])
    metric = generate_metric_orthonormal(d, r, rng)
    m = choose_m(cfg.noise, N, d)
    tau = choose_tau(metric.sigma_r, r, cfg.noise, N, m, d)
    out = run_pipeline(
        metric, PipelineConfig(N=N, m=m, tau=tau, noise=cfg.noise), rng
    )
    audit = truncation_audit(out)
    rows.append(
        CheckRow("truncation_hit_rate", audit.hit_rate, 0.0, 0.0, audit.n, True)
    )
    return rows


SCALE_FACTORS = (0.01, 1.0, 7.3)
SCALE_TOLERANCE = 1e-6


def run_scale_check(cfg: ExperimentConfig, threads=1):
    """Duplicated-randomness scale equivariance at the standard factors."""
    if cfg.experiment != "scale_check":
        raise ConfigError("config experiment must be scale_check")
    scenario = ScaleScenario(
        d=cfg.grid_d[0],
        r=cfg.grid_r[0],
        N=cfg.grid_N[0],
        y=cfg.y,
        eta_up=cfg.eta_up,
        seed=derive_trial_seed(cfg.master_seed, "scale_check", (0,)),
        c1_scale=cfg.lambda_scale,
    )
    rows = []
    for c in SCALE_FACTORS:
        dev = scale_equivariance_check(scenario, c)
        rows.append(
            CheckRow(
                f"scale_deviation_c={c:g}", dev, 0.0, 0.0, 1, dev <= SCALE_TOLERANCE
            )
        )
    return rows


def run_experiment(cfg: ExperimentConfig, threads=1):
    """Dispatch on the experiment type; write CSV (and SVG) outputs.

    Returns (records_or_rows, list of written paths, all_passed).
    """
    out_dir = Path(cfg.output_dir)
    if cfg.experiment == "compare_queries":
        records = run_compare_queries(cfg, threads)
    elif cfg.experiment in ("sweep_d", "sweep_r", "sweep_m"):
        records = run_paq_sweep(cfg, threads)
    elif cfg.experiment == "diagnostics":
        rows = run_diagnostics(cfg, threads)
        path = _check_csv(rows, out_dir / "diagnostics.csv")
        return rows, [path], all(r.passed for r in rows)
    else:
        rows = run_scale_check(cfg, threads)
        path = _check_csv(rows, out_dir / "scale_check.csv")
        return rows, [path], all(r.passed for r in rows)

    csv_path = emit_csv(records, out_dir / f"{cfg.experiment}.csv")
    svg_path = emit_plot(records, out_dir / f"{cfg.experiment}.svg")
    return records, [csv_path, svg_path], True
