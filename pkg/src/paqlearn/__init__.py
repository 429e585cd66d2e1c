"""Learning a low-rank Mahalanobis metric from perceptual adjustment
(slider) queries: simulated respondents, the averaging/truncation
measurement pipeline, trace-regularized PSD estimators, ordinal-query
baselines, Monte Carlo diagnostics, and an experiment harness."""

from .diagnostics import (
    MonteCarloReport,
    ScaleScenario,
    TruncationAudit,
    bias_monte_carlo,
    inverse_moment_check,
    scale_equivariance_check,
    truncation_audit,
)
from .errors import (
    BudgetTooSmall,
    ConfigError,
    DegenerateDirection,
    DimMismatch,
    InvalidDim,
    InvalidRank,
    NoProgress,
    NonFinite,
    NotPositiveSemidefinite,
    PaqLearnError,
    PreconditionViolated,
    PropertyViolated,
    ZeroMatrix,
    ZeroResponse,
)
from .estimators import (
    SolveResult,
    SolverConfig,
    fit_pairwise,
    fit_paq,
    fit_paq_direct,
    fit_paq_naive,
    fit_ranking,
    fit_triplet,
    hinge_config,
    normalize_unit_fro,
)
from .harness import (
    ExperimentConfig,
    TrialRecord,
    config_from_dict,
    emit_csv,
    emit_plot,
    load_config,
    replay_trial,
    run_compare_queries,
    run_diagnostics,
    run_experiment,
    run_paq_sweep,
    run_scale_check,
)
from .linalg import (
    MetricMatrix,
    Spectrum,
    SymMatrix,
    generate_metric_orthonormal,
    generate_metric_wishart,
    mahalanobis_sq,
    normalized_error,
    project_psd,
    prox_trace_psd,
    sym_eigendecompose,
)
from .oracles import (
    NoiseModel,
    OrdinalOutcome,
    PaqResponse,
    build_inverted_sensing,
    decompose_ranking,
    pairwise_oracle,
    paq_respond,
    ranking_oracle,
    sample_query_vector,
    triplet_oracle,
)
from .pipeline import (
    PipelineConfig,
    PipelineOutput,
    RegimeReport,
    choose_lambda,
    choose_m,
    choose_tau,
    classify_regime,
    run_pipeline,
)
from .seeding import derive_trial_seed

__version__ = "0.1.0"
