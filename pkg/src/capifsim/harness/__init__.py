from .breakdown import IncompleteTrace, RunBreakdown, TransactionSample, breakdown_run
from .experiment import (
    ExperimentResult,
    ExperimentSpec,
    RunFailed,
    RunOutcome,
    execute_run,
    run_experiment,
    run_experiment_detailed,
)
from .predictor import predict_breakdown, predict_run, predicted_category_us, transaction_latency_us
from .report import (
    BreakdownReport,
    ComparisonRow,
    MismatchedTopology,
    TransactionStat,
    aggregate,
    compare,
    comparison_json,
    compute_breakdown,
)

__all__ = [
    "BreakdownReport",
    "ComparisonRow",
    "ExperimentResult",
    "ExperimentSpec",
    "IncompleteTrace",
    "MismatchedTopology",
    "RunBreakdown",
    "RunFailed",
    "RunOutcome",
    "TransactionSample",
    "TransactionStat",
    "aggregate",
    "breakdown_run",
    "compare",
    "comparison_json",
    "compute_breakdown",
    "execute_run",
    "predict_breakdown",
    "predict_run",
    "predicted_category_us",
    "run_experiment",
    "run_experiment_detailed",
    "transaction_latency_us",
]
