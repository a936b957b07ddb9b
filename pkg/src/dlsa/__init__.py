"""One-round distributed regression.

Workers fit a loss family locally and ship a single summary (estimate plus
scaled inverse covariance) to the master, which combines them into a
precision-weighted estimate, runs an exact adaptive-lasso path, and selects a
support by a BIC-type criterion.
"""

from .combine import CombinedFit, combine_csl, combine_one_shot, combine_wlse
from .envelope import SummaryEnvelope, decode_summary, encode_summary, envelope_nbytes
from .exceptions import (
    ChecksumMismatch,
    ConfigError,
    DimensionMismatch,
    DlsaError,
    InputError,
    NonConvergence,
    NonPositiveDefinite,
    ScenarioAborted,
    SingularHessian,
    TooFewRows,
)
from .families import (
    DataPartition,
    LocalSummary,
    ModelFamily,
    ParamVector,
    gradient,
    hessian,
    loss,
)
from .fitting import fit_local, fit_pooled
from .ingest import TableSchema, TabularData, ingest_csv
from .partition import partition_input
from .pipeline import CommLog, PipelineResult, RunConfig, run_pipeline
from .shrinkage import LassoPath, SelectionResult, dbic, lasso_path, refit_on_support
from .simulate import (
    ScenarioSpec,
    SimulationReport,
    TrueParams,
    format_report,
    generate,
    metrics,
    run_scenario,
    true_params,
)

__version__ = "0.1.0"

__all__ = [
    "ChecksumMismatch", "CombinedFit", "CommLog", "ConfigError",
    "DataPartition", "DimensionMismatch", "DlsaError", "InputError",
    "LassoPath", "LocalSummary", "ModelFamily", "NonConvergence",
    "NonPositiveDefinite", "ParamVector", "PipelineResult", "RunConfig",
    "ScenarioAborted", "ScenarioSpec", "SelectionResult", "SimulationReport",
    "SingularHessian", "SummaryEnvelope", "TableSchema", "TabularData",
    "TooFewRows", "TrueParams", "combine_csl", "combine_one_shot",
    "combine_wlse", "dbic", "decode_summary", "encode_summary",
    "envelope_nbytes", "fit_local", "fit_pooled", "format_report", "generate",
    "gradient", "hessian", "ingest_csv", "lasso_path", "loss", "metrics",
    "partition_input", "refit_on_support", "run_pipeline", "run_scenario",
    "true_params",
]
