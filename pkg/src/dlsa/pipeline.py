"""End-to-end orchestration: partition, fit workers, combine, shrink, report.

The worker-to-master boundary is real even in-process: every worker result is
serialized to its wire envelope, counted by an instrumented byte ledger, and
decoded on the master side before combining.  One envelope per partition is
the entire communication of the default path; the summary records the exact
byte count so the single-round contract is checkable from the outside.

All structured outputs are deterministic for a fixed config and seed: JSON is
written with sorted keys and no timestamps, and worker results are reduced in
partition order no matter how the pool schedules them.
"""

from __future__ import annotations

import json
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from .combine import CombinedFit, combine_wlse
from .envelope import SummaryEnvelope, decode_summary, encode_summary
from .exceptions import ConfigError, InputError
from .families import DataPartition, ModelFamily
from .fitting import fit_local
from .ingest import TableSchema, TabularData, ingest_csv
from .partition import partition_input
from .shrinkage import SelectionResult, dbic, lasso_path
from .simulate import (
    ScenarioSpec,
    SimulationReport,
    family_for,
    format_report,
    generate,
    report_to_dict,
    run_scenario,
)


@dataclass(frozen=True)
class CommLog:
    """What crossed the worker-to-master boundary."""

    rounds: int
    messages: int
    nbytes: int


@dataclass(frozen=True)
class RunConfig:
    """Everything one invocation needs.  ``mode`` picks the data source."""

    mode: str                            # "file" | "simulate" | "combine"
    out_dir: Path
    family: ModelFamily | None = None
    input_path: Path | None = None
    schema: TableSchema | None = None
    k: int | None = None
    strategy: str = "contiguous"
    scenario: ScenarioSpec | None = None
    summaries_dir: Path | None = None
    penalize: tuple | None = None        # feature names; default all but intercept
    shrink: bool = True
    jobs: int = 1
    seed: int = 0

    def __post_init__(self):
        if self.mode not in ("file", "simulate", "combine"):
            raise ConfigError(f"unknown mode {self.mode!r}")
        if self.mode == "file" and (self.input_path is None or self.schema is None
                                    or self.family is None or self.k is None):
            raise ConfigError("file mode needs input, schema, family and k")
        if self.mode == "simulate" and self.scenario is None:
            raise ConfigError("simulate mode needs a scenario")
        if self.mode == "combine" and self.summaries_dir is None:
            raise ConfigError("combine mode needs a summaries directory")
        if self.jobs < 1:
            raise ConfigError("jobs must be >= 1")


@dataclass(frozen=True, eq=False)
class PipelineResult:
    exit_code: int
    out_dir: Path
    artifacts: dict
    comm: CommLog
    fit: CombinedFit | None = None
    selection: SelectionResult | None = None
    report: SimulationReport | None = None


def _json_bytes(obj) -> bytes:
    return (json.dumps(obj, indent=2, sort_keys=True) + "\n").encode()


def fit_partitions(
    partitions: Sequence[DataPartition],
    family: ModelFamily,
    jobs: int = 1,
) -> tuple[list, CommLog, list[bytes]]:
    """Fit every partition in a bounded pool and ship one envelope each.

    Any partition failure aborts the whole run (dropping a worker would
    silently change the combination weights); the raised error names the
    partition.  Returns master-side summaries, the communication ledger and
    the raw envelopes in partition order.
    """

    def _one(part: DataPartition) -> bytes:
        return encode_summary(fit_local(family, part), family)

    if jobs == 1:
        blobs = [_one(part) for part in partitions]
    else:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            blobs = list(pool.map(_one, partitions))
    summaries = []
    for blob in blobs:
        summary, decoded_family = decode_summary(blob)
        if decoded_family != family:
            raise InputError("worker summary family does not match the run")
        summaries.append(summary)
    comm = CommLog(rounds=1, messages=len(blobs),
                   nbytes=sum(len(b) for b in blobs))
    return summaries, comm, blobs


def _penalized_indices(config: RunConfig, feature_names: Sequence[str]) -> tuple:
    if config.penalize is not None:
        unknown = [n for n in config.penalize if n not in feature_names]
        if unknown:
            raise ConfigError(f"penalize names not in features: {unknown}")
        return tuple(i for i, n in enumerate(feature_names)
                     if n in set(config.penalize))
    return tuple(i for i, n in enumerate(feature_names) if n != "intercept")


def _master_artifacts(
    fit: CombinedFit,
    family: ModelFamily,
    comm: CommLog,
    feature_names: Sequence[str] | None,
    shrink: bool,
    penalize: tuple | None,
) -> tuple[dict, SelectionResult | None]:
    q = fit.dim
    p = fit.theta_tilde.n_coef
    names = list(feature_names) if feature_names is not None \
        else [f"x{j + 1}" for j in range(p)]
    combined = {
        "family": family.kind,
        "num_cutpoints": family.num_cutpoints or 0,
        "n_total": fit.total_n,
        "k": fit.k,
        "q": q,
        "feature_names": names,
        "theta_tilde": fit.theta_tilde.coefficients.tolist(),
        "cutpoints": None if fit.theta_tilde.cutpoints is None
        else fit.theta_tilde.cutpoints.tolist(),
        "precision": fit.precision.tolist(),
        "communication": {"rounds": comm.rounds, "messages": comm.messages,
                          "bytes": comm.nbytes},
    }
    artifacts = {"combined_fit.json": _json_bytes(combined)}

    selection = None
    if shrink:
        path = lasso_path(fit, penalize)
        selection = dbic(path, fit)
        artifacts["path.json"] = _json_bytes({
            "knots": path.knots.tolist(),
            "coefficients": path.coefficients_at_knots.tolist(),
            "active_sets": [[j + 1 for j in s] for s in path.active_sets],
            "df": path.df_at_knots.tolist(),
            "weights": [None if np.isinf(w) else w for w in path.weights.tolist()],
            "dbic": selection.dbic_values.tolist(),
        })
        artifacts["selection.json"] = _json_bytes({
            "support": [j + 1 for j in selection.support],
            "support_names": [names[j] for j in selection.support],
            "theta_selected": selection.theta_selected.tolist(),
            "cutpoints": None if selection.params_selected.cutpoints is None
            else selection.params_selected.cutpoints.tolist(),
            "chosen_lambda0": selection.chosen_lambda0,
            "dbic_min": selection.dbic_min,
        })

    lines = [
        f"family: {family.kind}",
        f"rows: {fit.total_n}   workers: {fit.k}   parameters: {q}",
        f"communication: {comm.rounds} round(s), {comm.messages} message(s), "
        f"{comm.nbytes} bytes",
        "",
        "combined estimate:",
    ]
    for name, value in zip(names, fit.theta_tilde.coefficients):
        lines.append(f"  {name:<24}{value: .6f}")
    if fit.theta_tilde.cutpoints is not None:
        for i, value in enumerate(fit.theta_tilde.cutpoints):
            lines.append(f"  cutpoint_{i + 1:<15}{value: .6f}")
    if selection is not None:
        lines += ["", f"selected support ({len(selection.support)} of {p}):"]
        for j in selection.support:
            lines.append(f"  {names[j]:<24}{selection.theta_selected[j]: .6f}")
    artifacts["summary.txt"] = ("\n".join(lines) + "\n").encode()
    return artifacts, selection


def _write(out_dir: Path, artifacts: dict, envelopes: list[bytes] | None,
           partition_ids: list[int] | None) -> dict:
    out_dir.mkdir(parents=True, exist_ok=True)
    paths = {}
    for name, blob in artifacts.items():
        target = out_dir / name
        target.write_bytes(blob)
        paths[name] = target
    if envelopes is not None:
        env_dir = out_dir / "envelopes"
        env_dir.mkdir(exist_ok=True)
        for pid, blob in zip(partition_ids, envelopes):
            target = env_dir / f"partition_{pid:05d}.envelope"
            target.write_bytes(blob)
            paths[f"envelopes/{target.name}"] = target
    return paths


def _run_file(config: RunConfig) -> PipelineResult:
    schema = config.schema
    family = config.family
    expected = {"cox": "survival", "ordered-probit": "ordinal"}.get(
        family.kind, "plain")
    if schema.response_kind != expected:
        raise ConfigError(
            f"schema response kind {schema.response_kind!r} does not fit "
            f"family {family.kind!r}")
    if family.kind == "ordered-probit" and \
            schema.num_cutpoints != family.num_cutpoints:
        raise ConfigError("schema ordinal levels do not match the family")
    data = ingest_csv(config.input_path, schema)
    partitions = partition_input(data, config.k, config.strategy,
                                 seed=config.seed)
    summaries, comm, blobs = fit_partitions(partitions, family, config.jobs)
    fit = combine_wlse(summaries)
    penalize = _penalized_indices(config, data.feature_names)
    artifacts, selection = _master_artifacts(
        fit, family, comm, data.feature_names, config.shrink, penalize)
    paths = _write(config.out_dir, artifacts, blobs,
                   [p.partition_id for p in partitions])
    return PipelineResult(0, config.out_dir, paths, comm, fit=fit,
                          selection=selection)


def _run_simulate(config: RunConfig) -> PipelineResult:
    spec = config.scenario
    report = run_scenario(spec, jobs=config.jobs)
    artifacts = {
        "report.json": _json_bytes(report_to_dict(report)),
        "report.txt": format_report(report).encode(),
    }
    # drill-down artifacts for the first replication, through the same
    # envelope-counted path as a file run
    family = family_for(spec.example)
    partitions, _ = generate(spec, 0)
    summaries, comm, blobs = fit_partitions(partitions, family, config.jobs)
    fit = combine_wlse(summaries)
    master, selection = _master_artifacts(fit, family, comm, None,
                                          config.shrink, None)
    artifacts.update(master)
    paths = _write(config.out_dir, artifacts, blobs,
                   [p.partition_id for p in partitions])
    return PipelineResult(0, config.out_dir, paths, comm, fit=fit,
                          selection=selection, report=report)


def _run_combine(config: RunConfig) -> PipelineResult:
    files = sorted(Path(config.summaries_dir).glob("*.envelope"))
    if not files:
        raise InputError(f"no .envelope files in {config.summaries_dir}")
    summaries = []
    family = None
    nbytes = 0
    for f in files:
        blob = f.read_bytes()
        nbytes += len(blob)
        summary, fam = decode_summary(blob)
        if family is None:
            family = fam
        elif fam != family:
            raise InputError(f"{f.name}: family {fam.kind} does not match "
                             f"{family.kind}")
        summaries.append(summary)
    comm = CommLog(rounds=1, messages=len(files), nbytes=nbytes)
    fit = combine_wlse(summaries)
    artifacts, selection = _master_artifacts(fit, family, comm, None,
                                             config.shrink, None)
    paths = _write(config.out_dir, artifacts, None, None)
    return PipelineResult(0, config.out_dir, paths, comm, fit=fit,
                          selection=selection)


def run_pipeline(config: RunConfig) -> PipelineResult:
    """Run one configured invocation and write its artifacts.

    Artifacts are only written after every compute stage has succeeded, so a
    failed run leaves no partial outputs behind.
    """
    if config.mode == "file":
        return _run_file(config)
    if config.mode == "simulate":
        return _run_simulate(config)
    return _run_combine(config)
