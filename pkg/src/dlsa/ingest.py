"""CSV ingestion: column roles, dummy coding, and standardization.

A schema maps each CSV column to a role: ``response`` (plain numeric
response), ``ordinal`` (integer levels ``1..L``; supplies the response for
ordered-probit fits), ``survival-time`` and ``event`` (the two cox response
columns), ``numeric``, ``categorical``, ``partition-key`` (kept out of the
design matrix, available to group rows into workers) or ``ignore``.

Categorical columns expand to one dummy per non-baseline level with the most
frequent level as the baseline.  Numeric columns are optionally standardized
to mean zero and (population) variance one.  Parsing is strict and fail-fast:
the first malformed cell aborts with its 1-based line number.
"""

from __future__ import annotations

import json
import re
import warnings
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import pandas as pd

from .exceptions import ConfigError, InputError

ROLES = ("response", "numeric", "categorical", "survival-time", "event",
         "ordinal", "partition-key", "ignore")


@dataclass(frozen=True)
class ColumnSpec:
    role: str
    levels: tuple | None = None   # declared categorical levels or ordinal count

    def __post_init__(self):
        if self.role not in ROLES:
            raise ConfigError(f"unknown column role {self.role!r}")
        if self.role == "ordinal":
            if not isinstance(self.levels, int) or self.levels < 2:
                raise ConfigError("ordinal columns need integer levels >= 2")
        elif self.role == "categorical":
            if self.levels is not None:
                object.__setattr__(self, "levels", tuple(str(v) for v in self.levels))
        elif self.levels is not None:
            raise ConfigError(f"levels not valid for role {self.role!r}")


@dataclass(frozen=True)
class TableSchema:
    columns: dict
    standardize: bool = False
    intercept: bool = False
    unknown_levels: str = "strict"

    def __post_init__(self):
        if self.unknown_levels not in ("strict", "lenient"):
            raise ConfigError("unknown_levels must be 'strict' or 'lenient'")
        cols = {}
        for name, spec in self.columns.items():
            if isinstance(spec, ColumnSpec):
                cols[name] = spec
            elif isinstance(spec, str):
                cols[name] = ColumnSpec(role=spec)
            elif isinstance(spec, dict):
                cols[name] = ColumnSpec(role=spec.get("role", ""),
                                        levels=_levels_from_json(spec))
            else:
                raise ConfigError(f"bad column spec for {name!r}")
        object.__setattr__(self, "columns", cols)
        roles = [c.role for c in cols.values()]
        plain = roles.count("response") + roles.count("ordinal")
        survival = roles.count("survival-time")
        event = roles.count("event")
        if survival != event or survival > 1:
            raise ConfigError("survival-time and event must appear exactly once each")
        if plain + survival != 1:
            raise ConfigError("schema must declare exactly one response")

    @classmethod
    def from_json(cls, source: str | Path | dict) -> "TableSchema":
        if isinstance(source, dict):
            raw = source
        else:
            try:
                raw = json.loads(Path(source).read_text())
            except FileNotFoundError:
                raise InputError(f"schema file not found: {source}")
            except json.JSONDecodeError as exc:
                raise ConfigError(f"schema is not valid JSON: {exc}")
        if "columns" not in raw:
            raise ConfigError("schema must have a 'columns' mapping")
        return cls(
            columns=raw["columns"],
            standardize=bool(raw.get("standardize", False)),
            intercept=bool(raw.get("intercept", False)),
            unknown_levels=raw.get("unknown_levels", "strict"),
        )

    @property
    def response_kind(self) -> str:
        roles = {c.role for c in self.columns.values()}
        if "survival-time" in roles:
            return "survival"
        if "ordinal" in roles:
            return "ordinal"
        return "plain"

    @property
    def num_cutpoints(self) -> int:
        for spec in self.columns.values():
            if spec.role == "ordinal":
                return spec.levels - 1
        return 0


def _levels_from_json(spec: dict) -> tuple | int | None:
    levels = spec.get("levels")
    if levels is None:
        return None
    if spec.get("role") == "ordinal":
        return int(levels)
    return tuple(levels)


@dataclass(frozen=True, eq=False)
class TabularData:
    """Design matrix plus response, ready to partition."""

    covariates: np.ndarray
    response: np.ndarray
    feature_names: tuple
    keys: dict = field(default_factory=dict)
    num_cutpoints: int = 0

    @property
    def n(self) -> int:
        return self.covariates.shape[0]

    @property
    def n_features(self) -> int:
        return self.covariates.shape[1]

    @property
    def q(self) -> int:
        return self.n_features + self.num_cutpoints


def _first_bad_line(series: pd.Series) -> int:
    converted = pd.to_numeric(series, errors="coerce")
    bad = converted.isna()
    return int(bad.idxmax()) + 2  # +1 for the header row, +1 for 1-basing


def _numeric_column(frame: pd.DataFrame, name: str) -> np.ndarray:
    col = frame[name]
    if not pd.api.types.is_numeric_dtype(col):
        raise InputError(f"column {name!r} is not numeric",
                         line=_first_bad_line(col))
    values = col.to_numpy(dtype=np.float64)
    if np.any(np.isnan(values)):
        raise InputError(f"column {name!r} has a missing value",
                         line=int(np.argmax(np.isnan(values))) + 2)
    return values


def _standardize(values: np.ndarray, name: str) -> np.ndarray:
    sd = float(np.std(values))
    if sd == 0.0:
        raise InputError(f"column {name!r} is constant and cannot be standardized")
    return (values - np.mean(values)) / sd


def _dummy_columns(frame: pd.DataFrame, name: str, spec: ColumnSpec,
                   mode: str) -> tuple[list[np.ndarray], list[str]]:
    raw = frame[name].astype(str).to_numpy()
    observed, counts = np.unique(raw, return_counts=True)
    if spec.levels is not None:
        declared = list(spec.levels)
        unknown_mask = ~np.isin(raw, declared)
        if np.any(unknown_mask):
            if mode == "strict":
                raise InputError(
                    f"column {name!r} has undeclared level "
                    f"{raw[unknown_mask][0]!r}",
                    line=int(np.argmax(unknown_mask)) + 2)
            warnings.warn(
                f"column {name!r}: undeclared levels collected into "
                f"{name}=__other__", UserWarning)
        levels = declared
        counts = np.array([np.sum(raw == lvl) for lvl in levels])
        extra_other = np.any(unknown_mask)
    else:
        levels, unknown_mask, extra_other = list(observed), None, False
    order = np.lexsort((levels, -counts))
    baseline = levels[order[0]]
    columns, names = [], []
    for lvl in sorted(lvl for lvl in levels if lvl != baseline):
        columns.append((raw == lvl).astype(np.float64))
        names.append(f"{name}={lvl}")
    if extra_other:
        columns.append(unknown_mask.astype(np.float64))
        names.append(f"{name}=__other__")
    return columns, names


def ingest_csv(path: str | Path, schema: TableSchema) -> TabularData:
    """Read and encode a CSV file according to ``schema``."""
    try:
        frame = pd.read_csv(path, header=0)
    except FileNotFoundError:
        raise InputError(f"input file not found: {path}")
    except pd.errors.EmptyDataError:
        raise InputError("input file is empty")
    except pd.errors.ParserError as exc:
        match = re.search(r"line (\d+)", str(exc))
        raise InputError("malformed row",
                         line=int(match.group(1)) if match else None)
    missing = [name for name in schema.columns if name not in frame.columns]
    if missing:
        raise InputError(f"columns missing from input: {missing}")

    features: list[np.ndarray] = []
    names: list[str] = []
    keys: dict = {}
    response = None
    surv_time = surv_event = None

    if schema.intercept:
        features.append(np.ones(len(frame)))
        names.append("intercept")

    for name in frame.columns:
        spec = schema.columns.get(name)
        if spec is None or spec.role == "ignore":
            continue
        if spec.role == "numeric":
            values = _numeric_column(frame, name)
            if schema.standardize:
                values = _standardize(values, name)
            features.append(values)
            names.append(name)
        elif spec.role == "categorical":
            cols, colnames = _dummy_columns(frame, name, spec,
                                            schema.unknown_levels)
            features.extend(cols)
            names.extend(colnames)
        elif spec.role == "partition-key":
            keys[name] = frame[name].astype(str).to_numpy()
        elif spec.role == "response":
            response = _numeric_column(frame, name)
        elif spec.role == "ordinal":
            values = _numeric_column(frame, name)
            if np.any(values != np.round(values)) or np.any(values < 1) \
                    or np.any(values > spec.levels):
                bad = (values != np.round(values)) | (values < 1) | (values > spec.levels)
                raise InputError(
                    f"column {name!r} must hold integer levels 1..{spec.levels}",
                    line=int(np.argmax(bad)) + 2)
            response = values
        elif spec.role == "survival-time":
            surv_time = _numeric_column(frame, name)
            if np.any(surv_time <= 0):
                raise InputError(
                    f"column {name!r} must be strictly positive",
                    line=int(np.argmax(surv_time <= 0)) + 2)
        elif spec.role == "event":
            surv_event = _numeric_column(frame, name)
            if not np.all(np.isin(surv_event, (0.0, 1.0))):
                bad = ~np.isin(surv_event, (0.0, 1.0))
                raise InputError(f"column {name!r} must be 0/1",
                                 line=int(np.argmax(bad)) + 2)

    if surv_time is not None:
        response = np.column_stack([surv_time, surv_event])
    if response is None:
        raise ConfigError("schema declared no response column present in the file")
    if not features:
        raise ConfigError("no covariate columns after encoding")
    return TabularData(
        covariates=np.column_stack(features),
        response=response,
        feature_names=tuple(names),
        keys=keys,
        num_cutpoints=schema.num_cutpoints,
    )
