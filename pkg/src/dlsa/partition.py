"""Split ingested rows into disjoint worker partitions."""

from __future__ import annotations

import numpy as np

from .exceptions import ConfigError, TooFewRows
from .families import DataPartition
from .ingest import TabularData

STRATEGIES = ("contiguous", "round-robin", "by-column")

_PHILOX_MIX = 0x9E3779B97F4A7C15


def parse_strategy(text: str) -> tuple[str, str | None]:
    """Parse ``"round-robin"``, ``"contiguous"`` or ``"by-column:<col>"``."""
    if text in ("contiguous", "round-robin"):
        return text, None
    if text.startswith("by-column:") and len(text) > len("by-column:"):
        return "by-column", text.split(":", 1)[1]
    raise ConfigError(f"unknown partition strategy {text!r}")


def partition_input(
    data: TabularData,
    k: int,
    strategy: str = "contiguous",
    *,
    seed: int = 0,
) -> list[DataPartition]:
    """Disjoint cover of the rows into ``k`` partitions.

    ``contiguous`` slices the file order into near-equal blocks,
    ``round-robin`` deals a seeded shuffle, and ``by-column:<col>`` groups by
    the values of a declared partition-key column (one level per worker,
    which makes the workers deliberately heterogeneous).
    """
    name, column = parse_strategy(strategy)
    n = data.n
    if k < 1:
        raise ConfigError("need at least one partition")
    if n < k * (data.q + 1):
        raise TooFewRows(
            f"{n} rows cannot support {k} partitions of a {data.q}-parameter model")

    if name == "contiguous":
        sizes = np.full(k, n // k)
        sizes[: n % k] += 1
        bounds = np.concatenate([[0], np.cumsum(sizes)])
        groups = [np.arange(bounds[j], bounds[j + 1]) for j in range(k)]
    elif name == "round-robin":
        rng = np.random.Generator(np.random.Philox(
            key=np.array([seed, _PHILOX_MIX], dtype=np.uint64)))
        perm = rng.permutation(n)
        groups = [np.sort(perm[j::k]) for j in range(k)]
    else:
        if column not in data.keys:
            raise ConfigError(
                f"column {column!r} is not declared as a partition-key")
        values = data.keys[column]
        levels = np.unique(values)
        if levels.size != k:
            raise ConfigError(
                f"partition column {column!r} has {levels.size} levels, "
                f"but k={k} partitions were requested")
        groups = [np.nonzero(values == lvl)[0] for lvl in levels]

    return [
        DataPartition(
            covariates=data.covariates[idx],
            response=data.response[idx],
            partition_id=j,
        )
        for j, idx in enumerate(groups)
    ]
