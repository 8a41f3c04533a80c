"""Streaming CSV / JSON emission of trial records.

Floats are written with ``repr``, which is the shortest string that
parses back to the same double. Non-finite floats are written as
``inf``, ``-inf`` or ``nan`` in both formats so the JSON stays standard.
"""

from __future__ import annotations

import csv
import dataclasses
import json
import math
from typing import Iterable, Optional

import numpy as np

from dppersonal.harness.config import ExperimentConfig
from dppersonal.harness.runner import TrialRecord

CONFIG_COLUMNS = ("problem", "framework", "d", "t", "n", "rho", "epsilon", "delta",
                  "lam", "mode", "seed")
RECORD_COLUMNS = tuple(f.name for f in dataclasses.fields(TrialRecord))
COLUMNS = CONFIG_COLUMNS + RECORD_COLUMNS
FORMATS = ("csv", "json")

INT_COLUMNS = {"d", "t", "n", "seed", "trial", "instance_seed"}
FLOAT_COLUMNS = {"rho", "epsilon", "delta", "lam", "loss", "sigma2", "reference_loss",
                 "stat_in", "stat_out"}


def _config_values(config: Optional[ExperimentConfig]) -> dict:
    if config is None:
        return {k: None for k in CONFIG_COLUMNS}
    return {"problem": config.problem, "framework": config.framework.value, "d": config.d,
            "t": config.t, "n": config.n, "rho": config.rho, "epsilon": config.epsilon,
            "delta": config.delta, "lam": config.lam, "mode": config.mode,
            "seed": config.seed}


def record_row(record, config: Optional[ExperimentConfig] = None) -> dict:
    """Flat dict for one record; ``record`` may be a ``(config, record)`` pair."""
    if isinstance(record, tuple):
        config, record = record
    row = _config_values(config)
    row.update(dataclasses.asdict(record))
    return row


def _text(v) -> str:
    if v is None:
        return ""
    if isinstance(v, float):
        return repr(v)
    return str(v)


def _json_value(v):
    if isinstance(v, float) and not math.isfinite(v):
        return repr(v)
    return v


class ResultWriter:
    """Push-style writer; use as a context manager and call ``write`` per record."""

    def __init__(self, path, format: str = "csv"):
        if format not in FORMATS:
            raise ValueError(f"format must be one of {FORMATS}, got {format!r}")
        self.format = format
        self.count = 0
        self._fh = open(path, "w", encoding="utf-8", newline="")
        if format == "csv":
            self._csv = csv.writer(self._fh)
            self._csv.writerow(COLUMNS)
        else:
            self._fh.write("[")

    def write(self, record, config: Optional[ExperimentConfig] = None) -> None:
        row = record_row(record, config)
        if self.format == "csv":
            self._csv.writerow([_text(row[c]) for c in COLUMNS])
        else:
            self._fh.write(",\n" if self.count else "\n")
            self._fh.write(json.dumps({c: _json_value(row[c]) for c in COLUMNS}))
        self.count += 1

    def close(self) -> None:
        if self._fh.closed:
            return
        if self.format == "json":
            self._fh.write("\n]\n" if self.count else "]\n")
        self._fh.close()

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()


def emit_results(records: Iterable, path, format: str = "csv",
                 config: Optional[ExperimentConfig] = None) -> int:
    """Writes records one at a time; never holds the whole stream.

    Args:
      records: TrialRecords, or ``(config, record)`` pairs.
      path: Output file.
      format: ``"csv"`` or ``"json"``.
      config: Config for bare records.

    Returns:
      The number of records written.

    Raises:
      OSError: the path cannot be written.
    """
    with ResultWriter(path, format) as writer:
        for rec in records:
            writer.write(rec, config)
        return writer.count


def _parse(col, v):
    if v is None or v == "":
        return None
    if col in INT_COLUMNS:
        return int(v)
    if col in FLOAT_COLUMNS:
        return float(v)
    return v


def read_results(path, format: str = "csv") -> list:
    """Parses an emitted file back into typed row dicts."""
    with open(path, encoding="utf-8", newline="") as fh:
        if format == "csv":
            rows = list(csv.DictReader(fh))
        else:
            rows = json.load(fh)
    return [{c: _parse(c, r[c]) for c in COLUMNS} for r in rows]


def write_json(obj, path) -> None:
    """Writes one JSON document (reports, tables)."""
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(_sanitize(obj), fh, indent=2, sort_keys=True)
        fh.write("\n")


def _sanitize(obj):
    if isinstance(obj, dict):
        return {str(k): _sanitize(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_sanitize(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _sanitize(obj.tolist())
    if isinstance(obj, np.generic):
        obj = obj.item()
    return _json_value(obj)


def dumps(obj) -> str:
    return json.dumps(_sanitize(obj), indent=2, sort_keys=True)
