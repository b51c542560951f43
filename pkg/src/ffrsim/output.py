"""Run artifacts: time-series CSV, metrics JSON and a manifest, all written atomically."""

from __future__ import annotations

import csv
import hashlib
import io
import json
import os
import tempfile
from pathlib import Path

import numpy as np

from .scenario import COLUMNS, MetricsRecord, RunResult

NUMBER_FORMAT = "%.9g"
TIMESERIES = "timeseries.csv"
METRICS = "metrics.json"
MANIFEST = "manifest.json"
SUMMARY = "summary.csv"
SUMMARY_COLUMNS = (
    "strategy", "case", "nadir_hz", "rocof_hz_per_s", "recovery_time_s",
    "max_power_ev_mw", "max_power_dc_mw", "max_power_bess_mw", "ffr_energy_mwh",
)


def atomic_write(path, data) -> Path:
    """Write ``data`` (str or bytes) via a sibling temp file and ``os.replace``."""
    path = Path(path)
    payload = data.encode("utf-8") if isinstance(data, str) else data
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(payload)
        os.replace(tmp, path)
    except BaseException:
        try:
            os.unlink(tmp)
        except FileNotFoundError:
            pass
        raise
    return path


def fmt(x) -> str:
    return NUMBER_FORMAT % x


def timeseries_text(samples: np.ndarray) -> str:
    samples = np.asarray(samples, dtype=np.float64)
    if samples.ndim != 2 or samples.shape[1] != len(COLUMNS):
        raise ValueError(f"expected (n, {len(COLUMNS)}) samples, got {samples.shape}")
    lines = [",".join(COLUMNS)]
    lines.extend(",".join(NUMBER_FORMAT % v for v in row) for row in samples.tolist())
    return "\n".join(lines) + "\n"


def write_timeseries(path, samples) -> Path:
    return atomic_write(path, timeseries_text(samples))


def read_timeseries(path) -> np.ndarray:
    with open(path, newline="") as fh:
        header = fh.readline().strip().split(",")
        if tuple(header) != COLUMNS:
            raise ValueError(f"{path}: unexpected header {header}")
        return np.loadtxt(fh, delimiter=",", ndmin=2, dtype=np.float64)


def metrics_text(metrics: MetricsRecord) -> str:
    return json.dumps(metrics.to_dict(), indent=2) + "\n"


def write_metrics(path, metrics: MetricsRecord) -> Path:
    return atomic_write(path, metrics_text(metrics))


def sha256_file(path) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


def write_manifest(out_dir, *, config_sha256: str, config_source: str, version: str,
                   inputs: dict, files) -> Path:
    out_dir = Path(out_dir)
    entries = {}
    for f in files:
        f = Path(f)
        entries[f.name] = {"sha256": sha256_file(f), "bytes": f.stat().st_size}
    doc = {
        "tool": "ffrsim",
        "version": version,
        "config": {"source": config_source, "sha256": config_sha256},
        "inputs": inputs,
        "files": entries,
    }
    return atomic_write(out_dir / MANIFEST, json.dumps(doc, indent=2, sort_keys=True) + "\n")


def write_run(out_dir, result: RunResult) -> list[Path]:
    """Timeseries and metrics for one run; returns the written paths."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    return [
        write_timeseries(out_dir / TIMESERIES, result.samples),
        write_metrics(out_dir / METRICS, result.metrics),
    ]


def summary_row(strategy: str, case_id: int, m: MetricsRecord) -> list[str]:
    rec = "" if m.recovery_time_s is None else fmt(m.recovery_time_s)
    p = m.max_power_mw
    return [strategy, str(case_id), fmt(m.nadir_hz), fmt(m.rocof_hz_per_s), rec,
            fmt(p["ev"]), fmt(p["dc"]), fmt(p["bess"]), fmt(m.ffr_energy_mwh)]


def summary_text(rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(SUMMARY_COLUMNS)
    w.writerows(rows)
    return buf.getvalue()


def read_summary(path) -> list[dict]:
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))
