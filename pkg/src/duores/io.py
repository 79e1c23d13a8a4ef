"""File formats: measure CSV/JSON, trajectory CSV, JSON reports.

Floats are written with ``repr``, the shortest representation that
round-trips to the identical IEEE-754 double, so write -> read is
bit-exact.
"""

from __future__ import annotations

import csv
import json
import math
from pathlib import Path
from typing import Sequence

import numpy as np

from .core import Measure, enumerate_states, num_states

__all__ = [
    "measure_to_csv",
    "measure_from_csv",
    "measure_to_json",
    "measure_from_json",
    "write_timed_measure_csv",
    "write_station_trajectory_csv",
    "write_json",
]

_MEASURE_HEADER = ["w", "x", "y", "z", "prob"]


def _capacity_from_rows(n_rows: int) -> int:
    # num_states is strictly increasing in K, so the row count pins K.
    K = 0
    while num_states(K) < n_rows:
        K += 1
    if num_states(K) != n_rows:
        raise ValueError(f"{n_rows} rows is not a full enumeration of any capacity")
    return K


def measure_to_csv(m: Measure, path: str | Path) -> None:
    """Write ``m`` as CSV with header ``w,x,y,z,prob``, one row per
    state in enumeration order."""
    states = enumerate_states(m.K)
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(_MEASURE_HEADER)
        for st, p in zip(states, m.probs):
            writer.writerow([st.w, st.x, st.y, st.z, repr(float(p))])


def measure_from_csv(path: str | Path) -> Measure:
    """Read a measure written by :func:`measure_to_csv`.

    The capacity is recovered from the row count; rows must appear in
    enumeration order.
    """
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        if header != _MEASURE_HEADER:
            raise ValueError(f"unexpected header {header!r}")
        rows = [row for row in reader if row]
    K = _capacity_from_rows(len(rows))
    states = enumerate_states(K)
    probs = np.empty(len(rows))
    for r, (row, st) in enumerate(zip(rows, states)):
        if tuple(int(v) for v in row[:4]) != tuple(st):
            raise ValueError(f"row {r} state {row[:4]} out of enumeration order")
        probs[r] = float(row[4])
    return Measure(probs, K)


def measure_to_json(m: Measure, path: str | Path) -> None:
    """Write ``m`` as JSON: ``{"K": K, "probs": [...]}`` with the array
    indexed by state rank."""
    write_json({"K": m.K, "probs": [float(p) for p in m.probs]}, path)


def measure_from_json(path: str | Path) -> Measure:
    with open(path) as fh:
        obj = json.load(fh)
    return Measure(np.asarray(obj["probs"], dtype=np.float64), int(obj["K"]))


def write_timed_measure_csv(
    times: Sequence[float], measures: Sequence[Measure], path: str | Path
) -> None:
    """Write a measure-valued trajectory as CSV ``t,w,x,y,z,prob``."""
    if len(times) != len(measures):
        raise ValueError("times and measures differ in length")
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["t"] + _MEASURE_HEADER)
        for t, m in zip(times, measures):
            states = enumerate_states(m.K)
            for st, p in zip(states, m.probs):
                writer.writerow([repr(float(t)), st.w, st.x, st.y, st.z, repr(float(p))])


def write_station_trajectory_csv(
    snapshots: Sequence[tuple[float, np.ndarray]], path: str | Path
) -> None:
    """Write per-station snapshots as CSV ``t,station,w,x,y,z``.

    ``snapshots`` holds ``(time, counts)`` pairs where ``counts`` has
    shape ``(N, 4)`` with columns ``w,x,y,z``.
    """
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["t", "station", "w", "x", "y", "z"])
        for t, counts in snapshots:
            for i, (w, x, y, z) in enumerate(counts):
                writer.writerow([repr(float(t)), i, int(w), int(x), int(y), int(z)])


def _sanitize(obj):
    """Convert numpy scalars/arrays to plain Python for json.dump."""
    if isinstance(obj, dict):
        return {k: _sanitize(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_sanitize(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return [_sanitize(v) for v in obj.tolist()]
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.floating,)):
        return float(obj)
    if isinstance(obj, float) and not math.isfinite(obj):
        return repr(obj)  # json has no inf/nan literals
    return obj


def write_json(obj, path: str | Path) -> None:
    """Write a JSON report with stable 2-space indentation."""
    with open(path, "w") as fh:
        json.dump(_sanitize(obj), fh, indent=2)
        fh.write("\n")
