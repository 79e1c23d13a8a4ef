"""Round-trip fidelity of the CSV and JSON measure formats."""

import json

import numpy as np
import pytest

from duores.core import Measure, num_states
from duores.io import (
    measure_from_csv,
    measure_from_json,
    measure_to_csv,
    measure_to_json,
    write_json,
    write_station_trajectory_csv,
    write_timed_measure_csv,
)


def _random_measure(K, seed):
    rng = np.random.default_rng(seed)
    p = rng.dirichlet(np.ones(num_states(K)))
    return Measure(p / p.sum(), K)


@pytest.mark.parametrize("K", [1, 2, 4])
def test_csv_roundtrip_is_bit_exact(tmp_path, K):
    m = _random_measure(K, seed=100 + K)
    path = tmp_path / "m.csv"
    measure_to_csv(m, path)
    back = measure_from_csv(path)
    assert back.K == K
    assert np.array_equal(back.probs, m.probs)


def test_csv_roundtrip_awkward_floats(tmp_path):
    # repr round-trips every double, including ones with no short decimal form
    p = np.zeros(num_states(1))
    p[0] = 0.1
    p[1] = 1.0 / 3.0
    p[2] = 1e-300
    p[3] = 1.0 - p[:3].sum()
    m = Measure(p, 1)
    path = tmp_path / "m.csv"
    measure_to_csv(m, path)
    assert np.array_equal(measure_from_csv(path).probs, p)


@pytest.mark.parametrize("K", [1, 3])
def test_json_roundtrip_is_bit_exact(tmp_path, K):
    m = _random_measure(K, seed=200 + K)
    path = tmp_path / "m.json"
    measure_to_json(m, path)
    back = measure_from_json(path)
    assert back.K == K
    assert np.array_equal(back.probs, m.probs)


def test_csv_rejects_bad_header(tmp_path):
    path = tmp_path / "bad.csv"
    path.write_text("a,b,c,d,prob\n0,0,0,0,1.0\n")
    with pytest.raises(ValueError):
        measure_from_csv(path)


def test_csv_rejects_wrong_row_count(tmp_path):
    m = _random_measure(1, seed=3)
    path = tmp_path / "m.csv"
    measure_to_csv(m, path)
    lines = path.read_text().splitlines()
    path.write_text("\n".join(lines[:-1]) + "\n")
    with pytest.raises(ValueError):
        measure_from_csv(path)


def test_csv_rejects_out_of_order_rows(tmp_path):
    m = _random_measure(1, seed=4)
    path = tmp_path / "m.csv"
    measure_to_csv(m, path)
    lines = path.read_text().splitlines()
    lines[1], lines[2] = lines[2], lines[1]
    path.write_text("\n".join(lines) + "\n")
    with pytest.raises(ValueError):
        measure_from_csv(path)


def test_timed_measure_csv_layout(tmp_path):
    m0 = Measure.point((0, 0, 1, 0), 1)
    m1 = Measure.uniform(1)
    path = tmp_path / "traj.csv"
    write_timed_measure_csv([0.0, 0.5], [m0, m1], path)
    lines = path.read_text().splitlines()
    assert lines[0] == "t,w,x,y,z,prob"
    assert len(lines) == 1 + 2 * num_states(1)
    t_col = [float(row.split(",")[0]) for row in lines[1:]]
    assert t_col == [0.0] * 5 + [0.5] * 5


def test_station_trajectory_csv_layout(tmp_path):
    counts = np.array([[0, 0, 1, 0], [1, 0, 0, 0]], dtype=np.int64)
    path = tmp_path / "stations.csv"
    write_station_trajectory_csv([(0.0, counts)], path)
    lines = path.read_text().splitlines()
    assert lines[0] == "t,station,w,x,y,z"
    assert lines[1] == "0.0,0,0,0,1,0"
    assert lines[2] == "0.0,1,1,0,0,0"


def test_write_json_sanitizes_numpy_scalars(tmp_path):
    path = tmp_path / "report.json"
    write_json(
        {"a": np.float64(0.5), "b": np.int64(3), "c": [np.float64(1.0)], "d": float("inf")},
        path,
    )
    data = json.loads(path.read_text())
    assert data["a"] == 0.5
    assert data["b"] == 3
    assert data["c"] == [1.0]
    assert data["d"] == "inf"
