"""Text serialization round trips and determinism."""

import json

import numpy as np
import pytest

from swarmfield.grid import ScalarField, build_grid
from swarmfield.io import dump_json, load_field, save_field, write_agents_csv, write_trajectory_csv
from swarmfield.particles import AgentSet


def test_field_round_trip_is_exact(tmp_path):
    rng = np.random.default_rng(0)
    g = build_grid((2.0, 0.5), (6, 9))
    f = ScalarField(g, rng.normal(size=g.shape))
    p = tmp_path / "f.txt"
    save_field(f, p)
    back = load_field(p)
    assert back.grid == g
    # repr round trip: bitwise equality, not approx
    assert np.array_equal(back.values, f.values)


def test_save_field_is_deterministic(tmp_path):
    g = build_grid((1.0,), (16,))
    f = ScalarField(g, np.linspace(0.0, 1.0, 16))
    save_field(f, tmp_path / "a.txt")
    save_field(f, tmp_path / "b.txt")
    assert (tmp_path / "a.txt").read_bytes() == (tmp_path / "b.txt").read_bytes()


def test_load_field_rejects_malformed_input(tmp_path):
    p = tmp_path / "bad.txt"
    p.write_text("2 8 1.0\n0.0\n")  # header promises 2D but carries one axis
    with pytest.raises(ValueError):
        load_field(p)
    p.write_text("1 8 1.0\n0.0\n0.0\n")  # 8 cells promised, 2 given
    with pytest.raises(ValueError):
        load_field(p)


def test_trajectory_csv_layout(tmp_path):
    p = tmp_path / "traj.csv"
    write_trajectory_csv(
        [0.0, 0.5],
        {"l2_error": np.array([0.3, 0.1])},
        np.array([0.9, 0.95]),
        np.array([1.0, 1.0]),
        p,
    )
    lines = p.read_text().strip().split("\n")
    assert lines[0] == "t,l2_error,min_rho,mass"
    assert len(lines) == 3
    assert lines[1].split(",")[0] == "0.0"


def test_agents_csv_layout(tmp_path):
    p = tmp_path / "agents.csv"
    snaps = [AgentSet(np.array([[0.25], [0.75]]), seed=1)]
    write_agents_csv([0.0], snaps, p)
    lines = p.read_text().strip().split("\n")
    assert lines[0] == "t,agent_id,x"
    assert lines[1] == "0.0,0,0.25"
    assert lines[2] == "0.0,1,0.75"


def test_dump_json_converts_numpy_and_sorts_keys(tmp_path):
    p = tmp_path / "o.json"
    dump_json({"b": np.float64(1.5), "a": np.arange(3), "c": np.bool_(True)}, p)
    doc = json.loads(p.read_text())
    assert doc == {"a": [0, 1, 2], "b": 1.5, "c": True}
    assert p.read_text().index('"a"') < p.read_text().index('"b"')
