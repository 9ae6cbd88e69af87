"""Plain-text serialization: fields, trajectory tables, agent tables, JSON.

Everything here is deterministic: floats are written with repr (shortest
round-trip form), JSON keys are sorted, and no timestamps appear in any
data file. Two runs of the same inputs produce byte-identical outputs.
"""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from .grid import GridSpec, ScalarField, build_grid

__all__ = [
    "save_field",
    "load_field",
    "write_trajectory_csv",
    "write_agents_csv",
    "dump_json",
]


def _fmt(x) -> str:
    # repr of a python float is the shortest exact round-trip form
    return repr(float(x))


def save_field(f: ScalarField, path) -> None:
    """Write a field as text: `dim n_axes... L_axes...` then one value
    per line in row-major order."""
    grid = f.grid
    header = [str(grid.dim)]
    header += [str(n) for n in grid.cells]
    header += [_fmt(L) for L in grid.extents]
    lines = [" ".join(header)]
    lines += [_fmt(v) for v in f.values.ravel(order="C")]
    Path(path).write_text("\n".join(lines) + "\n")


def load_field(path) -> ScalarField:
    """Read a field written by save_field."""
    text = Path(path).read_text().split("\n")
    head = text[0].split()
    dim = int(head[0])
    if len(head) != 1 + 2 * dim:
        raise ValueError(f"malformed field header: {text[0]!r}")
    cells = [int(c) for c in head[1 : 1 + dim]]
    extents = [float(L) for L in head[1 + dim : 1 + 2 * dim]]
    grid = build_grid(extents, cells)
    flat = np.array([float(v) for v in text[1:] if v.strip()], dtype=float)
    if flat.size != grid.total_cells:
        raise ValueError(
            f"field body has {flat.size} values, grid needs {grid.total_cells}"
        )
    return ScalarField(grid, flat.reshape(grid.shape, order="C"))


def write_trajectory_csv(
    times,
    metric_columns: dict[str, np.ndarray],
    min_rho: np.ndarray,
    masses: np.ndarray,
    path,
) -> None:
    """Sample table: t, one column per metric, min_rho, mass."""
    names = list(metric_columns)
    rows = ["t," + ",".join(names + ["min_rho", "mass"])]
    for i, t in enumerate(times):
        vals = [_fmt(metric_columns[k][i]) for k in names]
        rows.append(",".join([_fmt(t)] + vals + [_fmt(min_rho[i]), _fmt(masses[i])]))
    Path(path).write_text("\n".join(rows) + "\n")


def write_agents_csv(times, snapshots, path) -> None:
    """Agent snapshot table: t, agent_id, x[, y]."""
    dim = snapshots[0].positions.shape[1]
    cols = ["t", "agent_id", "x"] + (["y"] if dim == 2 else [])
    rows = [",".join(cols)]
    for t, snap in zip(times, snapshots):
        for i, pos in enumerate(snap.positions):
            rows.append(",".join([_fmt(t), str(i)] + [_fmt(c) for c in pos]))
    Path(path).write_text("\n".join(rows) + "\n")


def _plain(obj):
    if isinstance(obj, dict):
        return {str(k): _plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_plain(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return [_plain(v) for v in obj.tolist()]
    if isinstance(obj, (np.floating, float)):
        v = float(obj)
        if not np.isfinite(v):  # JSON has no inf/nan
            return repr(v)
        return v
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.bool_,)):
        return bool(obj)
    return obj


def dump_json(obj, path) -> None:
    """Sorted-key JSON with numpy scalars and arrays converted."""
    Path(path).write_text(
        json.dumps(_plain(obj), indent=2, sort_keys=True, allow_nan=False) + "\n"
    )
