"""Shared corpus builders and refinement helpers.

Random densities are always drawn through a caller-supplied Generator so
each test owns its seed and the draw order is part of the test contract.
"""

import numpy as np

from swarmfield.grid import ScalarField, as_density, build_grid


def normalize(grid, values):
    """Scale nonnegative cell values to unit mass and validate."""
    return as_density(ScalarField(grid, values / (values.sum() * grid.cell_volume)))


def smooth_density_1d(grid, rng, floor=0.1):
    """Low-order cosine/sine mixture, clipped away from zero, unit mass."""
    x = grid.points()[..., 0]
    L = grid.extents[0]
    v = np.ones(grid.shape)
    for m in range(1, 4):
        v = v + rng.uniform(-0.4, 0.4) * np.cos(np.pi * m * x / L)
        v = v + rng.uniform(-0.2, 0.2) * np.sin(2 * np.pi * m * x / L) * np.sin(np.pi * x / L)
    return normalize(grid, np.maximum(v, floor))


def pinched_density_1d(grid, rng):
    # deviation rescaled so values stay inside [0.55, 1.45]; zero-mean
    # deviation on a unit box keeps the mass at exactly one
    f = smooth_density_1d(grid, rng)
    d = f.values - f.values.mean()
    v = 1.0 + 0.45 * d / max(1e-9, np.abs(d).max())
    return normalize(grid, v)


def smooth_density_2d(grid, rng, floor=0.15):
    X, Y = grid.meshes()
    v = np.ones(grid.shape)
    for m in range(1, 3):
        for k in range(1, 3):
            v = v + rng.uniform(-0.25, 0.25) * np.cos(np.pi * m * X) * np.cos(np.pi * k * Y)
    return normalize(grid, np.maximum(v, floor))


def refine_atoms_1d(field, k):
    """The same piecewise-constant density carried on a k-times finer grid.

    Each coarse cell splits into k equal-mass sub-atoms, which is the
    refinement the atomic transport solver converges under.
    """
    fine = build_grid(field.grid.extents, (field.grid.cells[0] * k,))
    return ScalarField(fine, np.repeat(field.values, k))


def coarsen_1d(field, k):
    coarse = build_grid(field.grid.extents, (field.grid.cells[0] // k,))
    return ScalarField(coarse, field.values.reshape(-1, k).mean(axis=1))
