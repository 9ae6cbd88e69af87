"""Cell-centered finite-volume grids on box domains with zero-flux walls.

The domain is a box ``[0, L_1] x ... x [0, L_d]`` (d = 1 or 2) split into
uniform cells; all fields live at cell centers ``x_i = (i + 1/2) h``.
Boundary conditions are built into the operators rather than carried by
fields: scalar stencils see a reflected ghost value across each wall
(homogeneous Neumann), and vector fields are admissible when their normal
component vanishes in wall-adjacent cells, so no flux ever crosses a wall.

The three difference operators are adjoint-consistent by construction:
``<gradient(f), v> = -<f, divergence(v)>`` holds to rounding for every
admissible v, and ``laplacian`` is the conservative divergence of face
gradients, which makes it symmetric, mass-preserving, and negative
semidefinite with the same face quadrature.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "GridSpec",
    "ScalarField",
    "VectorField",
    "Jet",
    "build_grid",
    "gradient",
    "divergence",
    "laplacian",
    "jet_at",
    "jet_arrays",
    "integrate",
    "dot",
    "lp_norm",
    "vector_dot",
    "vector_l2",
    "dirichlet_energy",
    "as_density",
    "is_admissible",
    "project_admissible",
]


@dataclass(frozen=True)
class GridSpec:
    """Uniform cell-centered grid over ``[0, extents[a]]`` per axis.

    Attributes:
        extents: box side lengths, all positive.
        cells: cell counts per axis, each at least 4.
    """

    extents: tuple[float, ...]
    cells: tuple[int, ...]

    @property
    def dim(self) -> int:
        return len(self.extents)

    @property
    def shape(self) -> tuple[int, ...]:
        return self.cells

    @property
    def h(self) -> tuple[float, ...]:
        return tuple(L / n for L, n in zip(self.extents, self.cells))

    @property
    def min_h(self) -> float:
        return min(self.h)

    @property
    def cell_volume(self) -> float:
        return math.prod(self.h)

    @property
    def total_cells(self) -> int:
        return math.prod(self.cells)

    @property
    def diameter(self) -> float:
        return math.sqrt(sum(L * L for L in self.extents))

    @property
    def volume(self) -> float:
        return math.prod(self.extents)

    def centers(self, axis: int) -> np.ndarray:
        """Cell-center coordinates along one axis."""
        n = self.cells[axis]
        return (np.arange(n) + 0.5) * self.h[axis]

    def meshes(self) -> tuple[np.ndarray, ...]:
        """Per-axis coordinate arrays broadcast to the full grid shape."""
        return tuple(np.meshgrid(*(self.centers(a) for a in range(self.dim)), indexing="ij"))

    def points(self) -> np.ndarray:
        """Cell-center positions, shape ``shape + (dim,)``."""
        return np.stack(self.meshes(), axis=-1)

    def flat_index(self, index: tuple[int, ...]) -> int:
        return int(np.ravel_multi_index(index, self.shape))


def build_grid(extents, cells) -> GridSpec:
    """Validate and construct a GridSpec.

    Args:
        extents: iterable of box side lengths.
        cells: iterable of cell counts, same length.

    Raises:
        ValueError: on unsupported dimension, nonpositive extents, or
            fewer than 4 cells on any axis.
    """
    extents = tuple(float(L) for L in extents)
    cells = tuple(int(n) for n in cells)
    if len(extents) != len(cells):
        raise ValueError(f"extents/cells rank mismatch: {len(extents)} vs {len(cells)}")
    if len(extents) not in (1, 2):
        raise ValueError(f"only 1D and 2D boxes are supported, got dim={len(extents)}")
    if any(L <= 0 for L in extents):
        raise ValueError(f"extents must be positive, got {extents}")
    if any(n < 4 for n in cells):
        raise ValueError(f"need at least 4 cells per axis, got {cells}")
    return GridSpec(extents, cells)


@dataclass
class ScalarField:
    """Per-cell real values on a grid.

    ``values`` has shape ``grid.shape``; finiteness is checked on
    construction. Probability densities additionally satisfy
    nonnegativity and unit mass, checked by :func:`as_density`.
    """

    grid: GridSpec
    values: np.ndarray

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)
        if self.values.shape != self.grid.shape:
            raise ValueError(
                f"values shape {self.values.shape} does not match grid {self.grid.shape}"
            )
        if not np.all(np.isfinite(self.values)):
            raise ValueError("field values must be finite")

    def mass(self) -> float:
        return float(self.values.sum() * self.grid.cell_volume)

    def copy(self) -> "ScalarField":
        return ScalarField(self.grid, self.values.copy())


@dataclass
class VectorField:
    """Per-cell velocity vectors, shape ``grid.shape + (dim,)``.

    Admissible velocity fields carry zero normal component in
    wall-adjacent cells so the interpolated wall-face flux vanishes.
    """

    grid: GridSpec
    values: np.ndarray

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)
        expected = self.grid.shape + (self.grid.dim,)
        if self.values.shape != expected:
            raise ValueError(f"values shape {self.values.shape}, expected {expected}")
        if not np.all(np.isfinite(self.values)):
            raise ValueError("field values must be finite")

    def component(self, axis: int) -> np.ndarray:
        return self.values[..., axis]

    def max_speed(self) -> float:
        return float(np.abs(self.values).max()) if self.values.size else 0.0

    def copy(self) -> "VectorField":
        return VectorField(self.grid, self.values.copy())


@dataclass
class Jet(object):
    """Point data of a field up to second order.

    Attributes:
        order: highest derivative populated (0, 1, or 2).
        value: field value at the point.
        gradient: shape (dim,), present for order >= 1.
        hessian: shape (dim, dim), symmetric, present for order 2.
    """

    order: int
    value: float
    gradient: np.ndarray | None = None
    hessian: np.ndarray | None = None

    def __post_init__(self):
        if self.order not in (0, 1, 2):
            raise ValueError(f"jet order must be 0, 1, or 2, got {self.order}")
        if self.order >= 1 and self.gradient is None:
            raise ValueError("order >= 1 jet requires a gradient")
        if self.order == 2:
            if self.hessian is None:
                raise ValueError("order 2 jet requires a hessian")
            H = np.asarray(self.hessian)
            if not np.allclose(H, H.T, atol=1e-12):
                raise ValueError("hessian must be symmetric to 1e-12")


def integrate(f: ScalarField) -> float:
    """Box quadrature of f (cell sums times cell volume)."""
    return float(f.values.sum() * f.grid.cell_volume)


def dot(f: ScalarField, g: ScalarField) -> float:
    """Volume-weighted L2 inner product of two scalar fields."""
    return float((f.values * g.values).sum() * f.grid.cell_volume)


def lp_norm(values: np.ndarray, grid: GridSpec, p: float = 2.0) -> float:
    """Volume-weighted L^p norm of a raw value array (p = inf for max)."""
    if math.isinf(p):
        return float(np.abs(values).max())
    return float((np.abs(values) ** p).sum() * grid.cell_volume) ** (1.0 / p)


def as_density(f: ScalarField, tol: float = 1e-12) -> ScalarField:
    """Check the probability-density invariants and return f unchanged.

    Raises:
        ValueError: on negative cells or mass deviating from 1 by more
            than ``tol``.
    """
    if f.values.min() < 0:
        raise ValueError(f"density has negative cells (min {f.values.min():.3e})")
    m = f.mass()
    if abs(m - 1.0) > tol:
        raise ValueError(f"density mass {m!r} deviates from 1 beyond {tol:.1e}")
    return f


def vector_dot(v: VectorField, w: VectorField) -> float:
    """Volume-weighted L2 inner product of two vector fields."""
    return float((v.values * w.values).sum() * v.grid.cell_volume)


def vector_l2(v: VectorField) -> float:
    """Volume-weighted L2 norm of a vector field."""
    return math.sqrt(max(vector_dot(v, v), 0.0))


def is_admissible(v: VectorField, tol: float = 0.0) -> bool:
    """True when normal components vanish in wall-adjacent cells."""
    for axis in range(v.grid.dim):
        comp = v.component(axis)
        first = np.take(comp, 0, axis=axis)
        last = np.take(comp, -1, axis=axis)
        if np.abs(first).max(initial=0.0) > tol or np.abs(last).max(initial=0.0) > tol:
            return False
    return True


def project_admissible(values: np.ndarray, grid: GridSpec) -> np.ndarray:
    """Zero the normal component in wall-adjacent cells, in place."""
    for axis in range(grid.dim):
        comp = values[..., axis]
        sl_first = [slice(None)] * grid.dim
        sl_last = [slice(None)] * grid.dim
        sl_first[axis] = 0
        sl_last[axis] = grid.cells[axis] - 1
        comp[tuple(sl_first)] = 0.0
        comp[tuple(sl_last)] = 0.0
    return values


def _axis_gradient(values: np.ndarray, h: float, axis: int, boundary: str) -> np.ndarray:
    """Centered difference along one axis with ghost closure.

    boundary "box": reflected ghosts, so wall cells use (f[1]-f[0])/(2h);
    boundary "periodic": wraparound (shadow torus used by symmetry tests).
    """
    if boundary == "periodic":
        return (np.roll(values, -1, axis=axis) - np.roll(values, 1, axis=axis)) / (2.0 * h)
    out = np.empty_like(values)
    n = values.shape[axis]
    sl = lambda a, b: tuple(
        slice(a, b) if ax == axis else slice(None) for ax in range(values.ndim)
    )
    out[sl(1, n - 1)] = (values[sl(2, n)] - values[sl(0, n - 2)]) / (2.0 * h)
    out[sl(0, 1)] = (values[sl(1, 2)] - values[sl(0, 1)]) / (2.0 * h)
    out[sl(n - 1, n)] = (values[sl(n - 1, n)] - values[sl(n - 2, n - 1)]) / (2.0 * h)
    return out


def gradient(f: ScalarField, boundary: str = "box") -> VectorField:
    """Cell-centered gradient with Neumann ghost closure at walls.

    The wall-cell value (f[1]-f[0])/(2h) is the centered stencil with the
    reflected ghost substituted; it is the unique closure that makes
    divergence the exact negative adjoint (summation by parts).
    """
    g = f.grid
    comps = [_axis_gradient(f.values, g.h[a], a, boundary) for a in range(g.dim)]
    return VectorField(g, np.stack(comps, axis=-1))


def _face_flux_divergence(face_fluxes: list[np.ndarray], grid: GridSpec) -> np.ndarray:
    """Sum of per-axis face-flux differences over each cell volume.

    ``face_fluxes[a]`` holds all faces along axis a including the two
    walls, shape of the grid with axis a extended by one. Wall entries
    are expected to be zero for conservation; this routine just
    differences them, so any zero-flux guarantee lives with the caller.
    """
    out = np.zeros(grid.shape)
    for a in range(grid.dim):
        out += np.diff(face_fluxes[a], axis=a) / grid.h[a]
    return out


def _interior_face_average(values: np.ndarray, axis: int) -> np.ndarray:
    sl = lambda a, b: tuple(
        slice(a, b) if ax == axis else slice(None) for ax in range(values.ndim)
    )
    n = values.shape[axis]
    return 0.5 * (values[sl(0, n - 1)] + values[sl(1, n)])


def _with_wall_faces(interior: np.ndarray, axis: int) -> np.ndarray:
    """Pad interior face values with zero wall faces along ``axis``."""
    pad = [(0, 0)] * interior.ndim
    pad[axis] = (1, 1)
    return np.pad(interior, pad)


def divergence(v: VectorField, boundary: str = "box") -> ScalarField:
    """Conservative divergence: net face flux per cell volume.

    Face values are arithmetic means of the adjacent cells; wall faces
    carry zero flux, so ``integrate(divergence(v)) == 0`` exactly.
    """
    g = v.grid
    if boundary == "periodic":
        out = np.zeros(g.shape)
        for a in range(g.dim):
            comp = v.component(a)
            face = 0.5 * (comp + np.roll(comp, -1, axis=a))
            out += (face - np.roll(face, 1, axis=a)) / g.h[a]
        return ScalarField(g, out)
    fluxes = [
        _with_wall_faces(_interior_face_average(v.component(a), a), a) for a in range(g.dim)
    ]
    return ScalarField(g, _face_flux_divergence(fluxes, g))


def _face_gradient(values: np.ndarray, h: float, axis: int) -> np.ndarray:
    """Interior-face normal gradients (f[i+1]-f[i])/h along one axis."""
    sl = lambda a, b: tuple(
        slice(a, b) if ax == axis else slice(None) for ax in range(values.ndim)
    )
    n = values.shape[axis]
    return (values[sl(1, n)] - values[sl(0, n - 1)]) / h


def laplacian(f: ScalarField, boundary: str = "box") -> ScalarField:
    """Compact Neumann Laplacian: divergence of face gradients.

    Homogeneous Neumann walls mean zero-gradient wall faces, which yields
    the familiar 3-point (1D) / 5-point (2D) stencil with reflected
    ghosts. Sharing the face-flux divergence with :func:`divergence`
    makes it exactly symmetric, mass-free, and negative semidefinite.
    """
    g = f.grid
    if boundary == "periodic":
        out = np.zeros(g.shape)
        for a in range(g.dim):
            face = (np.roll(f.values, -1, axis=a) - f.values) / g.h[a]
            out += (face - np.roll(face, 1, axis=a)) / g.h[a]
        return ScalarField(g, out)
    fluxes = [
        _with_wall_faces(_face_gradient(f.values, g.h[a], a), a) for a in range(g.dim)
    ]
    return ScalarField(g, _face_flux_divergence(fluxes, g))


def dirichlet_energy(f: ScalarField) -> float:
    """Face-gradient energy sum_faces |grad_n f|^2 * volume.

    This is the quadrature paired with :func:`laplacian`:
    ``dirichlet_energy(f) == -dot(laplacian(f), f)`` to rounding.
    """
    g = f.grid
    total = 0.0
    for a in range(g.dim):
        fg = _face_gradient(f.values, g.h[a], a)
        total += float((fg * fg).sum()) * g.cell_volume
    return total


def jet_arrays(f: ScalarField, order: int, boundary: str = "box"):
    """Whole-grid jet data: (values, gradients, hessians) arrays.

    gradients has shape ``shape + (dim,)``; hessians ``shape + (dim, dim)``.
    Entries above ``order`` are None. Second derivatives are centered
    differences of the first, so the mixed entries are symmetric by
    construction.
    """
    if order not in (0, 1, 2):
        raise ValueError(f"jet order must be 0, 1, or 2, got {order}")
    grads = hess = None
    if order >= 1:
        grads = gradient(f, boundary=boundary).values
    if order == 2:
        g = f.grid
        d = g.dim
        hess = np.empty(g.shape + (d, d))
        for a in range(d):
            for b in range(d):
                hess[..., a, b] = _axis_gradient(grads[..., b], g.h[a], a, boundary)
        # mixed entries commute only to rounding; symmetrize so jets validate
        hess = 0.5 * (hess + np.swapaxes(hess, -1, -2))
    return f.values, grads, hess


def jet_at(f: ScalarField, index: tuple[int, ...] | int, order: int = 1,
           boundary: str = "box") -> Jet:
    """Jet of f at one cell (value, gradient, optional hessian)."""
    if isinstance(index, int):
        index = (index,)
    values, grads, hess = jet_arrays(f, order, boundary=boundary)
    value = float(values[index])
    gvec = None if grads is None else grads[index].copy()
    hmat = None if hess is None else hess[index].copy()
    return Jet(order=order, value=value, gradient=gvec, hessian=hmat)
