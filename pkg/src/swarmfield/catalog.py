"""Built-in initializers, analytic stream fields, and test functions.

Everything a scenario can name lives here: unit-mass density
initializers, the named velocity fields (as analytic objects so flow
integration does not pay interpolation error), and a small dictionary of
scalar functions used by transport and pairing diagnostics.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from .errors import InitializerUnknownError
from .grid import GridSpec, ScalarField, VectorField

__all__ = [
    "AnalyticVectorField",
    "make_density",
    "make_error_field",
    "make_vector_field",
    "scalar_function",
    "density_catalog",
    "vector_field_catalog",
    "scalar_function_catalog",
]


# ---------------------------------------------------------------------------
# density initializers


def _uniform(grid: GridSpec, params: dict) -> np.ndarray:
    return np.full(grid.shape, 1.0 / grid.volume)


def _cosine_bump(grid: GridSpec, params: dict) -> np.ndarray:
    """1/vol * (1 + amplitude * prod_a cos(pi m_a x_a / L_a)).

    Unit mass is exact because every nonconstant half-period cosine sums
    to zero over the symmetric cell centers.
    """
    amplitude = float(params.get("amplitude", 0.3))
    modes = params.get("modes")
    if modes is None:
        modes = [1] + [0] * (grid.dim - 1)
    if abs(amplitude) >= 1.0:
        raise ValueError(f"cosine amplitude must satisfy |a| < 1, got {amplitude}")
    bump = np.ones(grid.shape)
    meshes = grid.meshes()
    for a in range(grid.dim):
        m = int(modes[a])
        if m:
            bump = bump * np.cos(np.pi * m * meshes[a] / grid.extents[a])
    return (1.0 + amplitude * bump) / grid.volume


def _gaussian(grid: GridSpec, center, sigma) -> np.ndarray:
    meshes = grid.meshes()
    q = np.zeros(grid.shape)
    for a in range(grid.dim):
        q += ((meshes[a] - center[a]) / sigma) ** 2
    return np.exp(-0.5 * q)


def _gaussian_bump(grid: GridSpec, params: dict) -> np.ndarray:
    center = params.get("center", [L / 2 for L in grid.extents])
    sigma = float(params.get("sigma", 0.1 * min(grid.extents)))
    vals = _gaussian(grid, center, sigma)
    return vals / (vals.sum() * grid.cell_volume)


def _two_bumps(grid: GridSpec, params: dict) -> np.ndarray:
    c1 = params.get("center1", [0.3 * L for L in grid.extents])
    c2 = params.get("center2", [0.7 * L for L in grid.extents])
    sigma = float(params.get("sigma", 0.08 * min(grid.extents)))
    w = float(params.get("weight", 0.5))
    if not 0.0 < w < 1.0:
        raise ValueError(f"weight must lie in (0, 1), got {w}")
    g1 = _gaussian(grid, c1, sigma)
    g2 = _gaussian(grid, c2, sigma)
    vals = w * g1 / (g1.sum() * grid.cell_volume) + (1 - w) * g2 / (g2.sum() * grid.cell_volume)
    return vals


_DENSITIES: dict[str, Callable[[GridSpec, dict], np.ndarray]] = {
    "uniform": _uniform,
    "cosine_bump": _cosine_bump,
    "gaussian_bump": _gaussian_bump,
    "two_bumps": _two_bumps,
}


def density_catalog() -> list[str]:
    return sorted(_DENSITIES)


def make_density(grid: GridSpec, kind: str, params: dict | None = None) -> ScalarField:
    """Instantiate a named unit-mass density on the grid."""
    if kind not in _DENSITIES:
        raise InitializerUnknownError(
            "rho0.kind", f"unknown initializer {kind!r}; known: {density_catalog()}"
        )
    vals = _DENSITIES[kind](grid, dict(params or {}))
    if vals.min() < 0:
        raise ValueError(f"initializer {kind!r} produced negative cells")
    return ScalarField(grid, vals)


# ---------------------------------------------------------------------------
# zero-mean error-field initializers (analysis inputs, not densities)


def make_error_field(grid: GridSpec, kind: str, params: dict | None = None) -> ScalarField:
    """Zero-mean scalar field by name; grid sampling of scalar_function."""
    fn = scalar_function(kind, grid.extents, params)
    vals = fn(grid.points())
    vals = vals - vals.mean()
    return ScalarField(grid, vals)


# ---------------------------------------------------------------------------
# analytic vector fields


@dataclass
class AnalyticVectorField:
    """Velocity field given in closed form.

    Attributes:
        name: catalog key.
        dim: spatial dimension.
        extents: box the field is tangent to.
        velocity: points (..., dim) -> velocities (..., dim).
        div: points (..., dim) -> divergence (...,).
        jacobian: points (..., dim) -> d v_i / d x_j, shape (..., dim, dim).
        exact_flow: optional (points, t) -> advected points.
        exact_jacobian_det: optional (points, t) -> det of flow jacobian.
    """

    name: str
    dim: int
    extents: tuple[float, ...]
    velocity: Callable[[np.ndarray], np.ndarray]
    div: Callable[[np.ndarray], np.ndarray]
    jacobian: Callable[[np.ndarray], np.ndarray]
    exact_flow: Callable[[np.ndarray, float], np.ndarray] | None = None
    exact_jacobian_det: Callable[[np.ndarray, float], np.ndarray] | None = None

    def on_grid(self, grid: GridSpec) -> VectorField:
        if grid.dim != self.dim:
            raise ValueError(f"{self.name} is {self.dim}D, grid is {grid.dim}D")
        return VectorField(grid, self.velocity(grid.points()))


def _rotation_stream(extents) -> AnalyticVectorField:
    """Divergence-free recirculation: perpendicular gradient of
    sin(pi x/Lx) sin(pi y/Ly). Tangent to all four walls."""
    Lx, Ly = extents

    def velocity(P):
        x, y = P[..., 0], P[..., 1]
        vx = (np.pi / Ly) * np.sin(np.pi * x / Lx) * np.cos(np.pi * y / Ly)
        vy = -(np.pi / Lx) * np.cos(np.pi * x / Lx) * np.sin(np.pi * y / Ly)
        return np.stack([vx, vy], axis=-1)

    def div(P):
        return np.zeros(P.shape[:-1])

    def jacobian(P):
        x, y = P[..., 0], P[..., 1]
        cx, sx = np.cos(np.pi * x / Lx), np.sin(np.pi * x / Lx)
        cy, sy = np.cos(np.pi * y / Ly), np.sin(np.pi * y / Ly)
        J = np.empty(P.shape[:-1] + (2, 2))
        J[..., 0, 0] = (np.pi**2 / (Lx * Ly)) * cx * cy
        J[..., 0, 1] = -(np.pi**2 / Ly**2) * sx * sy
        J[..., 1, 0] = (np.pi**2 / Lx**2) * sx * sy
        J[..., 1, 1] = -(np.pi**2 / (Lx * Ly)) * cx * cy
        return J

    return AnalyticVectorField("rotation_stream", 2, tuple(extents), velocity, div, jacobian)


def _shear_stream(extents) -> AnalyticVectorField:
    """Two counter-rotating cells (strong shear along the midline):
    perpendicular gradient of sin(pi x/Lx) sin(2 pi y/Ly)."""
    Lx, Ly = extents

    def velocity(P):
        x, y = P[..., 0], P[..., 1]
        vx = (2 * np.pi / Ly) * np.sin(np.pi * x / Lx) * np.cos(2 * np.pi * y / Ly)
        vy = -(np.pi / Lx) * np.cos(np.pi * x / Lx) * np.sin(2 * np.pi * y / Ly)
        return np.stack([vx, vy], axis=-1)

    def div(P):
        return np.zeros(P.shape[:-1])

    def jacobian(P):
        x, y = P[..., 0], P[..., 1]
        cx, sx = np.cos(np.pi * x / Lx), np.sin(np.pi * x / Lx)
        cy, sy = np.cos(2 * np.pi * y / Ly), np.sin(2 * np.pi * y / Ly)
        J = np.empty(P.shape[:-1] + (2, 2))
        J[..., 0, 0] = (2 * np.pi**2 / (Lx * Ly)) * cx * cy
        J[..., 0, 1] = -(4 * np.pi**2 / Ly**2) * sx * sy
        J[..., 1, 0] = (np.pi**2 / Lx**2) * sx * sy
        J[..., 1, 1] = -(2 * np.pi**2 / (Lx * Ly)) * cx * cy
        return J

    return AnalyticVectorField("shear_stream", 2, tuple(extents), velocity, div, jacobian)


def _logistic_1d(extents) -> AnalyticVectorField:
    """b(x) = x (L - x) / L on [0, L]; compressive toward the right wall.

    The flow and its jacobian are closed-form (logistic growth), which
    makes this the reference case for jacobian cross-checks.
    """
    (L,) = extents

    def velocity(P):
        x = P[..., 0]
        return (x * (L - x) / L)[..., None]

    def div(P):
        x = P[..., 0]
        return 1.0 - 2.0 * x / L

    def jacobian(P):
        x = P[..., 0]
        return (1.0 - 2.0 * x / L)[..., None, None]

    def exact_flow(P, t):
        x = P[..., 0] / L
        e = np.exp(t)
        return (L * x * e / (1.0 - x + x * e))[..., None]

    def exact_jacobian_det(P, t):
        x = P[..., 0] / L
        e = np.exp(t)
        return e / (1.0 - x + x * e) ** 2

    return AnalyticVectorField(
        "logistic_1d", 1, tuple(extents), velocity, div, jacobian,
        exact_flow=exact_flow, exact_jacobian_det=exact_jacobian_det,
    )


_VECTOR_FIELDS = {
    "rotation_stream": (_rotation_stream, 2),
    "shear_stream": (_shear_stream, 2),
    "logistic_1d": (_logistic_1d, 1),
}


def vector_field_catalog() -> list[str]:
    return sorted(_VECTOR_FIELDS)


def make_vector_field(name: str, extents) -> AnalyticVectorField:
    """Instantiate a named analytic velocity field for the given box."""
    if name not in _VECTOR_FIELDS:
        raise InitializerUnknownError(
            "field", f"unknown vector field {name!r}; known: {vector_field_catalog()}"
        )
    maker, dim = _VECTOR_FIELDS[name]
    extents = tuple(float(L) for L in extents)
    if len(extents) != dim:
        raise ValueError(f"{name} needs a {dim}D box, got extents {extents}")
    return maker(extents)


# ---------------------------------------------------------------------------
# scalar test functions (analysis probes and transported profiles)


def scalar_function(kind: str, extents, params: dict | None = None):
    """Named scalar callable on the box; points (..., dim) -> values (...).

    Known kinds: "cosine" (product of cos(pi m_a x_a / L_a)),
    "sine_product" (product of sin(2 pi m_a x_a / L_a)),
    "gaussian" (unnormalized bump), "stream_level" (the rotation-stream
    stream function, constant along its orbits).
    """
    params = dict(params or {})
    extents = tuple(float(L) for L in extents)
    dim = len(extents)

    if kind == "cosine":
        modes = params.get("modes", [1] * dim)

        def fn(P):
            out = np.ones(P.shape[:-1])
            for a in range(dim):
                m = int(modes[a])
                if m:
                    out = out * np.cos(np.pi * m * P[..., a] / extents[a])
            return out

        return fn

    if kind == "sine_product":
        modes = params.get("modes", [1] * dim)

        def fn(P):
            out = np.ones(P.shape[:-1])
            for a in range(dim):
                m = int(modes[a])
                if m:
                    out = out * np.sin(2 * np.pi * m * P[..., a] / extents[a])
            return out

        return fn

    if kind == "gaussian":
        center = params.get("center", [L / 2 for L in extents])
        sigma = float(params.get("sigma", 0.1 * min(extents)))

        def fn(P):
            q = np.zeros(P.shape[:-1])
            for a in range(dim):
                q += ((P[..., a] - center[a]) / sigma) ** 2
            return np.exp(-0.5 * q)

        return fn

    if kind == "stream_level":
        if dim != 2:
            raise ValueError("stream_level is a 2D probe")

        def fn(P):
            return np.sin(np.pi * P[..., 0] / extents[0]) * np.sin(np.pi * P[..., 1] / extents[1])

        return fn

    raise InitializerUnknownError(
        "function", f"unknown scalar function {kind!r}; known: {scalar_function_catalog()}"
    )


def scalar_function_catalog() -> list[str]:
    return ["cosine", "gaussian", "sine_product", "stream_level"]
