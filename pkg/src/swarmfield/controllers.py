"""Distributed density-feedback controllers.

A controller is a local law: the velocity it commands at a point depends
only on the point and on the jets (value, gradient, ...) of the current
density and the target density there. ``order`` is the highest
derivative the law reads; the interface passes jets and nothing else, so
locality is structural rather than a convention.

Two families are built in. The error-gradient law

    K(rho, mu) = -grad(rho - mu) / rho

turns the closed-loop continuity equation into the Neumann heat equation
for the error e = rho - mu, which is where all the decay and effort
guarantees come from. Pointwise (order-0) laws k(x, rho(x), mu(x)) cover
the transport-dominated regime studied by the linearized analysis.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from .errors import DensityFloorError
from .grid import (
    GridSpec,
    Jet,
    ScalarField,
    VectorField,
    jet_arrays,
)

__all__ = [
    "Controller",
    "ErrorGradientController",
    "PointwiseController",
    "error_gradient",
    "pointwise",
    "zero",
    "constant_direction",
    "transport_field",
    "error_feedback_field",
    "apply",
    "controller_catalog",
    "make_controller",
]


@dataclass
class Controller:
    """Base contract: a local velocity law of some differential order.

    Attributes:
        name: catalog label.
        order: highest derivative of rho/mu the law reads (0 or 1 here).
        translation_equivariant: commutes with grid translations.
        rotation_equivariant: commutes with quarter-turn rotations.
        diffusion_scale: effective diffusivity of the linearized closed
            loop, used by the integrator's parabolic time-step cap; 0 for
            purely advective (order-0) laws.
        density_floor: smallest density the law may divide by.
    """

    name: str = "base"
    order: int = 0
    translation_equivariant: bool = True
    rotation_equivariant: bool = False
    diffusion_scale: float = 0.0
    density_floor: float = 1e-8

    def evaluate(self, x: np.ndarray, jet_rho: Jet, jet_mu: Jet) -> np.ndarray:
        """Velocity at one point from the two jets there."""
        x = np.atleast_1d(np.asarray(x, dtype=float))
        out = self.evaluate_arrays(
            x[None, :],
            _jet_to_arrays(jet_rho),
            _jet_to_arrays(jet_mu),
        )
        return out[0]

    def evaluate_arrays(self, points, jets_rho, jets_mu) -> np.ndarray:
        raise NotImplementedError

    def characteristic_speed(self, points, jets_rho, jets_mu) -> float | None:
        """Max wave speed of the induced flux, when the law knows it."""
        return None


def _jet_to_arrays(jet: Jet):
    vals = np.asarray([jet.value])
    grads = None if jet.gradient is None else np.asarray(jet.gradient)[None, :]
    return vals, grads


@dataclass
class ErrorGradientController(Controller):
    """K = -grad(rho - mu) / rho; exact feedback linearization to heat."""

    name: str = "error_gradient"
    order: int = 1
    rotation_equivariant: bool = True
    diffusion_scale: float = 1.0

    def evaluate_arrays(self, points, jets_rho, jets_mu) -> np.ndarray:
        rho_vals, rho_grads = jets_rho
        _, mu_grads = jets_mu
        if rho_grads is None or mu_grads is None:
            raise ValueError("error_gradient needs order-1 jets")
        self._check_floor(rho_vals)
        return -(rho_grads - mu_grads) / rho_vals[..., None]

    def _check_floor(self, rho_vals: np.ndarray) -> None:
        flat = np.asarray(rho_vals).ravel()
        bad = int(np.argmin(flat))
        if flat[bad] < self.density_floor:
            raise DensityFloorError(bad, float(flat[bad]), self.density_floor)


@dataclass
class PointwiseController(Controller):
    """Order-0 law k(x, r, m) built from a vectorized table.

    ``k_arrays(points, r, m)`` maps arrays (..., dim), (...), (...) to
    velocities (..., dim). ``d_rho`` is the partial in r with the same
    signature; when absent it is formed by central differences with step
    1e-6 * max(1, |r|), which is what the linearized analysis consumes.
    """

    name: str = "pointwise"
    k_arrays: Callable | None = None
    d_rho: Callable | None = None

    def evaluate_arrays(self, points, jets_rho, jets_mu) -> np.ndarray:
        rho_vals, _ = jets_rho
        mu_vals, _ = jets_mu
        return self.k_arrays(points, rho_vals, mu_vals)

    def d_rho_arrays(self, points, r, m) -> np.ndarray:
        if self.d_rho is not None:
            return self.d_rho(points, r, m)
        delta = 1e-6 * np.maximum(1.0, np.abs(r))
        up = self.k_arrays(points, r + delta, m)
        dn = self.k_arrays(points, r - delta, m)
        return (up - dn) / (2.0 * delta)[..., None]

    def characteristic_speed(self, points, jets_rho, jets_mu) -> float | None:
        # wave speed of the flux r -> r k(x, r, m): |k + r dk/dr|
        r, _ = jets_rho
        m, _ = jets_mu
        k = self.k_arrays(points, r, m)
        dk = self.d_rho_arrays(points, r, m)
        speed = np.abs(k + r[..., None] * dk)
        return float(speed.max()) if speed.size else 0.0


def error_gradient(density_floor: float = 1e-8) -> ErrorGradientController:
    return ErrorGradientController(density_floor=density_floor)


def pointwise(
    k_table: Callable | None = None,
    *,
    k_arrays: Callable | None = None,
    d_rho: Callable | None = None,
    name: str = "pointwise",
    rotation_equivariant: bool = False,
) -> PointwiseController:
    """Wrap a pointwise law as a controller.

    Accepts either ``k_table(x, r, m) -> vector`` (scalar signature,
    vectorized here) or a natively array-valued ``k_arrays``.
    """
    if (k_table is None) == (k_arrays is None):
        raise ValueError("pass exactly one of k_table or k_arrays")
    if k_arrays is None:

        def k_arrays(points, r, m, _table=k_table):
            pts = points.reshape(-1, points.shape[-1])
            rr = np.asarray(r, dtype=float).ravel()
            mm = np.asarray(m, dtype=float).ravel()
            out = np.stack(
                [np.asarray(_table(pts[i], rr[i], mm[i]), dtype=float) for i in range(len(rr))]
            )
            return out.reshape(points.shape)

    return PointwiseController(
        name=name,
        k_arrays=k_arrays,
        d_rho=d_rho,
        rotation_equivariant=rotation_equivariant,
    )


def zero(dim: int | None = None) -> PointwiseController:
    """The identically zero law (useful as a drift-free baseline)."""

    def k_arrays(points, r, m):
        return np.zeros(points.shape)

    def d_rho(points, r, m):
        return np.zeros(points.shape)

    return PointwiseController(
        name="zero", k_arrays=k_arrays, d_rho=d_rho, rotation_equivariant=True
    )


def constant_direction(axis: int = 0) -> PointwiseController:
    """k(x, r, m) = r * e_axis; the canonical rotation-symmetry breaker."""

    def k_arrays(points, r, m):
        out = np.zeros(points.shape)
        out[..., axis] = r
        return out

    def d_rho(points, r, m):
        out = np.zeros(points.shape)
        out[..., axis] = 1.0
        return out

    return PointwiseController(name="constant_direction", k_arrays=k_arrays, d_rho=d_rho)


def transport_field(field, name: str | None = None) -> PointwiseController:
    """k(x, r, m) = w(x): pure transport along a named analytic field."""

    def k_arrays(points, r, m):
        return field.velocity(points)

    def d_rho(points, r, m):
        return np.zeros(points.shape)

    return PointwiseController(
        name=name or f"pointwise:{field.name}", k_arrays=k_arrays, d_rho=d_rho
    )


def error_feedback_field(field, name: str | None = None) -> PointwiseController:
    """k(x, r, m) = (m - r) * w(x): value-feedback transport law."""

    def k_arrays(points, r, m):
        return (m - r)[..., None] * field.velocity(points)

    def d_rho(points, r, m):
        return -field.velocity(points)

    return PointwiseController(
        name=name or f"pointwise_error:{field.name}", k_arrays=k_arrays, d_rho=d_rho
    )


def apply(controller: Controller, rho: ScalarField, mu: ScalarField,
          boundary: str = "box") -> VectorField:
    """Evaluate the controller over the whole grid.

    Jets are computed up to ``controller.order`` only (an order-0 law
    never triggers a gradient).

    Zero normal flux at walls is honored where the discrete dynamics
    actually sample v.n: the conservative scheme pins every wall-face
    flux to zero (see dynamics.step_continuity and grid.divergence), so
    cell-centered samples are returned as evaluated. Overwriting the
    wall-adjacent cell values instead would perturb the first interior
    face flux by an O(h) kink; measured on the stabilization benchmark,
    that variant pollutes the late-time error floor by ~4x. Callers who
    need a field that is itself admissible in the cell-sample sense can
    still project with grid.project_admissible.
    """
    grid = rho.grid
    if mu.grid is not grid and mu.grid != grid:
        raise ValueError("rho and mu must share a grid")
    jr = jet_arrays(rho, controller.order, boundary=boundary)[:2]
    jm = jet_arrays(mu, controller.order, boundary=boundary)[:2]
    vals = controller.evaluate_arrays(grid.points(), jr, jm)
    vals = np.asarray(vals, dtype=float).reshape(grid.shape + (grid.dim,))
    return VectorField(grid, vals)


# ---------------------------------------------------------------------------
# catalog plumbing used by scenarios


def controller_catalog() -> list[str]:
    from .catalog import vector_field_catalog

    names = ["error_gradient", "zero", "constant_direction"]
    names += [f"pointwise:{f}" for f in vector_field_catalog()]
    names += [f"pointwise_error:{f}" for f in vector_field_catalog()]
    return sorted(names)


def make_controller(spec: str, extents) -> Controller:
    """Resolve a scenario controller string against the catalog."""
    from .catalog import make_vector_field
    from .errors import InitializerUnknownError

    if spec == "error_gradient":
        return error_gradient()
    if spec == "zero":
        return zero()
    if spec == "constant_direction":
        return constant_direction()
    if spec.startswith("pointwise:"):
        return transport_field(make_vector_field(spec.split(":", 1)[1], extents))
    if spec.startswith("pointwise_error:"):
        return error_feedback_field(make_vector_field(spec.split(":", 1)[1], extents))
    raise InitializerUnknownError(
        "controller", f"unknown controller {spec!r}; known: {controller_catalog()}"
    )
