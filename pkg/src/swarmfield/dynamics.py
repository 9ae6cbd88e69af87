"""Closed-loop integration of the continuity equation.

The density obeys d rho / dt = -div(rho v) with v supplied each step by
a controller. The update is the first-order conservative upwind
finite-volume scheme: face velocity is the arithmetic mean of the two
adjacent cells, the transported density is taken from the upwind side,
and wall faces carry zero flux, so total mass is conserved to rounding
no matter what the controller does.

Time-step selection layers three caps. The advective CFL number is the
classical one (cfl_dt). Controllers that declare a diffusive feedback
scale (the error-gradient law linearizes to the heat equation) also get
a parabolic cap proportional to h^2, without which the closed loop is
unconditionally unstable at any fixed CFL number. Order-0 laws are
guarded by their characteristic speed |k + rho dk/drho|, since max|v|
vanishes near the fixed point while perturbations still propagate.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from .controllers import Controller, apply
from .errors import NonFiniteStateError, PositivityLossWarning
from .grid import GridSpec, ScalarField, VectorField, vector_l2

__all__ = [
    "IntegratorConfig",
    "Trajectory",
    "cfl_dt",
    "select_dt",
    "step_continuity",
    "simulate",
]

_SPEED_FLOOR = 1e-12


@dataclass
class IntegratorConfig:
    """Closed-loop run settings.

    Attributes:
        t_end: final time, positive.
        cfl: Courant number in (0, 1).
        max_steps: hard cap on step count.
        dt_override: fixed dt for convergence studies; still clipped to
            the remaining time.
        sample_stride: record every this-many steps (first and last
            states are always recorded).
    """

    t_end: float
    cfl: float = 0.45
    max_steps: int = 5_000_000
    dt_override: float | None = None
    sample_stride: int = 10

    def __post_init__(self):
        if not 0.0 < self.cfl < 1.0:
            raise ValueError(f"cfl must lie in (0, 1), got {self.cfl}")
        if self.t_end <= 0.0:
            raise ValueError(f"t_end must be positive, got {self.t_end}")
        if self.max_steps < 1:
            raise ValueError(f"max_steps must be >= 1, got {self.max_steps}")
        if self.dt_override is not None and self.dt_override <= 0.0:
            raise ValueError(f"dt_override must be positive, got {self.dt_override}")
        if self.sample_stride < 1:
            raise ValueError(f"sample_stride must be >= 1, got {self.sample_stride}")


@dataclass
class Trajectory:
    """Sampled history of a closed-loop run.

    densities/controls hold one snapshot per sample; masses and times
    align with them. effort_integral is the running sum of
    ||v||_L2 * dt over every step (not just samples), and min_density is
    the minimum cell value seen at any step.
    """

    grid: GridSpec
    times: np.ndarray
    densities: list[ScalarField]
    controls: list[VectorField]
    masses: np.ndarray
    sample_stride: int
    effort_integral: float
    effort_times: np.ndarray
    effort_series: np.ndarray
    min_density: float
    step_count: int

    def errors_l2(self, mu: ScalarField) -> np.ndarray:
        vol = self.grid.cell_volume
        return np.array(
            [np.sqrt(((d.values - mu.values) ** 2).sum() * vol) for d in self.densities]
        )


def cfl_dt(v: VectorField, grid: GridSpec, cfl: float) -> float:
    """Advective CFL step: cfl * min(h) / max(|v|, floor)."""
    speed = max(v.max_speed(), _SPEED_FLOOR)
    return cfl * grid.min_h / speed


def select_dt(
    v: VectorField,
    controller: Controller,
    grid: GridSpec,
    config: IntegratorConfig,
    remaining: float,
    char_speed: float | None = None,
) -> float:
    """Advective CFL with parabolic / characteristic-speed guards."""
    if config.dt_override is not None:
        return min(config.dt_override, remaining)
    dt = cfl_dt(v, grid, config.cfl)
    if controller.diffusion_scale > 0.0:
        dt = min(
            dt,
            config.cfl * grid.min_h**2 / (grid.dim * controller.diffusion_scale),
        )
    if char_speed is not None and char_speed > _SPEED_FLOOR:
        dt = min(dt, config.cfl * grid.min_h / char_speed)
    return min(dt, remaining)


def _upwind_face_fluxes(rho: np.ndarray, v: np.ndarray, axis: int) -> np.ndarray:
    """Interior-face fluxes rho_upwind * v_face along one axis."""
    sl = lambda a, b: tuple(
        slice(a, b) if ax == axis else slice(None) for ax in range(rho.ndim)
    )
    n = rho.shape[axis]
    v_face = 0.5 * (v[sl(0, n - 1)] + v[sl(1, n)])
    rho_up = np.where(v_face > 0.0, rho[sl(0, n - 1)], rho[sl(1, n)])
    return rho_up * v_face


def step_continuity(rho: ScalarField, v: VectorField, dt: float) -> ScalarField:
    """One conservative upwind step of d rho/dt = -div(rho v).

    Wall faces carry zero flux regardless of v, so mass is conserved
    exactly; with v identically zero the state is returned bitwise
    unchanged. Raises NonFiniteStateError if the update leaves the
    finite range; emits PositivityLossWarning if cells go negative.
    """
    grid = rho.grid
    if dt < 0.0:
        raise ValueError(f"dt must be nonnegative, got {dt}")
    new = rho.values.copy()
    for a in range(grid.dim):
        flux = _upwind_face_fluxes(rho.values, v.component(a), a)
        pad = [(0, 0)] * grid.dim
        pad[a] = (1, 1)
        flux = np.pad(flux, pad)
        new -= (dt / grid.h[a]) * np.diff(flux, axis=a)
    if not np.all(np.isfinite(new)):
        raise NonFiniteStateError("density became non-finite during a step")
    if new.min() < 0.0:
        warnings.warn(
            f"positivity lost: min density {new.min():.3e}", PositivityLossWarning,
            stacklevel=2,
        )
    return ScalarField(grid, new)


def simulate(
    rho0: ScalarField,
    controller: Controller,
    mu: ScalarField,
    config: IntegratorConfig,
) -> Trajectory:
    """Run the closed loop to t_end, sampling every sample_stride steps.

    The control field is recomputed from the current density every step
    and the step size follows select_dt. Controller errors propagate;
    a non-finite state aborts with the partial trajectory attached to
    the raised NonFiniteStateError.
    """
    grid = rho0.grid
    vol = grid.cell_volume
    rho = rho0.copy()

    times = [0.0]
    densities = [rho.copy()]
    controls: list[VectorField] = []
    masses = [rho.mass()]
    effort = 0.0
    effort_times = [0.0]
    effort_series = [0.0]
    min_density = float(rho.values.min())

    t = 0.0
    steps = 0
    tiny = 1e-14 * max(config.t_end, 1.0)

    def _package() -> Trajectory:
        return Trajectory(
            grid=grid,
            times=np.asarray(times),
            densities=densities,
            controls=controls,
            masses=np.asarray(masses),
            sample_stride=config.sample_stride,
            effort_integral=effort,
            effort_times=np.asarray(effort_times),
            effort_series=np.asarray(effort_series),
            min_density=min_density,
            step_count=steps,
        )

    v = apply(controller, rho, mu)
    controls.append(v.copy())
    points = grid.points()

    while t < config.t_end - tiny and steps < config.max_steps:
        char = controller.characteristic_speed(
            points, (rho.values, None), (mu.values, None)
        ) if controller.order == 0 else None
        dt = select_dt(v, controller, grid, config, config.t_end - t, char_speed=char)
        effort += vector_l2(v) * dt
        try:
            rho = step_continuity(rho, v, dt)
        except NonFiniteStateError as err:
            raise NonFiniteStateError(str(err), trajectory=_package()) from None
        t += dt
        steps += 1
        min_density = min(min_density, float(rho.values.min()))
        effort_times.append(t)
        effort_series.append(effort)
        v = apply(controller, rho, mu)
        if steps % config.sample_stride == 0 or t >= config.t_end - tiny:
            times.append(t)
            densities.append(rho.copy())
            controls.append(v.copy())
            masses.append(float(rho.values.sum() * vol))

    if times[-1] != t:  # max_steps exit between samples
        times.append(t)
        densities.append(rho.copy())
        controls.append(v.copy())
        masses.append(float(rho.values.sum() * vol))

    return _package()
