"""Finite-agent bridge: swarms that realize the continuum feedback loop.

Agents are sampled from a density, carry no state beyond position, and
move under the same control law as the continuum run: each step builds a
smoothed density estimate from the swarm, evaluates the controller on
the grid from that estimate, and advances every agent by the velocity of
its containing cell. Walls act by reflection, the particle reading of
the zero-flux condition.

The density estimate is a boundary-reflected Gaussian kernel smoother,
computed by binning agents to cells and filtering; controllers need a
differentiable estimate for their jets, which rules out raw histograms.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.ndimage import gaussian_filter

from .controllers import Controller, apply
from .dynamics import IntegratorConfig, select_dt
from .grid import GridSpec, ScalarField, VectorField, as_density
from .metrics import w2_1d, w2_exact_small

__all__ = [
    "AgentSet",
    "KdeConfig",
    "AgentTrajectory",
    "sample_density",
    "kde_density",
    "step_agents",
    "simulate_agents",
    "empirical_vs_continuum",
]


@dataclass
class AgentSet:
    """Positions of N identical agents in the box.

    clamp_count / clamp_max report how many constructor positions had to
    be pulled back inside the box and by how far; downstream steps keep
    agents inside by reflection, so nonzero values point at the caller.
    """

    positions: np.ndarray
    seed: int
    clamp_count: int = 0
    clamp_max: float = 0.0

    @property
    def n(self) -> int:
        return self.positions.shape[0]

    @property
    def dim(self) -> int:
        return self.positions.shape[1]

    def copy(self) -> "AgentSet":
        return AgentSet(self.positions.copy(), self.seed, self.clamp_count, self.clamp_max)


def _clamped(positions: np.ndarray, extents) -> tuple[np.ndarray, int, float]:
    out = positions.copy()
    worst = 0.0
    moved = np.zeros(len(out), dtype=bool)
    for a, L in enumerate(extents):
        lo = out[:, a] < 0.0
        hi = out[:, a] > L
        if lo.any():
            worst = max(worst, float(-out[lo, a].min()))
        if hi.any():
            worst = max(worst, float(out[hi, a].max() - L))
        moved |= lo | hi
        np.clip(out[:, a], 0.0, L, out=out[:, a])
    return out, int(moved.sum()), worst


@dataclass(frozen=True)
class KdeConfig:
    """Smoothing parameters for the swarm density estimate.

    bandwidth is the Gaussian sigma in length units; the only kernel is
    the boundary-reflected Gaussian. Estimates narrower than half a cell
    would be invisible to the grid, so kde_density rejects them.
    """

    bandwidth: float
    kernel: str = "gaussian-reflected"

    def __post_init__(self):
        if self.bandwidth <= 0:
            raise ValueError(f"bandwidth must be positive, got {self.bandwidth}")
        if self.kernel != "gaussian-reflected":
            raise ValueError(f"unknown kernel {self.kernel!r}")


def _default_kde(grid: GridSpec) -> KdeConfig:
    return KdeConfig(bandwidth=2.0 * grid.min_h)


@dataclass
class AgentTrajectory:
    """Sampled swarm history, mirroring the continuum Trajectory."""

    times: list[float] = field(default_factory=list)
    snapshots: list[AgentSet] = field(default_factory=list)
    step_count: int = 0

    def final(self) -> AgentSet:
        return self.snapshots[-1]


def sample_density(rho: ScalarField, n: int, seed: int) -> AgentSet:
    """Draw n agent positions from a unit-mass density.

    1D inverts the piecewise-linear CDF at stratified-free uniform draws;
    2D allocates agents to cells by a single multinomial draw and jitters
    them uniformly within their cell. Both are fully determined by seed.
    """
    grid = rho.grid
    as_density(rho)  # raises on negative cells / mass drift
    if n < 10:
        raise ValueError(f"need at least 10 agents, got {n}")
    rng = np.random.default_rng(seed)

    if grid.dim == 1:
        masses = rho.values * grid.cell_volume
        edges = np.linspace(0.0, grid.extents[0], grid.total_cells + 1)
        cdf = np.concatenate([[0.0], np.cumsum(masses)])
        cdf /= cdf[-1]
        u = rng.random(n)
        pos = np.interp(u, cdf, edges)[:, None]
    else:
        probs = (rho.values * grid.cell_volume).ravel()
        probs = probs / probs.sum()
        counts = rng.multinomial(n, probs)
        cells = np.repeat(np.arange(probs.size), counts)
        idx = np.unravel_index(cells, grid.shape)
        jitter = rng.random((n, grid.dim))
        pos = np.stack(
            [(idx[a] + jitter[:, a]) * grid.h[a] for a in range(grid.dim)], axis=-1
        )

    pos, count, worst = _clamped(pos, grid.extents)
    return AgentSet(positions=pos, seed=seed, clamp_count=count, clamp_max=worst)


def _bin_counts(agents: AgentSet, grid: GridSpec) -> np.ndarray:
    idx = []
    for a in range(grid.dim):
        i = np.floor(agents.positions[:, a] / grid.h[a]).astype(np.intp)
        idx.append(np.clip(i, 0, grid.cells[a] - 1))
    flat = np.ravel_multi_index(tuple(idx), grid.shape)
    return np.bincount(flat, minlength=grid.total_cells).reshape(grid.shape).astype(float)


def kde_density(agents: AgentSet, grid: GridSpec, kde: KdeConfig | None = None) -> ScalarField:
    """Boundary-reflected Gaussian density estimate of the swarm.

    Agents are binned to cells and the counts filtered with a Gaussian of
    sigma = bandwidth, reflected at walls so no mass leaks; the result is
    renormalized to unit mass exactly.
    """
    if agents.n < 10:
        raise ValueError(f"need at least 10 agents, got {agents.n}")
    kde = _default_kde(grid) if kde is None else kde
    if kde.bandwidth < grid.min_h / 2:
        raise ValueError(
            f"bandwidth {kde.bandwidth:.3e} below half a cell ({grid.min_h / 2:.3e})"
        )
    counts = _bin_counts(agents, grid)
    sigma_cells = [kde.bandwidth / grid.h[a] for a in range(grid.dim)]
    vals = gaussian_filter(counts, sigma=sigma_cells, mode="reflect")
    vals = np.maximum(vals, 0.0)
    vals /= vals.sum() * grid.cell_volume
    return ScalarField(grid, vals)


def _reflect(positions: np.ndarray, extents) -> np.ndarray:
    # fold into [0, 2L) then mirror the upper half; exact for any overshoot
    out = positions.copy()
    for a, L in enumerate(extents):
        x = np.remainder(out[:, a], 2.0 * L)
        out[:, a] = np.where(x > L, 2.0 * L - x, x)
    return out


def _containing_cell_velocity(v: VectorField, agents: AgentSet) -> np.ndarray:
    grid = v.grid
    idx = []
    for a in range(grid.dim):
        i = np.floor(agents.positions[:, a] / grid.h[a]).astype(np.intp)
        idx.append(np.clip(i, 0, grid.cells[a] - 1))
    return v.values[tuple(idx)]


def step_agents(
    agents: AgentSet,
    controller: Controller,
    mu: ScalarField,
    dt: float,
    kde: KdeConfig | None = None,
) -> AgentSet:
    """One forward-Euler step of the swarm under the control law.

    The controller sees the smoothed swarm density, exactly as the
    continuum loop sees rho; each agent then moves by dt times the
    velocity of its containing cell. Wall crossings reflect.
    """
    if controller.order > 1:
        raise ValueError("agent stepping supports controllers of order <= 1")
    grid = mu.grid
    rho_hat = kde_density(agents, grid, kde)
    v = apply(controller, rho_hat, mu)
    moved = agents.positions + dt * _containing_cell_velocity(v, agents)
    moved = _reflect(moved, grid.extents)
    return AgentSet(positions=moved, seed=agents.seed)


def simulate_agents(
    agents: AgentSet,
    controller: Controller,
    mu: ScalarField,
    config: IntegratorConfig,
    kde: KdeConfig | None = None,
) -> AgentTrajectory:
    """March the swarm to t_end with the continuum step-size policy.

    Time steps come from the same selector as the density solver (CFL
    plus the controller's stability caps), so agent and continuum runs
    share comparable time grids. Snapshots are kept every sample_stride
    steps plus the endpoints.
    """
    grid = mu.grid
    kde = _default_kde(grid) if kde is None else kde
    traj = AgentTrajectory()
    traj.times.append(0.0)
    traj.snapshots.append(agents.copy())

    t = 0.0
    state = agents
    steps = 0
    while t < config.t_end - 1e-14 * config.t_end:
        rho_hat = kde_density(state, grid, kde)
        v = apply(controller, rho_hat, mu)
        dt = select_dt(v, controller, grid, config, config.t_end - t)
        moved = state.positions + dt * _containing_cell_velocity(v, state)
        state = AgentSet(positions=_reflect(moved, grid.extents), seed=state.seed)
        t += dt
        steps += 1
        if steps >= config.max_steps:
            raise RuntimeError(f"agent run exceeded max_steps={config.max_steps}")
        if steps % config.sample_stride == 0:
            traj.times.append(t)
            traj.snapshots.append(state.copy())
    if traj.times[-1] != t:
        traj.times.append(t)
        traj.snapshots.append(state.copy())
    traj.step_count = steps
    return traj


def empirical_vs_continuum(
    agents: AgentSet,
    rho_t: ScalarField,
    kde: KdeConfig | None = None,
) -> float:
    """Transport distance between the swarm's estimate and a density."""
    grid = rho_t.grid
    rho_hat = kde_density(agents, grid, kde)
    if grid.dim == 1:
        return w2_1d(rho_hat, rho_t)
    return w2_exact_small(rho_hat, rho_t)[0]
