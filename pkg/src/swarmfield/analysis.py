"""Diagnostics built on characteristic flows of the linearized loop.

The closed loop near its fixed point reduces to linear transport of the
error along a frozen velocity field b. This module computes b from a
pointwise control law, integrates the characteristics of b (forward for
flow maps, backward for transport and correlation quadrature), carries
the volume distortion along via the divergence integral, and packages
the stability diagnostics: diffusion-free transport snapshots, mixing
correlations, weak-convergence pairings, spectral heat references,
decay-rate fits, eigenvalue estimates, and symmetry residuals.

Closed-form catalog fields are integrated through their own callables;
grid-sampled fields fall back to multilinear interpolation, which is
noticeably less accurate over long horizons and is the documented
second-choice path.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, NamedTuple, Sequence

import numpy as np
from scipy.fft import dctn, idctn
from scipy.interpolate import RegularGridInterpolator

from .catalog import AnalyticVectorField
from .controllers import Controller, apply
from .errors import (
    CrossCheckFailureError,
    FlowEscapeError,
    NotAFixedPointError,
    NotInvariantError,
    NotZeroMeanError,
    UnsupportedTransformError,
    WindowEmptyError,
)
from .grid import (
    GridSpec,
    ScalarField,
    VectorField,
    divergence,
    dot,
    gradient,
    integrate,
    lp_norm,
    vector_l2,
)
from .metrics import poisson_zero_mean

__all__ = [
    "FlowMap",
    "MixingReport",
    "DecayFit",
    "WeakConvergenceProfile",
    "Lambda1Estimate",
    "Translation",
    "Rotation",
    "linearize_pointwise",
    "flow_map",
    "jacobian_along_flow",
    "transport_linear",
    "mixing_correlation",
    "weak_convergence_probe",
    "heat_reference",
    "neumann_lambda1",
    "fit_decay",
    "equivariance_residual",
    "cat_map_correlation",
]


# ---------------------------------------------------------------------------
# report containers


@dataclass
class FlowMap:
    """Characteristic trajectories of a velocity field.

    positions[k, s] is the image of seed s at t_grid[k]; jacobians[k, s]
    the volume distortion det(D phi_t) there, accumulated by the
    divergence integral. clamp_max records the largest wall overshoot
    that had to be clamped during integration.
    """

    t_grid: np.ndarray
    seeds: np.ndarray
    positions: np.ndarray
    jacobians: np.ndarray
    clamp_max: float


@dataclass
class MixingReport:
    t_grid: np.ndarray
    correlations: np.ndarray
    product_of_means: float
    initial_gap: float
    verdict: str


@dataclass
class DecayFit:
    lambda_hat: float
    c_hat: float
    r_squared: float
    window: tuple[float, float]


@dataclass
class WeakConvergenceProfile:
    """Pairings |<psi_j, e_t>| against a fixed test-function dictionary."""

    names: list[str]
    pairings: np.ndarray  # (n_samples, n_fields)

    def profile(self, name: str) -> np.ndarray:
        return self.pairings[:, self.names.index(name)]

    def max_abs(self) -> np.ndarray:
        return np.abs(self.pairings).max(axis=0)


class Lambda1Estimate(NamedTuple):
    analytic: float
    numeric: float


# ---------------------------------------------------------------------------
# velocity-field callbacks: closed-form catalog fields or grid interpolation


def _pad_axes(grid: GridSpec) -> list[np.ndarray]:
    axes = []
    for a in range(grid.dim):
        c = grid.centers(a)
        axes.append(np.concatenate([[0.0], c, [grid.extents[a]]]))
    return axes


def _pad_values(values: np.ndarray, dim: int) -> np.ndarray:
    return np.pad(values, [(1, 1)] * dim, mode="edge")


def _grid_interpolator(values: np.ndarray, grid: GridSpec):
    return RegularGridInterpolator(
        _pad_axes(grid), _pad_values(values, grid.dim),
        method="linear", bounds_error=False, fill_value=None,
    )


class _FlowField:
    """Uniform (velocity, divergence, velocity-jacobian) evaluation."""

    def __init__(self, b, grid_hint: GridSpec | None = None):
        if isinstance(b, AnalyticVectorField):
            self.dim = b.dim
            self.extents = tuple(b.extents)
            self.velocity = b.velocity
            self.div = b.div
            self.jac = b.jacobian
            self.grid = grid_hint
            self.analytic = True
        elif isinstance(b, VectorField):
            grid = b.grid
            self.dim = grid.dim
            self.extents = grid.extents
            self.grid = grid
            self.analytic = False
            comps = [_grid_interpolator(b.values[..., a], grid) for a in range(grid.dim)]
            div_itp = _grid_interpolator(divergence(b).values, grid)
            jac_itp = [
                [
                    _grid_interpolator(
                        gradient(ScalarField(grid, b.values[..., i])).values[..., j],
                        grid,
                    )
                    for j in range(grid.dim)
                ]
                for i in range(grid.dim)
            ]

            def velocity(P):
                return np.stack([c(P) for c in comps], axis=-1)

            def div(P):
                return div_itp(P)

            def jac(P):
                rows = [np.stack([jac_itp[i][j](P) for j in range(grid.dim)], axis=-1)
                        for i in range(grid.dim)]
                return np.stack(rows, axis=-2)

            self.velocity, self.div, self.jac = velocity, div, jac
        else:
            raise TypeError(f"expected an analytic or grid vector field, got {type(b)!r}")

    def escape_tol(self) -> float:
        # closed-form catalog fields are wall tangent; hold them to the
        # clamp budget of a 256-cell grid
        if self.grid is not None:
            return 2.0 * self.grid.min_h
        return 2.0 * min(self.extents) / 256.0


def _clip(P: np.ndarray, extents: Sequence[float]) -> np.ndarray:
    out = P.copy()
    for a, L in enumerate(extents):
        np.clip(out[..., a], 0.0, L, out=out[..., a])
    return out


def _integrate_flow(
    fld: _FlowField,
    seeds: np.ndarray,
    t_grid: np.ndarray,
    *,
    reverse: bool = False,
    with_variational: bool = False,
    max_dt: float = 0.01,
    escape_tol: float | None = None,
):
    """RK4 characteristics with divergence accumulation.

    Forward mode solves dx/dt = b(x) and dlogJ/dt = div b(x). Reverse
    mode solves dx/dt = -b(x) while still accumulating +div b(x): along
    the backtracked path this reproduces the Jacobi integral of the
    forward flow that ends at the seed. The variational matrix A
    (dA/dt = Db(x) A, forward mode only) feeds the Jacobian cross-check.
    """
    seeds = np.atleast_2d(np.asarray(seeds, dtype=float))
    t_grid = np.asarray(t_grid, dtype=float)
    if t_grid.ndim != 1 or len(t_grid) == 0:
        raise ValueError("t_grid must be a nonempty 1D sequence")
    if t_grid[0] < 0 or np.any(np.diff(t_grid) <= 0):
        raise ValueError("t_grid must be nonnegative and strictly increasing")
    tol = fld.escape_tol() if escape_tol is None else escape_tol
    vsign = -1.0 if reverse else 1.0

    ns, dim = seeds.shape
    x = seeds.copy()
    logj = np.zeros(ns)
    A = np.broadcast_to(np.eye(dim), (ns, dim, dim)).copy() if with_variational else None

    nt = len(t_grid)
    positions = np.empty((nt, ns, dim))
    jacobians = np.empty((nt, ns))
    dets = np.empty((nt, ns)) if with_variational else None
    clamp_max = 0.0

    def rhs(xc):
        q = _clip(xc, fld.extents)
        v = vsign * fld.velocity(q)
        d = fld.div(q)
        Dv = fld.jac(q) if with_variational else None
        return v, d, Dv

    t = 0.0
    k_out = 0
    if t_grid[0] == 0.0:
        positions[0] = x
        jacobians[0] = 1.0
        if with_variational:
            dets[0] = 1.0
        k_out = 1

    for target in t_grid[k_out:]:
        span = target - t
        steps = max(1, int(math.ceil(span / max_dt)))
        dt = span / steps
        for _ in range(steps):
            v1, d1, J1 = rhs(x)
            v2, d2, J2 = rhs(x + 0.5 * dt * v1)
            v3, d3, J3 = rhs(x + 0.5 * dt * v2)
            v4, d4, J4 = rhs(x + dt * v3)
            x = x + (dt / 6.0) * (v1 + 2 * v2 + 2 * v3 + v4)
            logj = logj + (dt / 6.0) * (d1 + 2 * d2 + 2 * d3 + d4)
            if with_variational:
                k1 = J1 @ A
                k2 = J2 @ (A + 0.5 * dt * k1)
                k3 = J3 @ (A + 0.5 * dt * k2)
                k4 = J4 @ (A + dt * k3)
                A = A + (dt / 6.0) * (k1 + 2 * k2 + 2 * k3 + k4)
            clipped = _clip(x, fld.extents)
            clamp_max = max(clamp_max, float(np.abs(x - clipped).max()))
            x = clipped
        t = target
        positions[k_out] = x
        jacobians[k_out] = np.exp(logj)
        if with_variational:
            dets[k_out] = np.linalg.det(A)
        k_out += 1

    if clamp_max > tol:
        raise FlowEscapeError(
            f"characteristics left the box by {clamp_max:.3e} (> {tol:.3e}); "
            "the velocity field is not wall tangent"
        )
    return t_grid, seeds, positions, jacobians, dets, clamp_max


# ---------------------------------------------------------------------------
# operations


def linearize_pointwise(
    controller: Controller,
    mu: ScalarField,
    *,
    residual_tol: float = 1e-6,
) -> VectorField:
    """Frozen velocity of the error transport at the fixed point.

    b(x) = k(x, m, m) + m * dk/dr(x, m, m) evaluated at m = mu(x). The
    reference must actually be stationary: the closed-loop drift
    div(mu * k(., mu, mu)) is checked in L2 first.
    """
    if controller.order != 0:
        raise ValueError("linearization is defined for order-0 controllers")
    grid = mu.grid
    P = grid.points()
    m = mu.values
    k0 = np.asarray(controller.evaluate_arrays(P, (m, None), (m, None)), dtype=float)
    k0 = k0.reshape(grid.shape + (grid.dim,))
    drift = divergence(VectorField(grid, m[..., None] * k0))
    residual = lp_norm(drift.values, grid, 2.0)
    if residual > residual_tol:
        raise NotAFixedPointError(residual, residual_tol)
    dk = np.asarray(controller.d_rho_arrays(P, m, m), dtype=float)
    dk = dk.reshape(grid.shape + (grid.dim,))
    return VectorField(grid, k0 + m[..., None] * dk)


def flow_map(
    b,
    seeds: np.ndarray,
    t_grid: Sequence[float],
    *,
    max_dt: float = 0.01,
    escape_tol: float | None = None,
) -> FlowMap:
    """Integrate characteristics of b from the seed points.

    Jacobians come from the divergence integral along each trajectory
    (volume distortion of the flow), so J(0) = 1 and J stays positive by
    construction.
    """
    fld = _FlowField(b)
    t, s, pos, jac, _, clamp = _integrate_flow(
        fld, seeds, np.asarray(t_grid, dtype=float),
        max_dt=max_dt, escape_tol=escape_tol,
    )
    return FlowMap(t_grid=t, seeds=s, positions=pos, jacobians=jac, clamp_max=clamp)


def jacobian_along_flow(
    b,
    seeds: np.ndarray,
    t_grid: Sequence[float],
    *,
    max_dt: float = 0.0025,
    cross_check_tol: float = 1e-4,
) -> tuple[np.ndarray, float]:
    """Volume distortion along the flow, cross-checked two ways.

    Route one integrates div b along characteristics and exponentiates;
    route two integrates the variational equation and takes the
    determinant. The routes share nothing but the trajectory, so their
    agreement certifies both. Returns (jacobians, worst mismatch).

    The default step is tighter than the flow-map default: the
    variational matrix carries the velocity jacobian's doubled
    frequencies, and the determinant mismatch is what is being
    certified, not a 2%-level transport error.
    """
    fld = _FlowField(b)
    _, _, _, jac, dets, _ = _integrate_flow(
        fld, seeds, np.asarray(t_grid, dtype=float),
        with_variational=True, max_dt=max_dt,
    )
    mismatch = float((np.abs(jac - dets) / np.abs(jac)).max())
    if mismatch > cross_check_tol:
        raise CrossCheckFailureError(
            "divergence-integral and variational jacobians disagree",
            mismatch, cross_check_tol,
        )
    return jac, mismatch


def transport_linear(
    e0,
    b,
    t_grid: Sequence[float],
    *,
    grid: GridSpec | None = None,
    max_dt: float = 0.01,
    mean_tol: float = 1e-8,
) -> list[ScalarField]:
    """Diffusion-free snapshots of the linear transport of e0 along b.

    For every output cell center y the characteristic through y is
    backtracked to its time-0 origin x, and e_t(y) = e0(x) / J(t, x)
    with J the Jacobi-formula volume distortion accumulated along the
    same backtracked path. e0 may be a ScalarField (then interpolated
    linearly) or a callable on points (evaluated exactly; preferred for
    long-horizon conservation checks).

    Each snapshot has its discrete mean projected out: the continuum
    solution keeps mass zero exactly, and removing the O(h^2) quadrature
    remainder keeps the discrete invariant sharp at every sample.
    """
    if isinstance(e0, ScalarField):
        grid = e0.grid if grid is None else grid
        e0_itp = _grid_interpolator(e0.values, e0.grid)
        e0_eval = lambda P: np.asarray(e0_itp(P))
    elif callable(e0):
        if grid is None:
            raise ValueError("callable e0 needs an explicit output grid")
        e0_eval = lambda P: np.asarray(e0(P), dtype=float)
    else:
        raise TypeError("e0 must be a ScalarField or a callable on points")

    start = e0_eval(grid.points())
    scale = float(np.abs(start).max())
    if scale > 0 and abs(start.mean()) > mean_tol * scale:
        raise NotZeroMeanError(
            f"initial error mean {start.mean():.3e} exceeds {mean_tol:.1e} x scale"
        )

    fld = _FlowField(b, grid_hint=grid)
    t_arr = np.asarray(t_grid, dtype=float)
    centers = grid.points().reshape(-1, grid.dim)
    _, _, pos, jac, _, _ = _integrate_flow(
        fld, centers, t_arr, reverse=True, max_dt=max_dt,
    )
    out = []
    for k in range(len(t_arr)):
        origins = pos[k].reshape(grid.shape + (grid.dim,))
        vals = e0_eval(origins) / jac[k].reshape(grid.shape)
        vals = vals - vals.mean()
        out.append(ScalarField(grid, vals))
    return out


def _invariance_residual(fld: _FlowField, pi: ScalarField) -> float:
    """L2 size of div(pi b), the stationarity defect of pi under b."""
    grid = pi.grid
    if fld.analytic:
        P = grid.points()
        term = pi.values * fld.div(P)
        grad_pi = gradient(pi).values
        term = term + (grad_pi * fld.velocity(P)).sum(axis=-1)
        return lp_norm(term, grid, 2.0)
    flux = VectorField(grid, pi.values[..., None] * fld.velocity(grid.points()))
    return lp_norm(divergence(flux).values, grid, 2.0)


def _as_point_function(f, grid: GridSpec):
    if callable(f):
        return lambda P: np.asarray(f(P), dtype=float)
    if isinstance(f, ScalarField):
        itp = _grid_interpolator(f.values, f.grid)
        return lambda P: np.asarray(itp(P))
    raise TypeError("observables must be callables or ScalarFields")


def mixing_correlation(
    b,
    pi: ScalarField,
    f,
    g,
    t_grid: Sequence[float],
    *,
    invariance_tol: float = 1e-6,
    max_dt: float = 0.01,
) -> MixingReport:
    """Correlation of two observables along the flow, under pi.

    C(t) = integral of f(y) g(phi_t^{-1}(y)) pi(y) dy by midpoint
    quadrature with backtracked characteristics. The verdict compares
    |C(t) - product of means| against its initial gap: a recurrence to
    half the gap (after first falling below, or persisting through the
    last third) reads "oscillating"; staying under 5% through the last
    third reads "decaying"; anything else is "inconclusive". A recurrence
    is checked first because integrable flows phase-mix pointwise
    correlations to zero while remaining non-mixing.
    """
    grid = pi.grid
    fld = _FlowField(b, grid_hint=grid)
    residual = _invariance_residual(fld, pi)
    if residual > invariance_tol:
        raise NotInvariantError(
            f"pi is not invariant under b: ||div(pi b)|| = {residual:.3e} "
            f"> {invariance_tol:.1e}"
        )
    f_eval = _as_point_function(f, grid)
    g_eval = _as_point_function(g, grid)

    t_arr = np.asarray(t_grid, dtype=float)
    centers = grid.points().reshape(-1, grid.dim)
    _, _, pos, _, _, _ = _integrate_flow(fld, centers, t_arr, reverse=True, max_dt=max_dt)

    w = (pi.values * grid.cell_volume).reshape(-1)
    fY = f_eval(grid.points()).reshape(-1)
    mean_f = float((fY * w).sum())
    gY = g_eval(grid.points()).reshape(-1)
    mean_g = float((gY * w).sum())
    product = mean_f * mean_g

    corr = np.array([float((fY * g_eval(pos[k]) * w).sum()) for k in range(len(t_arr))])
    gaps = np.abs(corr - product)
    initial = float(gaps[0])
    verdict = _mixing_verdict(gaps, initial)
    return MixingReport(
        t_grid=t_arr,
        correlations=corr,
        product_of_means=product,
        initial_gap=initial,
        verdict=verdict,
    )


def _mixing_verdict(gaps: np.ndarray, initial: float) -> str:
    if initial <= 1e-12 * max(1.0, float(gaps.max())):
        return "inconclusive"  # a constant observable certifies nothing
    r = gaps / initial
    tail = r[2 * len(r) // 3:]
    below = np.nonzero(r < 0.5)[0]
    recurred = below.size > 0 and bool((r[below[0]:] >= 0.5).any())
    if recurred or tail.max() >= 0.5:
        return "oscillating"
    if tail.max() <= 0.05:
        return "decaying"
    return "inconclusive"


def _cosine_dictionary(grid: GridSpec, max_mode: int = 2):
    fields = {}
    meshes = grid.meshes()
    for modes in np.ndindex(*([max_mode + 1] * grid.dim)):
        if not any(modes):
            continue
        vals = np.ones(grid.shape)
        for a, m in enumerate(modes):
            if m:
                vals = vals * np.cos(np.pi * m * meshes[a] / grid.extents[a])
        name = "cos(" + ",".join(str(m) for m in modes) + ")"
        fields[name] = ScalarField(grid, vals)
    return fields


def weak_convergence_probe(
    e_seq: Sequence[ScalarField],
    test_fields: dict[str, ScalarField] | None = None,
) -> WeakConvergenceProfile:
    """Pair each error snapshot against a dictionary of test functions.

    The duality pairings <psi, e_t> are the weak-convergence witnesses:
    transport that merely rearranges e keeps some pairing large, while
    genuinely mixing dynamics drive all of them to zero. Defaults to the
    low-order cosine dictionary on the snapshot grid.
    """
    if len(e_seq) == 0:
        raise ValueError("need at least one error snapshot")
    grid = e_seq[0].grid
    if test_fields is None:
        test_fields = _cosine_dictionary(grid)
    names = list(test_fields)
    pairings = np.empty((len(e_seq), len(names)))
    for j, name in enumerate(names):
        psi = test_fields[name]
        fn = _as_point_function(psi, grid)
        psi_vals = fn(grid.points())
        for i, e in enumerate(e_seq):
            pairings[i, j] = float((psi_vals * e.values).sum() * grid.cell_volume)
    return WeakConvergenceProfile(names=names, pairings=pairings)


def heat_reference(e0: ScalarField, t: float, modes: int | None = None) -> ScalarField:
    """Spectral solution of the Neumann heat equation at time t.

    Cosine-transforms e0 (the Neumann eigenbasis on a box), damps mode k
    by exp(-t sum_a (pi k_a / L_a)^2), and transforms back. With modes
    given, coefficients above that index are dropped on every axis.
    """
    grid = e0.grid
    if t < 0:
        raise ValueError("time must be nonnegative")
    coeff = dctn(e0.values, type=2, norm="ortho")
    lam = np.zeros(grid.shape)
    for a in range(grid.dim):
        k = np.arange(grid.cells[a])
        lam_a = (np.pi * k / grid.extents[a]) ** 2
        lam = lam + lam_a.reshape([-1 if i == a else 1 for i in range(grid.dim)])
    coeff = coeff * np.exp(-lam * t)
    if modes is not None:
        for a in range(grid.dim):
            if modes > grid.cells[a] // 2:
                raise ValueError(
                    f"modes={modes} exceeds n/2={grid.cells[a] // 2} on axis {a}"
                )
            k = np.arange(grid.cells[a])
            mask = (k <= modes).reshape([-1 if i == a else 1 for i in range(grid.dim)])
            coeff = coeff * mask
    return ScalarField(grid, idctn(coeff, type=2, norm="ortho"))


def neumann_lambda1(
    grid: GridSpec,
    *,
    max_iters: int = 100,
    rtol: float = 1e-12,
) -> Lambda1Estimate:
    """Smallest nonzero Neumann eigenvalue: closed form and numeric.

    The closed form is (pi / L_max)^2 (slowest cosine mode along the
    longest axis). The numeric route runs inverse power iteration on the
    discrete operator restricted to zero-mean fields, seeded with that
    slowest mode, so it converges in a handful of Poisson solves.
    """
    analytic = (np.pi / max(grid.extents)) ** 2
    axis = int(np.argmax(grid.extents))
    mesh = grid.meshes()[axis]
    e = np.cos(np.pi * mesh / grid.extents[axis])
    e = e - e.mean()
    e /= lp_norm(e, grid, 2.0)

    lam = analytic
    for _ in range(max_iters):
        phi = poisson_zero_mean(ScalarField(grid, e))
        vals = phi.values - phi.values.mean()
        lam_new = float(dot(ScalarField(grid, e), ScalarField(grid, e))
                        / dot(ScalarField(grid, e), ScalarField(grid, vals)))
        vals /= lp_norm(vals, grid, 2.0)
        e = vals
        if abs(lam_new - lam) <= rtol * abs(lam_new):
            lam = lam_new
            break
        lam = lam_new
    return Lambda1Estimate(analytic=float(analytic), numeric=float(lam))


def fit_decay(
    times: Sequence[float],
    values: Sequence[float],
    window: tuple[float, float] | None = None,
) -> DecayFit:
    """Least-squares exponential rate on the log of a positive series."""
    t = np.asarray(times, dtype=float)
    v = np.asarray(values, dtype=float)
    if window is None:
        window = (float(t.min()), float(t.max()))
    lo, hi = float(window[0]), float(window[1])
    mask = (t >= lo) & (t <= hi) & (v > 0)
    if mask.sum() < 2:
        raise WindowEmptyError(
            f"window [{lo}, {hi}] keeps {int(mask.sum())} positive samples; need >= 2"
        )
    tw, lw = t[mask], np.log(v[mask])
    slope, intercept = np.polyfit(tw, lw, 1)
    fitted = slope * tw + intercept
    ss_res = float(((lw - fitted) ** 2).sum())
    ss_tot = float(((lw - lw.mean()) ** 2).sum())
    r2 = 1.0 if ss_tot <= 1e-30 else 1.0 - ss_res / ss_tot
    return DecayFit(
        lambda_hat=float(-slope),
        c_hat=float(np.exp(intercept)),
        r_squared=r2,
        window=(lo, hi),
    )


# ---------------------------------------------------------------------------
# symmetry transforms and residuals


@dataclass(frozen=True)
class Translation:
    """Whole-cell shift on the periodic shadow domain."""

    cells: tuple[int, ...]


@dataclass(frozen=True)
class Rotation:
    """Rotation by quarters * 90 degrees about the center of a square grid."""

    quarters: int


def _rot90_scalar(values: np.ndarray, quarters: int) -> np.ndarray:
    return np.rot90(values, k=quarters % 4, axes=(0, 1))


def _rot90_vector(values: np.ndarray, quarters: int) -> np.ndarray:
    out = values
    for _ in range(quarters % 4):
        vx, vy = out[..., 0], out[..., 1]
        out = np.stack(
            [-np.rot90(vy, 1, axes=(0, 1)), np.rot90(vx, 1, axes=(0, 1))], axis=-1
        )
    return out


def equivariance_residual(
    controller: Controller,
    transform,
    rho: ScalarField,
    mu: ScalarField,
    *,
    floor: float = 1e-12,
) -> float:
    """Relative defect of transform-then-control vs control-then-transform.

    Translations act on the periodic shadow domain (whole-box shifts are
    incompatible with walls, and the stencil property being tested is a
    statement about the interior operators). Rotations act on the box
    itself and require a square grid. Scalars push forward by moving
    values to transformed cells; vectors additionally rotate their
    components.
    """
    grid = rho.grid
    if isinstance(transform, Translation):
        shift = tuple(int(c) for c in transform.cells)
        if len(shift) != grid.dim:
            raise UnsupportedTransformError(
                f"translation needs {grid.dim} cell offsets, got {len(shift)}"
            )
        boundary = "periodic"

        def push_scalar(f: ScalarField) -> ScalarField:
            return ScalarField(grid, np.roll(f.values, shift, axis=tuple(range(grid.dim))))

        def push_vector(v: VectorField) -> VectorField:
            return VectorField(grid, np.roll(v.values, shift, axis=tuple(range(grid.dim))))

    elif isinstance(transform, Rotation):
        if grid.dim != 2:
            raise UnsupportedTransformError("rotations need a 2D grid")
        if grid.cells[0] != grid.cells[1] or grid.extents[0] != grid.extents[1]:
            raise UnsupportedTransformError("rotations need a square grid")
        quarters = int(transform.quarters)
        boundary = "box"

        def push_scalar(f: ScalarField) -> ScalarField:
            return ScalarField(grid, _rot90_scalar(f.values, quarters))

        def push_vector(v: VectorField) -> VectorField:
            return VectorField(grid, _rot90_vector(v.values, quarters))

    else:
        raise UnsupportedTransformError(
            f"unsupported transform {transform!r}; use Translation or Rotation"
        )

    base = apply(controller, rho, mu, boundary=boundary)
    lhs = push_vector(base)
    rhs = apply(controller, push_scalar(rho), push_scalar(mu), boundary=boundary)
    defect = vector_l2(VectorField(grid, lhs.values - rhs.values))
    return defect / max(vector_l2(base), floor)


# ---------------------------------------------------------------------------
# discrete-time estimator calibration (outside the flow setting)


def cat_map_correlation(
    f: Callable[[np.ndarray], np.ndarray],
    g: Callable[[np.ndarray], np.ndarray],
    iterations: int = 12,
    n: int = 256,
) -> np.ndarray:
    """Correlation decay under the hyperbolic toral automorphism.

    Discrete-time calibration target for the correlation estimator: the
    map (x, y) -> (2x + y, x + y) mod 1 is uniformly hyperbolic, so
    correlations of smooth observables collapse to the product of means
    within a few iterations. This is plumbing for estimator validation,
    not a continuous-time flow; the uniform measure is invariant.

    Returns C_k - product_of_means for k = 0..iterations.
    """
    centers = (np.arange(n) + 0.5) / n
    X, Y = np.meshgrid(centers, centers, indexing="ij")
    P = np.stack([X, Y], axis=-1)
    w = 1.0 / (n * n)

    fv = np.asarray(f(P), dtype=float)
    mean_f = float(fv.sum() * w)
    Q = P.copy()
    out = np.empty(iterations + 1)
    for k in range(iterations + 1):
        gv = np.asarray(g(Q), dtype=float)
        mean_g = float(gv.sum() * w)
        out[k] = float((fv * gv).sum() * w) - mean_f * mean_g
        # pre-compose with the inverse map: T^{-1}(x, y) = (x - y, 2y - x)
        x, y = Q[..., 0], Q[..., 1]
        Q = np.stack([np.mod(x - y, 1.0), np.mod(2.0 * y - x, 1.0)], axis=-1)
    return out
