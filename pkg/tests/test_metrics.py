"""Transport distances: the quantile, exact-LP, and entropic routes must agree."""

import numpy as np
import pytest

from swarmfield.catalog import make_density
from swarmfield.errors import MassMismatchError, NoConvergenceError, NotZeroMeanError
from swarmfield.grid import ScalarField, as_density, build_grid, dot, laplacian, lp_norm
from swarmfield.metrics import (
    check_w2_h1_sandwich,
    check_w2_lp_bound,
    h_minus1_norm,
    lp_distance,
    poisson_zero_mean,
    w2_1d,
    w2_exact_small,
    w2_sinkhorn,
)

from conftest import smooth_density_2d


def cos_mixture_density(grid, rng, floor=0.1):
    # cosine-only mixture so the corpus stays reproducible from the seed
    x = grid.centers(0)
    v = np.ones(grid.cells[0])
    for m in range(1, 4):
        v = v + rng.uniform(-0.4, 0.4) * np.cos(np.pi * m * x)
    v = np.maximum(v, floor)
    return as_density(ScalarField(grid, v / (v.sum() * grid.cell_volume)))


def point_mass(grid, index):
    v = np.zeros(grid.shape)
    v[index] = 1.0 / grid.cell_volume
    return as_density(ScalarField(grid, v))


# ---------------------------------------------------------------- hand values


def test_lp_distance_constant_offset():
    g = build_grid((1.0,), (16,))
    f = ScalarField(g, np.full(16, 1.5))
    u = ScalarField(g, np.ones(16))
    for p in (1.0, 2.0, np.inf):
        assert lp_distance(f, u, p) == pytest.approx(0.5, abs=1e-15)


def test_lp_distance_rejects_grid_mismatch():
    a = ScalarField(build_grid((1.0,), (8,)), np.ones(8))
    b = ScalarField(build_grid((1.0,), (16,)), np.ones(16))
    with pytest.raises(ValueError):
        lp_distance(a, b)


def test_w2_identity_is_zero():
    g = build_grid((1.0,), (32,))
    rho = cos_mixture_density(g, np.random.default_rng(0))
    assert w2_1d(rho, rho) == 0.0
    val, _ = w2_exact_small(rho, rho)
    assert val <= 1e-8


def test_w2_rejects_mass_mismatch():
    g = build_grid((1.0,), (8,))
    u = make_density(g, "uniform")
    heavy = ScalarField(g, 2.0 * np.ones(8))
    with pytest.raises(MassMismatchError):
        w2_1d(heavy, u)
    with pytest.raises(MassMismatchError):
        w2_exact_small(heavy, u)


def test_w2_1d_point_masses():
    # cells 8 and 24 of 32 sit exactly 0.5 apart
    g = build_grid((1.0,), (32,))
    w = w2_1d(point_mass(g, 8), point_mass(g, 24))
    assert w == pytest.approx(0.5, abs=2e-3)


def test_w2_exact_reduces_to_euclidean():
    g = build_grid((1.0, 1.0), (8, 8))
    val, plan = w2_exact_small(point_mass(g, (1, 2)), point_mass(g, (6, 5)))
    assert val == pytest.approx(np.hypot(5.0, 3.0) / 8.0, abs=1e-9)
    assert plan.masses.sum() == pytest.approx(1.0, abs=1e-12)
    assert plan.max_marginal_violation() <= 1e-9


def test_quantile_matches_exact_lp_under_refinement():
    # atomic refinement shrinks the quantization gap between the two routes
    rng = np.random.default_rng(11)
    g = build_grid((1.0,), (16,))
    worsts = []
    for k in (64, 128):
        gf = build_grid((1.0,), (16 * k,))
        worst = 0.0
        for _ in range(6):
            r, m = cos_mixture_density(g, rng), cos_mixture_density(g, rng)
            q = w2_1d(r, m)
            rf = as_density(ScalarField(gf, np.repeat(r.values, k)))
            mf = as_density(ScalarField(gf, np.repeat(m.values, k)))
            ex, _ = w2_exact_small(rf, mf)
            worst = max(worst, abs(q - ex))
        worsts.append(worst)
    assert worsts[1] < worsts[0]
    assert worsts[0] <= 5e-6
    assert worsts[1] <= 1e-6


def test_exact_lp_smooth_regression():
    rng = np.random.default_rng(7)
    g = build_grid((1.0, 1.0), (16, 16))
    rho = smooth_density_2d(g, rng)
    mu = smooth_density_2d(g, rng)
    val, plan = w2_exact_small(rho, mu)
    assert val == pytest.approx(0.048828, abs=5e-6)
    assert plan.max_marginal_violation() <= 1e-9


# ------------------------------------------------------- separated bump pair


@pytest.fixture(scope="module")
def separated_bumps():
    g = build_grid((1.0, 1.0), (24, 24))
    rho = make_density(g, "gaussian_bump", {"center": [0.30, 0.35], "sigma": 0.12})
    mu = make_density(g, "gaussian_bump", {"center": [0.68, 0.62], "sigma": 0.10})
    exact, plan = w2_exact_small(rho, mu)
    return g, rho, mu, exact, plan


def test_exact_lp_bump_regression(separated_bumps):
    _, _, _, exact, plan = separated_bumps
    assert exact == pytest.approx(0.465304, abs=5e-6)
    assert plan.max_marginal_violation() <= 1e-9


def test_plan_is_a_coupling_with_matching_cost(separated_bumps):
    g, rho, mu, exact, plan = separated_bumps
    row_m, col_m = plan.marginals()
    assert np.allclose(row_m, rho.values.ravel() * g.cell_volume, atol=1e-9)
    assert np.allclose(col_m, mu.values.ravel() * g.cell_volume, atol=1e-9)
    pts = g.points().reshape(-1, g.dim)
    moved = pts[plan.rows] - pts[plan.cols]
    cost = float(np.sum(plan.masses * np.sum(moved * moved, axis=1)))
    assert np.sqrt(cost) == pytest.approx(exact, rel=1e-10)
    dense = plan.to_dense()
    assert dense.shape == (g.total_cells, g.total_cells)
    assert dense.sum() == pytest.approx(1.0, abs=1e-9)


def test_sinkhorn_agrees_with_exact_lp(separated_bumps):
    _, rho, mu, exact, _ = separated_bumps
    rep = w2_sinkhorn(rho, mu)
    assert abs(rep.value - exact) / exact <= 2e-2
    assert rep.meta["marginal_violation"] <= 1e-6
    for key in ("epsilon", "schedule", "iterations", "cost", "self_costs"):
        assert key in rep.meta


def test_entropic_cost_decreases_toward_exact(separated_bumps):
    # the raw (biased) entropic cost dominates the squared distance and
    # tightens monotonically as the regularization is lowered
    g, rho, mu, exact, _ = separated_bumps
    h2 = g.min_h**2
    prev = None
    for mult in (16, 8, 4, 2, 1):
        rep = w2_sinkhorn(rho, mu, mult * h2)
        raw = rep.meta["cost"]
        assert raw - exact**2 >= 0.0
        if prev is not None:
            assert raw <= prev + 1e-12
        prev = raw


def test_sinkhorn_validation():
    g = build_grid((1.0,), (4097,))
    u = make_density(g, "uniform")
    with pytest.raises(ValueError):
        w2_sinkhorn(u, u)
    g2 = build_grid((1.0,), (16,))
    u2 = make_density(g2, "uniform")
    with pytest.raises(ValueError):
        w2_sinkhorn(u2, u2, 0.0)
    rho = cos_mixture_density(g2, np.random.default_rng(1))
    with pytest.raises(NoConvergenceError):
        w2_sinkhorn(rho, u2, max_iters=1)


# ----------------------------------------------------- dual-norm machinery


def test_h_minus1_eigenmode():
    # -laplacian has cos(pi x) as an exact eigenvector, so the dual norm
    # of that mode is its L2 norm over the eigenvalue's square root
    g = build_grid((1.0,), (128,))
    e = ScalarField(g, np.cos(np.pi * g.centers(0)))
    assert h_minus1_norm(e) == pytest.approx(1.0 / (np.pi * np.sqrt(2.0)), rel=1e-4)


def test_h_minus1_poisson_identities():
    g = build_grid((1.0,), (64,))
    x = g.centers(0)
    e = ScalarField(g, 0.3 * np.cos(np.pi * x) + 0.1 * np.cos(2 * np.pi * x))
    phi = poisson_zero_mean(e)
    assert abs(phi.values.mean()) <= 1e-10
    assert lp_norm(-laplacian(phi).values - e.values, g, 2) <= 1e-8
    h = h_minus1_norm(e)
    assert h * h == pytest.approx(dot(e, phi), rel=1e-10)
    tripled = ScalarField(g, 3.0 * e.values)
    assert h_minus1_norm(tripled) == pytest.approx(3.0 * h, rel=1e-8)


def test_h_minus1_rejects_nonzero_mean():
    g = build_grid((1.0,), (16,))
    with pytest.raises(NotZeroMeanError):
        h_minus1_norm(ScalarField(g, np.ones(16)))


# -------------------------------------------------------- certified bounds


@pytest.fixture(scope="module")
def pinched_corpus():
    """One pass over the seeded corpus; the checks raise on any violation."""
    rng = np.random.default_rng(23)
    g = build_grid((1.0,), (32,))
    x = g.centers(0)

    def pinched():
        v = np.zeros(32)
        for m in range(1, 4):
            v = v + rng.uniform(-0.4, 0.4) * np.cos(np.pi * m * x)
        v = v - v.mean()
        amp = np.abs(v).max()
        if amp > 0:
            v = 0.45 * v / amp
        v = 1.0 + v
        return as_density(ScalarField(g, v / (v.sum() * g.cell_volume)))

    out = {"grid": g}
    worst_lo = worst_hi = 0.0
    for _ in range(25):
        r, m = pinched(), pinched()
        lo, hi = check_w2_h1_sandwich(r, m, 0.5, 1.5, rel_slack=0.02)
        worst_lo = max(worst_lo, lo.lhs / lo.rhs)
        worst_hi = max(worst_hi, hi.lhs / hi.rhs)
    out["worst_lo"], out["worst_hi"] = worst_lo, worst_hi

    base = pinched()
    mu = as_density(ScalarField(g, np.ones(32)))
    pert = base.values - 1.0
    ratios_w, ratios_h = [], []
    for t in (1.0, 0.5, 0.25, 0.125):
        r = as_density(ScalarField(g, 1.0 + t * pert))
        ratios_w.append(w2_1d(r, mu) / t)
        ratios_h.append(h_minus1_norm(ScalarField(g, r.values - 1.0)) / t)
    out["w2_drift"] = max(ratios_w) / min(ratios_w) - 1.0
    out["h_drift"] = max(ratios_h) / min(ratios_h) - 1.0

    for _ in range(20):
        r, m = pinched(), pinched()
        for p in (1.0, 2.0):
            check_w2_lp_bound(r, m, p)
    return out


def test_sandwich_holds_with_margin(pinched_corpus):
    assert pinched_corpus["worst_lo"] == pytest.approx(0.9019, abs=2e-3)
    assert pinched_corpus["worst_hi"] == pytest.approx(0.8252, abs=2e-3)
    assert pinched_corpus["worst_lo"] < 1.0
    assert pinched_corpus["worst_hi"] < 1.0


def test_small_perturbations_scale_linearly(pinched_corpus):
    # both metrics are asymptotically linear in the perturbation amplitude
    assert pinched_corpus["w2_drift"] <= 1e-12
    assert pinched_corpus["h_drift"] <= 1e-12


def test_lp_bound_tight_for_end_cell_masses():
    g = build_grid((1.0,), (32,))
    rep = check_w2_lp_bound(point_mass(g, 0), point_mass(g, 31), 1.0)
    assert rep.passed
    # moving everything across the box nearly saturates diam^2 * TV
    assert rep.lhs / rep.rhs == pytest.approx(0.9380, abs=1e-3)


def test_sandwich_validates_pinch_arguments():
    g = build_grid((1.0,), (32,))
    rng = np.random.default_rng(5)
    r, m = cos_mixture_density(g, rng), cos_mixture_density(g, rng)
    with pytest.raises(ValueError):
        check_w2_h1_sandwich(r, m, 1.5, 0.5)
    with pytest.raises(ValueError):
        # densities are not actually pinched inside [0.99, 1.01]
        check_w2_h1_sandwich(r, m, 0.99, 1.01)
