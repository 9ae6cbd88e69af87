"""Grid container, quadrature, and discrete differential operators."""

import math

import numpy as np
import pytest

from swarmfield.grid import (
    ScalarField,
    VectorField,
    as_density,
    build_grid,
    dirichlet_energy,
    divergence,
    dot,
    gradient,
    integrate,
    is_admissible,
    jet_at,
    jet_arrays,
    laplacian,
    lp_norm,
    project_admissible,
    vector_l2,
)


def test_grid_geometry():
    g = build_grid((2.0, 1.0), (8, 4))
    assert g.dim == 2
    assert g.shape == (8, 4)
    assert g.h == (0.25, 0.25)
    assert g.min_h == 0.25
    assert g.cell_volume == pytest.approx(0.0625)
    assert g.total_cells == 32
    assert g.volume == pytest.approx(2.0)
    assert g.diameter == pytest.approx(math.sqrt(5.0))


def test_centers_are_cell_midpoints():
    g = build_grid((1.0,), (4,))
    assert np.allclose(g.centers(0), [0.125, 0.375, 0.625, 0.875])
    pts = g.points()
    assert pts.shape == (4, 1)
    assert np.allclose(pts[:, 0], g.centers(0))


def test_meshes_and_flat_index_agree():
    g = build_grid((1.0, 1.0), (4, 5))
    X, Y = g.meshes()
    assert X.shape == Y.shape == (4, 5)
    # flat_index must match C-order raveling of the value arrays
    k = g.flat_index((2, 3))
    assert X.ravel()[k] == X[2, 3]
    assert Y.ravel()[k] == Y[2, 3]


def test_build_grid_rejects_bad_shapes():
    with pytest.raises(ValueError):
        build_grid((1.0,), (3,))
    with pytest.raises(ValueError):
        build_grid((-1.0,), (8,))
    with pytest.raises(ValueError):
        build_grid((1.0, 1.0), (8,))
    with pytest.raises(ValueError):
        build_grid((1.0, 1.0, 1.0), (8, 8, 8))


def test_field_shape_validation():
    g = build_grid((1.0,), (8,))
    with pytest.raises(ValueError):
        ScalarField(g, np.zeros(7))
    with pytest.raises(ValueError):
        VectorField(g, np.zeros((8, 2)))


def test_quadrature_hand_values():
    g = build_grid((1.0,), (256,))
    x = g.centers(0)
    const = ScalarField(g, np.full(g.shape, 2.0))
    assert integrate(const) == pytest.approx(2.0, abs=1e-14)
    assert lp_norm(const.values, g, 1.0) == pytest.approx(2.0, abs=1e-14)
    assert lp_norm(const.values, g, math.inf) == 2.0
    # midpoint sums of cos^2 over whole periods are exact
    c = ScalarField(g, np.cos(np.pi * x))
    assert lp_norm(c.values, g, 2.0) == pytest.approx(math.sqrt(0.5), abs=1e-14)
    assert integrate(c) == pytest.approx(0.0, abs=1e-14)
    assert dot(c, c) == pytest.approx(0.5, abs=1e-14)


def test_as_density_validates_and_returns_input():
    g = build_grid((1.0,), (16,))
    good = ScalarField(g, np.ones(16))
    assert as_density(good) is good

    bad_mass = ScalarField(g, np.full(16, 1.5))
    with pytest.raises(ValueError):
        as_density(bad_mass)

    v = np.ones(16)
    v[3] = -0.01
    v[4] = 2.0 - v.sum() + 1.0  # restore unit mass, keep the negative cell
    with pytest.raises(ValueError):
        as_density(ScalarField(g, v))


def test_gradient_of_linear_field():
    g = build_grid((1.0,), (32,))
    f = ScalarField(g, g.centers(0).copy())
    gv = gradient(f).values[..., 0]
    # interior cells see the exact slope; wall cells carry the one-sided
    # half-slope of the reflecting closure
    assert np.allclose(gv[1:-1], 1.0, atol=1e-13)
    assert gv[0] == pytest.approx(0.5, abs=1e-13)
    assert gv[-1] == pytest.approx(0.5, abs=1e-13)


def test_gradient_second_order_in_interior():
    errs = []
    for n in (64, 128, 256):
        g = build_grid((1.0,), (n,))
        x = g.centers(0)
        f = ScalarField(g, np.cos(np.pi * x))
        gv = gradient(f).values[..., 0]
        errs.append(np.abs(gv[2:-2] + np.pi * np.sin(np.pi * x[2:-2])).max())
    orders = [np.log2(errs[i] / errs[i + 1]) for i in range(2)]
    assert all(o > 1.9 for o in orders)


def test_divergence_is_conservative():
    rng = np.random.default_rng(3)
    g = build_grid((1.0, 1.0), (12, 9))
    for _ in range(5):
        v = VectorField(g, rng.normal(size=g.shape + (2,)))
        net = integrate(divergence(v))
        assert abs(net) < 1e-14


def test_divergence_of_identity_field_interior():
    g = build_grid((1.0,), (32,))
    v = VectorField(g, g.centers(0)[:, None].copy())
    d = divergence(v).values
    assert np.allclose(d[1:-1], 1.0, atol=1e-12)


def test_laplacian_summation_by_parts():
    rng = np.random.default_rng(11)
    g = build_grid((1.0, 1.0), (10, 14))
    f = ScalarField(g, rng.normal(size=g.shape))
    q = ScalarField(g, rng.normal(size=g.shape))
    # symmetry and the energy identity hold to rounding by construction
    assert dot(laplacian(f), q) == pytest.approx(dot(f, laplacian(q)), abs=1e-12)
    assert dot(laplacian(f), f) == pytest.approx(-dirichlet_energy(f), abs=1e-12)
    const = ScalarField(g, np.full(g.shape, 3.7))
    assert np.abs(laplacian(const).values).max() == 0.0


def test_laplacian_neumann_eigenvector():
    # cos(pi x) at midpoints is an exact eigenvector of the compact
    # Neumann stencil with eigenvalue (2 - 2 cos(pi h)) / h^2
    g = build_grid((1.0,), (64,))
    x = g.centers(0)
    f = ScalarField(g, np.cos(np.pi * x))
    lam_h = (2.0 - 2.0 * math.cos(math.pi * g.min_h)) / g.min_h**2
    assert np.allclose(laplacian(f).values, -lam_h * f.values, atol=1e-12)
    assert lam_h == pytest.approx(math.pi**2, rel=5e-4)


def test_admissibility_projection():
    rng = np.random.default_rng(5)
    g = build_grid((1.0, 1.0), (8, 8))
    raw = rng.normal(size=g.shape + (2,))
    v = VectorField(g, raw.copy())
    assert not is_admissible(v)
    projected = project_admissible(raw.copy(), g)
    assert is_admissible(VectorField(g, projected))
    # only wall-adjacent normal components may change
    assert np.allclose(projected[1:-1, :, 0], raw[1:-1, :, 0])
    assert np.allclose(projected[:, 1:-1, 1], raw[:, 1:-1, 1])
    assert np.all(projected[0, :, 0] == 0.0)
    assert np.all(projected[:, -1, 1] == 0.0)


def test_jets_of_polynomial_fields():
    g = build_grid((1.0,), (128,))
    x = g.centers(0)
    f = ScalarField(g, x**2)
    vals, grads, hess = jet_arrays(f, order=2)
    assert np.allclose(vals, x**2)
    assert np.allclose(grads[2:-2, 0], 2 * x[2:-2], atol=1e-10)
    assert np.allclose(hess[2:-2, 0, 0], 2.0, atol=1e-8)

    jet = jet_at(f, 64, order=2)
    assert jet.value == pytest.approx(x[64] ** 2)
    assert jet.gradient[0] == pytest.approx(2 * x[64], abs=1e-10)
    assert jet.hessian[0, 0] == pytest.approx(2.0, abs=1e-8)


def test_vector_norms():
    g = build_grid((1.0,), (16,))
    v = VectorField(g, np.full((16, 1), 3.0))
    assert vector_l2(v) == pytest.approx(3.0, abs=1e-14)
    assert v.max_speed() == 3.0
