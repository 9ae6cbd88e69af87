"""Control laws: hand values, linearity, floors, catalog plumbing."""

import numpy as np
import pytest

from swarmfield.catalog import make_density, make_vector_field
from swarmfield.controllers import (
    apply,
    constant_direction,
    controller_catalog,
    error_feedback_field,
    error_gradient,
    make_controller,
    pointwise,
    transport_field,
    zero,
)
from swarmfield.errors import DensityFloorError, InitializerUnknownError
from swarmfield.grid import Jet, ScalarField, build_grid, divergence, gradient


def test_catalog_contents():
    names = controller_catalog()
    assert "error_gradient" in names
    assert "zero" in names
    assert "constant_direction" in names
    assert "pointwise:rotation_stream" in names
    assert "pointwise_error:logistic_1d" in names
    assert names == sorted(names)


def test_error_gradient_hand_value():
    # rho = 1 + 0.3 cos(pi x), mu = 1 at x = 0.5: K = 0.3 pi exactly
    ctrl = error_gradient()
    jet_rho = Jet(1, 1.0, np.array([-0.3 * np.pi]))
    jet_mu = Jet(1, 1.0, np.zeros(1))
    out = ctrl.evaluate(np.array([0.5]), jet_rho, jet_mu)
    assert out[0] == pytest.approx(0.3 * np.pi, abs=1e-14)


def test_error_gradient_linear_in_error_gradient():
    ctrl = error_gradient()
    mu = Jet(1, 1.0, np.zeros(2))
    one = ctrl.evaluate(np.zeros(2), Jet(1, 2.0, np.array([0.4, -0.2])), mu)
    two = ctrl.evaluate(np.zeros(2), Jet(1, 2.0, np.array([0.8, -0.4])), mu)
    assert np.allclose(two, 2.0 * one, atol=1e-15)


def test_error_gradient_floor_guard():
    ctrl = error_gradient()
    with pytest.raises(DensityFloorError) as exc_info:
        ctrl.evaluate(np.zeros(1), Jet(1, 1e-9, np.zeros(1)), Jet(1, 1.0, np.zeros(1)))
    assert exc_info.value.floor == 1e-8


def test_apply_matches_discrete_composition():
    g = build_grid((1.0,), (64,))
    rho = make_density(g, "cosine_bump", {"amplitude": 0.3, "modes": [1]})
    mu = make_density(g, "uniform")
    field = apply(error_gradient(), rho, mu)
    by_hand = -(gradient(rho).values - gradient(mu).values) / rho.values[..., None]
    assert np.allclose(field.values, by_hand, atol=1e-15)


def test_feedback_linearization_identity():
    # rho * K collapses to -grad(rho - mu), so the closed-loop flux
    # divergence equals the error's gradient-flux divergence exactly
    g = build_grid((1.0, 1.0), (24, 24))
    rng = np.random.default_rng(4)
    rho = ScalarField(g, 1.0 + 0.2 * rng.random(g.shape))
    mu = make_density(g, "uniform")
    K = apply(error_gradient(), rho, mu)
    flux = type(K)(g, rho.values[..., None] * K.values)
    e = ScalarField(g, rho.values - mu.values)
    lhs = divergence(flux).values
    rhs = -divergence(gradient(e)).values
    assert np.allclose(lhs, rhs, atol=1e-12)


def test_zero_controller():
    g = build_grid((1.0, 1.0), (8, 8))
    rho = make_density(g, "uniform")
    z = zero()
    assert z.order == 0
    assert z.diffusion_scale == 0.0
    out = apply(z, rho, rho)
    assert np.all(out.values == 0.0)
    assert z.characteristic_speed(g.points(), (rho.values, None), (rho.values, None)) == 0.0


def test_constant_direction_law():
    g = build_grid((1.0, 1.0), (8, 8))
    rho = make_density(g, "uniform")
    cd = constant_direction()
    out = apply(cd, rho, rho)
    # k = r e_axis, and the uniform density is identically 1
    assert np.allclose(out.values[..., 0], 1.0)
    assert np.all(out.values[..., 1] == 0.0)
    assert not cd.rotation_equivariant
    speed = cd.characteristic_speed(g.points(), (rho.values, None), (rho.values, None))
    assert speed == pytest.approx(2.0)  # |k + r dk/dr| = 2r at r = 1


def test_transport_controller_reads_field_only():
    g = build_grid((1.0, 1.0), (16, 16))
    field = make_vector_field("rotation_stream", g.extents)
    ctrl = transport_field(field)
    rho = make_density(g, "cosine_bump", {"amplitude": 0.3, "modes": [1, 1]})
    mu = make_density(g, "uniform")
    out = apply(ctrl, rho, mu)
    assert np.allclose(out.values, field.velocity(g.points()), atol=1e-15)
    # same law regardless of the density argument
    out2 = apply(ctrl, mu, mu)
    assert np.array_equal(out.values, out2.values)


def test_error_feedback_vanishes_at_reference():
    g = build_grid((1.0,), (32,))
    mu = make_density(g, "uniform")
    ctrl = error_feedback_field(make_vector_field("logistic_1d", g.extents))
    out = apply(ctrl, mu, mu)
    assert np.all(out.values == 0.0)


def test_make_controller_resolves_catalog_names():
    for name in controller_catalog():
        extents = (1.0,) if "logistic" in name else (1.0, 1.0)
        ctrl = make_controller(name, extents)
        assert ctrl.order in (0, 1)
    with pytest.raises(InitializerUnknownError):
        make_controller("gradient_error", (1.0,))


def test_make_controller_matches_direct_constructors():
    g = build_grid((1.0,), (32,))
    rho = make_density(g, "cosine_bump", {"amplitude": 0.2, "modes": [1]})
    mu = make_density(g, "uniform")
    a = apply(make_controller("pointwise_error:logistic_1d", g.extents), rho, mu)
    b = apply(error_feedback_field(make_vector_field("logistic_1d", g.extents)), rho, mu)
    assert np.array_equal(a.values, b.values)


def test_pointwise_wrapper_validation():
    with pytest.raises(ValueError):
        pointwise()
    with pytest.raises(ValueError):
        pointwise(lambda x, r, m: np.zeros(1), k_arrays=lambda p, r, m: np.zeros(p.shape))


def test_pointwise_scalar_table_is_vectorized():
    g = build_grid((1.0,), (8,))
    ctrl = pointwise(lambda x, r, m: np.array([r - m]))
    rho = ScalarField(g, np.full(8, 1.25))
    mu = ScalarField(g, np.ones(8))
    out = apply(ctrl, rho, mu)
    assert np.allclose(out.values[..., 0], 0.25, atol=1e-15)


def test_apply_rejects_grid_mismatch():
    g1 = build_grid((1.0,), (8,))
    g2 = build_grid((1.0,), (16,))
    with pytest.raises(ValueError):
        apply(zero(), make_density(g1, "uniform"), make_density(g2, "uniform"))
