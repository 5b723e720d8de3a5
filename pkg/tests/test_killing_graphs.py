import numpy as np
import pytest

from exceptions import GridMismatch, ValidationError
from killing_graphs import (
    GraphFunction, area, area_element, area_element_grid, area_hessian, boundary_flux,
    div_jz_residual, mean_curvature, surface_area, z_field,
)
from killing_model import KillingModel
from minimal_solver import connect_torus_model
from scalar_fields import Domain2D

LOWER_CAP = "-sqrt(4 - x^2 - y^2)"


def euclidean(n):
    return KillingModel(Domain2D("disk", n, n, radius=1.0), 1, 0, 1)


def area_gradient(model, values):
    s = model.samples
    H = mean_curvature(model, values)
    return (-2.0 * H * s.mu * s.lam ** 2 * model.domain.cell_area).ravel()


def test_flat_torus_zero_section(flat_torus):
    model = connect_torus_model(flat_torus)
    u = GraphFunction.constant(model.domain)
    assert area(model, u) == pytest.approx(1.0, rel=1e-14)
    assert surface_area(model, u) == pytest.approx(1.0, rel=1e-14)
    np.testing.assert_allclose(mean_curvature(model, u), 0.0, atol=1e-14)


def test_jz_divergence_heisenberg(heisenberg_disk):
    residual = div_jz_residual(heisenberg_disk)
    interior = heisenberg_disk.domain.interior_mask
    assert np.all(np.isnan(residual[~interior]))
    assert np.max(np.abs(residual[interior])) < 1e-10


def test_jz_divergence_on_connected_torus(sinusoidal_torus):
    model = connect_torus_model(sinusoidal_torus)
    assert np.max(np.abs(div_jz_residual(model))) < 1e-8


@pytest.mark.slow
def test_jz_divergence_radial_connection_is_second_order():
    errors = []
    for n in (33, 65, 129):
        model = KillingModel(Domain2D("disk", n, n, radius=1.0), 1, "x + sin(y)", "1 + 0.2*x^2")
        residual = div_jz_residual(model)
        errors.append(np.nanmax(np.abs(residual)))
    assert errors[0] > 0.0
    for coarse, fine in zip(errors, errors[1:]):
        assert coarse / fine > 3.3
    assert errors[-1] < 1e-4


def test_heisenberg_z_field(heisenberg_disk):
    zx, zy = z_field(heisenberg_disk)(0.3, -0.4)
    assert zx == pytest.approx(0.4, abs=1e-12)
    assert zy == pytest.approx(0.3, abs=1e-12)


def test_tilted_plane_is_minimal(euclidean_disk):
    u = GraphFunction.from_expression(euclidean_disk.domain, "0.3*x - 0.2*y")
    H = mean_curvature(euclidean_disk, u)
    assert np.nanmax(np.abs(H)) < 1e-12


def test_lower_cap_mean_curvature_converges():
    errors = []
    for n in (17, 33):
        model = euclidean(n)
        H = mean_curvature(model, GraphFunction.from_expression(model.domain, LOWER_CAP))
        errors.append(np.nanmax(np.abs(H - 0.5)))
    assert errors[1] < 2e-2
    assert errors[0] / errors[1] > 3.0


def test_summation_by_parts_on_disk(heisenberg_disk):
    u = GraphFunction.from_expression(heisenberg_disk.domain, "0.2*x^2 - 0.1*x*y")
    s = heisenberg_disk.samples
    H = mean_curvature(heisenberg_disk, u)
    interior = heisenberg_disk.domain.interior_mask
    total = np.sum((2.0 * H * s.mu * s.lam ** 2)[interior]) * heisenberg_disk.domain.cell_area
    assert total == pytest.approx(boundary_flux(heisenberg_disk, u), rel=1e-10, abs=1e-12)


def test_summation_by_parts_on_torus(sinusoidal_torus):
    model = connect_torus_model(sinusoidal_torus)
    u = GraphFunction.from_expression(model.domain, "0.1*cos(2*pi*x) + 0.05*sin(2*pi*(x + y))")
    s = model.samples
    H = mean_curvature(model, u)
    assert abs(np.sum(H * s.mu * s.lam ** 2)) < 1e-10
    assert boundary_flux(model, u) == 0.0


def test_mean_curvature_is_area_gradient(sinusoidal_torus):
    model = connect_torus_model(sinusoidal_torus)
    u = GraphFunction.from_expression(model.domain, "0.1*cos(2*pi*x)").values
    gradient = area_gradient(model, u)
    eps = 1e-6
    for k in (0, 37, 300):
        bump = np.zeros(u.size)
        bump[k] = eps
        bump = bump.reshape(u.shape)
        numeric = (surface_area(model, u + bump) - surface_area(model, u - bump)) / (2 * eps)
        assert numeric == pytest.approx(gradient[k], abs=1e-8)


def test_area_hessian(sinusoidal_torus):
    model = connect_torus_model(sinusoidal_torus)
    u = GraphFunction.from_expression(model.domain, "0.1*cos(2*pi*x)").values
    hessian = area_hessian(model, u)
    assert abs(hessian - hessian.T).max() < 1e-12
    np.testing.assert_allclose(hessian @ np.ones(u.size), 0.0, atol=1e-12)

    v = np.random.default_rng(3).normal(size=u.size)
    eps = 1e-6
    step = eps * v.reshape(u.shape)
    numeric = (area_gradient(model, u + step) - area_gradient(model, u - step)) / (2 * eps)
    np.testing.assert_allclose(hessian @ v, numeric, rtol=1e-5, atol=1e-8)


def test_area_element_heisenberg(heisenberg_disk):
    u = GraphFunction.constant(heisenberg_disk.domain)
    # Gu = -Z, so W^2 = 1 + x^2 + y^2
    assert area_element(heisenberg_disk, "0", (0.3, 0.4)) == pytest.approx(np.sqrt(1.25))
    W = area_element_grid(heisenberg_disk, u)
    X_, Y_ = heisenberg_disk.domain.mesh
    inside = heisenberg_disk.domain.mask
    np.testing.assert_allclose(W[inside], np.sqrt(1 + X_ ** 2 + Y_ ** 2)[inside], atol=1e-12)


def test_graph_shape_checked(heisenberg_disk):
    with pytest.raises(GridMismatch):
        mean_curvature(heisenberg_disk, np.zeros((4, 4)))
    with pytest.raises(ValidationError):
        GraphFunction(heisenberg_disk.domain, np.zeros(heisenberg_disk.domain.shape), boundary="periodic")


def test_torus_graph_must_be_periodic(flat_torus):
    with pytest.raises(ValidationError):
        GraphFunction.from_expression(flat_torus.domain, "x")


def test_graph_values_masked_off_disk(heisenberg_disk):
    u = GraphFunction.constant(heisenberg_disk.domain, 2.0)
    assert np.all(np.isnan(u.values[~heisenberg_disk.domain.mask]))
    assert not u.values.flags.writeable
