import numpy as np
import pytest
from scipy import ndimage

from cylinders_stability import (
    angle_function, cmc_cylinder_curve, cylinder_metric_coefficient, cylinder_second_fundamental,
    graph_shape_operator, rosenberg_threshold, stability_apply,
)
from exceptions import LeftDomain, OutOfDomain, OutOfRange, ValidationError
from holonomy import DiskRegion
from killing_graphs import GraphFunction
from killing_model import KillingModel
from minimal_solver import connect_torus_model, solve_minimal_torus
from scalar_fields import Domain2D


@pytest.fixture
def wide_euclidean():
    return KillingModel(Domain2D("disk", 33, 33, radius=2.0), 1, 0, 1)


def test_flat_cylinder_is_a_circle(wide_euclidean):
    curve = cmc_cylinder_curve(wide_euclidean, 0.5, (1.0, 0.0), (0.0, 1.0), 2 * np.pi)
    assert curve.complete
    x, y = curve.position(curve.samples(257))
    np.testing.assert_allclose(np.hypot(x, y), 1.0, atol=1e-8)
    end = curve.position(curve.length)
    assert end[0] == pytest.approx(1.0, abs=1e-8)
    assert end[1] == pytest.approx(0.0, abs=1e-8)


def test_flat_cylinder_curvature(wide_euclidean):
    curve = cmc_cylinder_curve(wide_euclidean, 0.5, (1.0, 0.0), (0.0, 1.0), 3.0)
    s = curve.samples(33)
    np.testing.assert_allclose(curve.turning_rate(s), 1.0, atol=1e-6)
    np.testing.assert_allclose(curve.speed(s), 1.0, atol=1e-6)


def test_hyperbolic_cylinder_has_constant_geodesic_curvature(hyperbolic_disk):
    H = 0.3
    curve = cmc_cylinder_curve(hyperbolic_disk, H, (0.0, 0.0), (1.0, 0.0), 0.5)
    s = curve.samples(21)
    np.testing.assert_allclose(curve.geodesic_curvature(s), 2 * H, atol=1e-6)
    np.testing.assert_allclose(curve.speed(s), 1.0, atol=1e-6)
    sigma = cylinder_second_fundamental(hyperbolic_disk, curve, 0.25)
    assert np.trace(sigma) == pytest.approx(2 * H, abs=1e-6)
    assert sigma[0, 1] == sigma[1, 0] == 0.0


def test_cylinder_in_warped_product():
    model = KillingModel(Domain2D("disk", 33, 33, radius=1.0), 1, "0.5", "1 + 0.3*x")
    H = 0.2
    curve = cmc_cylinder_curve(model, H, (0.0, -0.2), (1.0, 0.2), 0.6)
    for s in (0.1, 0.3, 0.5):
        sigma = cylinder_second_fundamental(model, curve, s)
        assert np.trace(sigma) == pytest.approx(2 * H, abs=1e-6)
        assert sigma[0, 1] == pytest.approx(0.5)
        x, _ = curve.position(s)
        assert cylinder_metric_coefficient(model, curve, s) == pytest.approx((1 + 0.3 * x) ** 2)


def test_curve_leaving_domain(wide_euclidean):
    with pytest.raises(LeftDomain) as excinfo:
        cmc_cylinder_curve(wide_euclidean, 0.0, (0.0, 0.0), (1.0, 0.0), 5.0)
    partial = excinfo.value.curve
    assert not partial.complete
    assert partial.length == pytest.approx(2.0, abs=1e-6)

    curve = cmc_cylinder_curve(wide_euclidean, 0.0, (0.0, 0.0), (1.0, 0.0), 5.0, allow_partial=True)
    assert curve.length == pytest.approx(partial.length)
    with pytest.raises(OutOfRange):
        curve.position(curve.length + 1.0)


def test_cylinder_arguments_checked(wide_euclidean):
    with pytest.raises(ValidationError):
        cmc_cylinder_curve(wide_euclidean, 0.5, (0.0, 0.0), (0.0, 0.0), 1.0)
    with pytest.raises(ValidationError):
        cmc_cylinder_curve(wide_euclidean, 0.5, (0.0, 0.0), (1.0, 0.0), 0.0)
    with pytest.raises(OutOfDomain):
        cmc_cylinder_curve(wide_euclidean, 0.5, (3.0, 0.0), (1.0, 0.0), 1.0)


def test_angle_function_of_flat_section(flat_torus):
    model = connect_torus_model(flat_torus)
    nu = angle_function(model, GraphFunction.constant(model.domain))
    np.testing.assert_allclose(nu, 1.0)


def test_sphere_shape_operator():
    model = KillingModel(Domain2D("disk", 65, 65, radius=1.0), 1, 0, 1)
    u = GraphFunction.from_expression(model.domain, "-sqrt(4 - x^2 - y^2)")
    geometry = graph_shape_operator(model, u)
    X_, Y_ = model.domain.mesh
    core = np.hypot(X_, Y_) < 0.8
    np.testing.assert_allclose(geometry.H[core], 0.5, atol=5e-3)
    np.testing.assert_allclose(geometry.det_A[core], 0.25, atol=5e-3)
    np.testing.assert_allclose(geometry.nu[core], np.sqrt(4 - X_ ** 2 - Y_ ** 2)[core] / 2, atol=5e-3)


def test_stability_of_heisenberg_plane(heisenberg_disk):
    domain = heisenberg_disk.domain
    u = GraphFunction.constant(domain)
    result = stability_apply(heisenberg_disk, u, np.ones(domain.shape))
    centre = (domain.nx // 2, domain.ny // 2)
    assert result[centre] == pytest.approx(2.0, abs=1e-6)
    assert np.all(np.isnan(result[~domain.interior_mask]))


def test_rosenberg_threshold(heisenberg_disk, hyperbolic_disk):
    assert rosenberg_threshold(heisenberg_disk) == pytest.approx(1.0)
    assert rosenberg_threshold(hyperbolic_disk) == pytest.approx(1.0, abs=1e-10)
    assert rosenberg_threshold(heisenberg_disk, DiskRegion((0.0, 0.0), 1.0)) == pytest.approx(1.0)
    with pytest.raises(OutOfDomain):
        rosenberg_threshold(heisenberg_disk, DiskRegion((1.5, 0.0), 1.0))


def test_rosenberg_threshold_with_varying_mu():
    model = KillingModel(Domain2D("disk", 17, 17, radius=1.0), 1, 0, "2 + x^2")
    # Laplacian(mu) / mu = 2 / (2 + x^2), largest at x = 0
    assert rosenberg_threshold(model) == pytest.approx(1.0)
    inner = ndimage.binary_erosion(model.domain.mask, iterations=3)
    assert rosenberg_threshold(model, inner) == pytest.approx(1.0)


@pytest.mark.slow
def test_killing_jacobi_field_converges():
    errors = []
    for n in (24, 48):
        model = KillingModel(Domain2D("torus", n, n, bounds=(0, 1, 0, 1)), 1,
                             "sin(2*pi*x)*sin(2*pi*y)", 1)
        model = connect_torus_model(model)
        u = solve_minimal_torus(model).raise_for_status().solution
        nu = angle_function(model, u)
        errors.append(np.max(np.abs(stability_apply(model, u, nu))))
    assert errors[0] / errors[1] > 2.5
