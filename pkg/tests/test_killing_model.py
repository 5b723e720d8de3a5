import numpy as np
import pytest

from config import ORTHONORMALITY_TOLERANCE
from exceptions import BoundaryTooClose, NonPositiveField, OutOfDomain, ValidationError
from killing_model import (
    KillingModel, build_eta, bundle_curvature_check, connection_coeffs, frame_at,
    gaussian_curvature, lie_brackets, metric_at, scalar_curvature, sectional_curvatures,
)
from scalar_fields import Domain2D


@pytest.fixture
def warped_model():
    """Model with every field non-constant"""
    return KillingModel(Domain2D("disk", 33, 33, radius=1.0),
                        "1 + 0.1*x^2", "sin(x)*cos(y)", "1 + 0.2*y")


def test_frame_is_orthonormal(warped_model):
    point = (0.3, -0.2)
    metric = metric_at(warped_model, point)
    frame = frame_at(warped_model, point)
    np.testing.assert_allclose(frame @ metric @ frame.T, np.eye(3), atol=ORTHONORMALITY_TOLERANCE)


def test_metric_is_symmetric(warped_model):
    metric = metric_at(warped_model, (0.1, 0.4))
    np.testing.assert_allclose(metric, metric.T)


def test_bundle_curvature_recovered_with_exact_derivatives(warped_model):
    for point in [(0.0, 0.0), (0.3, 0.2), (-0.5, 0.4)]:
        expected = np.sin(point[0]) * np.cos(point[1])
        assert bundle_curvature_check(warped_model, point) == pytest.approx(expected, abs=1e-8)


def test_bundle_curvature_finite_differences_are_second_order(warped_model):
    point = (0.3, 0.2)
    expected = np.sin(0.3) * np.cos(0.2)
    coarse = abs(bundle_curvature_check(warped_model, point, step=0.04) - expected)
    fine = abs(bundle_curvature_check(warped_model, point, step=0.02) - expected)
    assert 3.0 < coarse / fine < 5.0


def test_bundle_curvature_needs_room_for_differences(heisenberg_disk):
    with pytest.raises(BoundaryTooClose):
        bundle_curvature_check(heisenberg_disk, (1.95, 0.0), step=0.1)


def test_build_eta_matches_radial_field(warped_model):
    point = (0.4, -0.3)
    eta = build_eta(warped_model.tau, warped_model.lam, warped_model.mu, point)
    assert eta == pytest.approx(warped_model.eta(*point), abs=1e-14)


def test_build_eta_heisenberg():
    assert build_eta(1, 1, 1, (0.5, 0.5)) == pytest.approx(1.0)
    with pytest.raises(OutOfDomain):
        build_eta(1, 1, 1, (3.0, 0.0), domain=Domain2D("disk", 9, 9, radius=2.0))


def test_heisenberg_curvatures(heisenberg_disk):
    point = (0.2, -0.1)
    k12, k13, k23 = sectional_curvatures(heisenberg_disk, point)
    assert k12 == pytest.approx(-3.0, abs=1e-10)
    assert k13 == pytest.approx(1.0, abs=1e-10)
    assert k23 == pytest.approx(1.0, abs=1e-10)
    assert scalar_curvature(heisenberg_disk, point) == pytest.approx(-2.0, abs=1e-10)
    assert gaussian_curvature(heisenberg_disk, point) == 0.0


def test_heisenberg_brackets(heisenberg_disk):
    brackets = lie_brackets(heisenberg_disk, (0.5, 0.5))
    np.testing.assert_allclose(brackets[0, 1], [0.0, 0.0, 2.0], atol=1e-12)
    np.testing.assert_allclose(brackets[0, 2], 0.0, atol=1e-12)
    np.testing.assert_allclose(brackets[1, 0], -brackets[0, 1])


def test_connection_is_torsion_free(warped_model):
    point = (0.25, -0.35)
    table = connection_coeffs(warped_model, point)
    brackets = lie_brackets(warped_model, point)
    for i in range(3):
        for j in range(3):
            np.testing.assert_allclose(table[i, j] - table[j, i], brackets[i, j], atol=1e-8)


def test_connection_is_metric(warped_model):
    table = connection_coeffs(warped_model, (0.1, 0.2))
    # <nabla_X E_j, E_k> + <E_j, nabla_X E_k> = 0 in an orthonormal frame
    np.testing.assert_allclose(table + np.swapaxes(table, 1, 2), 0.0, atol=1e-14)


def test_hyperbolic_base(hyperbolic_disk):
    assert hyperbolic_disk.km_method == "symbolic"
    assert gaussian_curvature(hyperbolic_disk, (0.2, 0.1)) == pytest.approx(-1.0, abs=1e-10)
    assert scalar_curvature(hyperbolic_disk, (0.2, 0.1)) == pytest.approx(-2.0, abs=1e-10)


def test_non_positive_fields_rejected():
    with pytest.raises(NonPositiveField):
        KillingModel(Domain2D("disk", 9, 9, radius=1.0), 1, 0, "x")
    with pytest.raises(NonPositiveField):
        KillingModel(Domain2D("disk", 9, 9, radius=1.0), "-1", 0, 1)


def test_torus_fields_must_be_periodic():
    with pytest.raises(ValidationError):
        KillingModel(Domain2D("torus", 8, 8, bounds=(0, 1, 0, 1)), 1, "x", 1)


def test_torus_model_has_no_connection_until_solved(flat_torus):
    assert flat_torus.z_source is None
    with pytest.raises(ValidationError):
        flat_torus.alpha


def test_points_outside_rejected(heisenberg_disk):
    with pytest.raises(OutOfDomain):
        metric_at(heisenberg_disk, (2.5, 0.0))
    with pytest.raises(OutOfDomain):
        frame_at(heisenberg_disk, (float("nan"), 0.0))


def test_explicit_connection_model():
    domain = Domain2D("rectangle", 17, 17, bounds=(-1, 1, -1, 1))
    model = KillingModel.from_connection(domain, 1, 0.5, 1, 0, "x")
    assert model.z_source == "explicit"
    assert bundle_curvature_check(model, (0.0, 0.0)) == pytest.approx(0.5)


def test_radial_connection_needs_the_origin_in_the_domain():
    away = Domain2D("rectangle", 9, 9, bounds=(1, 2, -1, 1))
    with pytest.raises(OutOfDomain):
        KillingModel(away, 1, "x", 1)
    model = KillingModel.from_connection(away, 1, 0.5, 1, 0, "x")
    assert model.z_source == "explicit"
    corner = KillingModel(Domain2D("rectangle", 9, 9, bounds=(0, 1, 0, 1)), 1, 1, 1)
    assert corner.z_source == "radial_eta"
