import numpy as np
import pytest

from calabi_duality import (
    SpacelikeFunction, calabi_dual, closure_slack, dual_gradient, integrate_potential,
    lorentz_mc_residual, manufactured_tau, norm_identity_residual, rotation_divergence,
)
from exceptions import NotClosed, NotSpacelike, ValidationError
from killing_graphs import mean_curvature
from killing_model import KillingModel
from minimal_solver import SolverConfig
from scalar_fields import Domain2D, VectorField2D

MANUFACTURED_V = "0.3*x + 0.2*x*y"


@pytest.fixture(scope="module")
def manufactured():
    """Model whose tau makes MANUFACTURED_V a Lorentzian solution"""
    tau = manufactured_tau(1, 1, MANUFACTURED_V)
    model = KillingModel(Domain2D("disk", 65, 65, radius=1.0), 1, tau, 1)
    return model, SpacelikeFunction(model, expression=MANUFACTURED_V)


def test_linear_v_gives_tilted_plane(euclidean_disk):
    c = 0.5
    v = SpacelikeFunction(euclidean_disk, expression=f"{c}*x")
    assert v.margin == pytest.approx(1 - c)
    u = calabi_dual(euclidean_disk, v)
    X_, Y_ = euclidean_disk.domain.mesh
    inside = euclidean_disk.domain.mask
    expected = -c * Y_ / np.sqrt(1 - c ** 2)
    assert not np.any(np.isnan(u.values[inside]))
    np.testing.assert_allclose(u.values[inside], expected[inside], atol=1e-12)
    np.testing.assert_allclose(mean_curvature(euclidean_disk, u)[euclidean_disk.domain.interior_mask],
                               0.0, atol=1e-10)


def test_norm_identity(euclidean_disk):
    v = SpacelikeFunction(euclidean_disk, expression="0.4*x - 0.3*y")
    u = calabi_dual(euclidean_disk, v)
    inside = euclidean_disk.domain.mask
    assert np.nanmax(norm_identity_residual(euclidean_disk, v)[inside]) < 1e-12
    assert np.nanmax(norm_identity_residual(euclidean_disk, v, u)[inside]) < 1e-12


def test_manufactured_solution_is_lorentzian(manufactured):
    model, v = manufactured
    interior = model.domain.interior_mask
    assert np.max(np.abs(lorentz_mc_residual(model, v)[interior])) < 1e-10

    gridded = SpacelikeFunction(model, values=v.values)
    assert not gridded.analytic
    assert np.max(np.abs(lorentz_mc_residual(model, gridded)[interior])) < 1e-3


def test_manufactured_dual_is_minimal(manufactured):
    model, v = manufactured
    u = calabi_dual(model, v, SolverConfig())
    interior = model.domain.interior_mask
    assert np.nanmax(norm_identity_residual(model, v)[model.domain.mask]) < 1e-12
    assert np.nanmax(norm_identity_residual(model, v, u)[interior]) < 5e-3
    assert np.max(np.abs(mean_curvature(model, u)[interior])) < 1e-4


def test_gridded_manufactured_dual(manufactured):
    model, v = manufactured
    gridded = SpacelikeFunction(model, values=v.values)
    u_grid = calabi_dual(model, gridded)
    u_exact = calabi_dual(model, v)
    inside = model.domain.mask
    interior = model.domain.interior_mask
    assert not np.any(np.isnan(u_grid.values[inside]))
    np.testing.assert_allclose(u_grid.values[inside], u_exact.values[inside], atol=1e-9)
    assert np.max(np.abs(mean_curvature(model, u_grid)[interior])) < 1e-4


def test_closure_slack_only_for_sampled_forms(manufactured):
    model, v = manufactured
    domain = model.domain
    lam2 = model.lam * model.lam
    exact = dual_gradient(model, v)
    assert closure_slack(domain, lam2 * exact.x_component + model.alpha,
                         lam2 * exact.y_component + model.beta) == 0.0
    sampled = dual_gradient(model, SpacelikeFunction(model, values=v.values))
    slack = closure_slack(domain, lam2 * sampled.x_component + model.alpha,
                          lam2 * sampled.y_component + model.beta)
    assert 0.0 < slack < 1e-2


def test_gridded_v_off_the_equation_rejected(heisenberg_disk):
    v = SpacelikeFunction(heisenberg_disk, values=np.zeros(heisenberg_disk.domain.shape))
    with pytest.raises(NotClosed):
        calabi_dual(heisenberg_disk, v)


@pytest.mark.slow
def test_manufactured_dual_mean_curvature_is_second_order():
    tau = manufactured_tau(1, 1, MANUFACTURED_V)
    errors = []
    for n in (33, 65, 129):
        model = KillingModel(Domain2D("disk", n, n, radius=1.0), 1, tau, 1)
        u = calabi_dual(model, SpacelikeFunction(model, expression=MANUFACTURED_V))
        errors.append(np.max(np.abs(mean_curvature(model, u)[model.domain.interior_mask])))
    for coarse, fine in zip(errors, errors[1:]):
        assert coarse / fine > 3.3
    assert errors[-1] < 5e-6


def test_basepoint_fixes_the_constant(manufactured):
    model, v = manufactured
    centred = calabi_dual(model, v)
    shifted = calabi_dual(model, v, basepoint=(0.25, 0.0))
    i = round((0.25 - model.domain.x[0]) / model.domain.hx)
    j = round((0.0 - model.domain.y[0]) / model.domain.hy)
    assert shifted.values[i, j] == 0.0
    difference = (centred.values - shifted.values)[model.domain.mask]
    np.testing.assert_allclose(difference, difference[0], atol=1e-6)


def test_basepoint_must_be_a_domain_node(euclidean_disk):
    v = SpacelikeFunction(euclidean_disk, expression="0.1*x")
    with pytest.raises(ValidationError):
        calabi_dual(euclidean_disk, v, basepoint=(0.99, 0.99))


def test_rotation_divergence_vanishes(manufactured):
    model, v = manufactured
    assert np.nanmax(np.abs(rotation_divergence(model, v))) < 1e-10


def test_dual_gradient_heisenberg_plane(heisenberg_disk):
    v = SpacelikeFunction(heisenberg_disk, expression="0")
    gx, gy = dual_gradient(heisenberg_disk, v)(0.3, 0.2)
    assert gx == pytest.approx(0.0)
    assert gy == pytest.approx(0.0)


def test_timelike_v_rejected(euclidean_disk):
    with pytest.raises(NotSpacelike):
        SpacelikeFunction(euclidean_disk, expression="2*x")


def test_non_closed_form_rejected(euclidean_disk):
    with pytest.raises(NotClosed):
        integrate_potential(euclidean_disk, VectorField2D("-y", "x"))


def test_duality_needs_simply_connected_base(flat_torus):
    with pytest.raises(ValidationError):
        SpacelikeFunction(flat_torus, expression="0")


def test_manufactured_tau_needs_expressions(euclidean_disk):
    v = SpacelikeFunction(euclidean_disk, expression="0.1*x")
    grid_v = SpacelikeFunction(euclidean_disk, values=v.values)
    with pytest.raises(ValidationError):
        manufactured_tau(1, 1, grid_v.field)
