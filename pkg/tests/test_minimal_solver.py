import numpy as np
import pytest

from exceptions import MaxIterationsExceeded, ObstructionNonzero, ValidationError
from killing_graphs import GraphFunction, difference_matrices
from killing_model import KillingModel
from minimal_solver import (
    SolverConfig, make_torus_z, obstruction_mean, solve_dirichlet, solve_minimal_torus,
    solve_zero_mean, verify_area_minimality,
)
from scalar_fields import Domain2D

LOWER_CAP = "-sqrt(4 - x^2 - y^2)"


def test_flat_torus_needs_no_steps(flat_torus):
    report = solve_minimal_torus(flat_torus)
    assert report.converged
    assert report.iterations == 0
    np.testing.assert_allclose(report.solution.values, 0.0, atol=1e-15)
    assert report.area == pytest.approx(1.0, rel=1e-14)


def test_sinusoidal_torus_converges(sinusoidal_torus):
    report = solve_minimal_torus(sinusoidal_torus).raise_for_status()
    assert report.residual <= 1e-8
    assert report.iterations >= 1
    assert abs(np.mean(report.solution.values)) < 1e-12
    history = np.array(report.area_history)
    assert np.all(np.diff(history) <= 1e-14 * history[0])


def test_solution_independent_of_start(sinusoidal_torus):
    first = solve_minimal_torus(sinusoidal_torus).raise_for_status()
    start = GraphFunction.from_expression(sinusoidal_torus.domain, "0.1*cos(2*pi*x)*sin(2*pi*y)")
    second = solve_minimal_torus(sinusoidal_torus, initial=start).raise_for_status()
    np.testing.assert_allclose(first.solution.values, second.solution.values, atol=1e-6)


def test_minimal_section_beats_perturbations(sinusoidal_torus):
    report = solve_minimal_torus(sinusoidal_torus).raise_for_status()
    check = verify_area_minimality(sinusoidal_torus, report.solution, trials=5, seed=7)
    assert check.passed
    assert len(check.margins) == 5
    assert min(check.margins) > 0
    assert check.summary()["seed"] == 7


def test_minimality_trials_are_reproducible(sinusoidal_torus):
    u = solve_minimal_torus(sinusoidal_torus).solution
    first = verify_area_minimality(sinusoidal_torus, u, trials=3, seed=11)
    second = verify_area_minimality(sinusoidal_torus, u, trials=3, seed=11)
    assert first.margins == second.margins


def test_obstruction_blocks_sections():
    model = KillingModel(Domain2D("torus", 16, 16, bounds=(0, 1, 0, 1)), 1, 1, 1)
    assert obstruction_mean(model) == pytest.approx(1.0)
    with pytest.raises(ObstructionNonzero):
        solve_minimal_torus(model)
    with pytest.raises(ObstructionNonzero):
        make_torus_z(model)


def test_iteration_cap_reported(sinusoidal_torus):
    report = solve_minimal_torus(sinusoidal_torus, SolverConfig(max_iterations=1))
    assert not report.converged
    assert report.iterations == 1
    with pytest.raises(MaxIterationsExceeded):
        report.raise_for_status()


def test_dirichlet_plane_is_reproduced(euclidean_disk):
    plane = "0.3*x - 0.2*y"
    report = solve_dirichlet(euclidean_disk, plane).raise_for_status()
    exact = GraphFunction.from_expression(euclidean_disk.domain, plane).values
    inside = euclidean_disk.domain.mask
    assert np.max(np.abs(report.solution.values - exact)[inside]) < 1e-7


def test_dirichlet_cap_converges():
    errors = []
    for n in (17, 33):
        model = KillingModel(Domain2D("disk", n, n, radius=1.0), 1, 0, 1)
        report = solve_dirichlet(model, LOWER_CAP, H_target=0.5).raise_for_status()
        exact = GraphFunction.from_expression(model.domain, LOWER_CAP).values
        errors.append(np.nanmax(np.abs(report.solution.values - exact)))
    assert errors[1] < 5e-3
    assert errors[0] / errors[1] > 3.0


def test_solvers_check_domain_kind(flat_torus, euclidean_disk):
    with pytest.raises(ValidationError):
        solve_dirichlet(flat_torus, "0")
    with pytest.raises(ValidationError):
        solve_minimal_torus(euclidean_disk)
    with pytest.raises(ValidationError):
        verify_area_minimality(euclidean_disk, np.zeros(euclidean_disk.domain.shape))


def test_zero_mean_solve():
    n, h = 32, 1.0 / 32
    _, forward, _ = difference_matrices(n, h, True)
    laplacian = (forward.T @ forward).tocsr()
    x = np.linspace(0.0, 1.0, n, endpoint=False)
    rhs = np.cos(2 * np.pi * x) + 5.0
    solution = solve_zero_mean(laplacian, rhs)
    assert abs(solution.mean()) < 1e-12
    np.testing.assert_allclose(laplacian @ solution, rhs - rhs.mean(), atol=1e-9)


@pytest.mark.parametrize("options", [
    {"tolerance": 0.0},
    {"max_iterations": 0},
    {"armijo_c": 1.5},
    {"backtrack": 1.0},
])
def test_solver_config_validation(options):
    with pytest.raises(ValidationError):
        SolverConfig(**options)


def test_report_summary(flat_torus):
    summary = solve_minimal_torus(flat_torus).summary()
    assert set(summary) >= {"iterations", "residual", "area", "converged"}
    assert summary["converged"] is True
