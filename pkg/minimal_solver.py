"""
Minimal and prescribed mean curvature Killing graphs

Entire sections over torus bases and Dirichlet graphs over disks and
rectangles are found by minimising the discrete area

    J(u) = A(u) + sum 2 H_target mu lambda^2 hx hy u

with a damped Newton method. A is convex, so Newton steps with an Armijo
line search converge globally; when a Newton step fails to decrease J a
Jacobi-preconditioned gradient step is tried instead. Periodic problems are
solved on the zero-mean subspace (solutions are unique up to vertical
translation).
"""

import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field

import numpy as np
import scipy.sparse as sp
from scipy.sparse.linalg import LinearOperator, cg, spsolve

from config import (
    ARMIJO_C, BACKTRACK_FACTOR, CURL_TOLERANCE, DEFAULT_SEED, LINEAR_TOLERANCE,
    MAX_ITERATIONS, MIN_STEP, MINIMALITY_TRIALS, OBSTRUCTION_TOLERANCE,
    PERTURBATION_AMPLITUDE, PERTURBATION_MODES, SOLVER_TOLERANCE, THREADS,
)
from exceptions import MaxIterationsExceeded, ObstructionNonzero, ValidationError
from killing_graphs import (
    GraphFunction, area_hessian, difference_matrices, mean_curvature, surface_area,
)
from killing_model import PotentialConnection
from scalar_fields import _as_field

logger = logging.getLogger(__name__)

# Armijo comparisons allow for rounding in the area sums
_ROUNDING_SLACK = 1e-14


@dataclass(frozen=True)
class SolverConfig:
    tolerance: float = SOLVER_TOLERANCE
    max_iterations: int = MAX_ITERATIONS
    armijo_c: float = ARMIJO_C
    backtrack: float = BACKTRACK_FACTOR
    min_step: float = MIN_STEP
    linear_tolerance: float = LINEAR_TOLERANCE
    obstruction_tolerance: float = OBSTRUCTION_TOLERANCE
    curl_tolerance: float = CURL_TOLERANCE

    def __post_init__(self):
        if not self.tolerance > 0:
            raise ValidationError("solver.tolerance", "must be positive")
        if int(self.max_iterations) != self.max_iterations or self.max_iterations < 1:
            raise ValidationError("solver.max_iterations", "must be an integer >= 1")
        if not 0 < self.armijo_c < 1:
            raise ValidationError("solver.armijo_c", "must lie in (0, 1)")
        if not 0 < self.backtrack < 1:
            raise ValidationError("solver.backtrack", "must lie in (0, 1)")
        if not self.min_step > 0:
            raise ValidationError("solver.min_step", "must be positive")
        if not self.linear_tolerance > 0:
            raise ValidationError("solver.linear_tolerance", "must be positive")
        if not self.obstruction_tolerance > 0:
            raise ValidationError("solver.obstruction_tolerance", "must be positive")
        if not self.curl_tolerance > 0:
            raise ValidationError("solver.curl_tolerance", "must be positive")


@dataclass(frozen=True)
class SolveReport:
    """Outcome of a solve; ``area`` is the surface area of the final graph"""
    solution: GraphFunction
    H: np.ndarray
    iterations: int
    residual: float
    area: float
    converged: bool
    tolerance: float
    residual_history: tuple = ()
    area_history: tuple = ()
    step_kinds: tuple = ()

    def raise_for_status(self):
        if not self.converged:
            raise MaxIterationsExceeded(self)
        return self

    def summary(self):
        return {
            "iterations": self.iterations,
            "residual": self.residual,
            "area": self.area,
            "converged": self.converged,
            "tolerance": self.tolerance,
            "residual_history": list(self.residual_history),
            "area_history": list(self.area_history),
            "step_kinds": list(self.step_kinds),
        }


@dataclass(frozen=True)
class MinimalityReport:
    passed: bool
    margins: tuple
    trials: int
    seed: int = DEFAULT_SEED
    failures: tuple = field(default=())

    def summary(self):
        data = asdict(self)
        data["margins"] = list(self.margins)
        data["failures"] = list(self.failures)
        data["min_margin"] = min(self.margins) if self.margins else None
        return data


def solve_zero_mean(matrix, rhs, tolerance=LINEAR_TOLERANCE):
    """
    Solve matrix @ x = rhs on the zero-mean subspace by conjugate gradients.

    ``matrix`` must be symmetric positive semidefinite with the constants in
    its kernel; the mean of ``rhs`` is projected out.
    """
    n = matrix.shape[0]

    def project(v):
        return v - v.mean()

    operator = LinearOperator((n, n), matvec=lambda v: project(matrix @ project(v)), dtype=float)
    solution, info = cg(operator, project(np.asarray(rhs, dtype=float)),
                        rtol=tolerance, atol=0.0, maxiter=20 * n)
    if info != 0:
        logger.warning(f"CG stopped before reaching rtol={tolerance:.1e} (info={info})")
    return project(solution)


def _flux_density(model):
    return model.domain.sample(model.tau * model.lam * model.lam / model.mu)


def obstruction_mean(model):
    """Mean of tau lambda^2 / mu over the torus nodes; global sections need it to vanish"""
    return float(np.mean(_flux_density(model)))


def _torus_connection(model, config):
    domain = model.domain
    if not domain.periodic:
        raise ValidationError("domain.kind", "periodic potentials need a torus base")
    density = _flux_density(model)
    mean = float(np.mean(density))
    if abs(mean) > config.obstruction_tolerance:
        raise ObstructionNonzero(mean, config.obstruction_tolerance)

    rhs = 2.0 * (density - mean)
    eye_x, fx, _ = difference_matrices(domain.nx, domain.hx, True)
    eye_y, fy, _ = difference_matrices(domain.ny, domain.hy, True)
    negative_laplacian = sp.kron(fx.T @ fx, eye_y) + sp.kron(eye_x, fy.T @ fy)
    psi = solve_zero_mean(negative_laplacian.tocsr(), -rhs.ravel(), config.linear_tolerance)
    logger.debug(f"Torus potential solved; obstruction mean {mean:.3e}")
    return PotentialConnection(domain, psi.reshape(domain.shape))


def connect_torus_model(model, config=None):
    """The torus model with connection Z = J grad(psi), five-point Laplacian(psi) = 2 tau lambda^2 / mu"""
    config = config or SolverConfig()
    return model.with_connection(_torus_connection(model, config))


def make_torus_z(model, config=None):
    """
    Z on a torus base from a periodic potential.

    Raises ObstructionNonzero when the mean of tau lambda^2 / mu exceeds the
    obstruction tolerance: then no global section exists.
    """
    return connect_torus_model(model, config).z_field()


def _line_search(objective, values, current, slope, direction, config):
    step = 1.0
    while step >= config.min_step:
        trial = values + step * direction
        value = objective(trial)
        if value <= current + config.armijo_c * step * slope + _ROUNDING_SLACK * abs(current):
            return trial, value
        step *= config.backtrack
    return None, None


def _minimise(model, values, free, H_target, config):
    domain = model.domain
    s = model.samples
    periodic = domain.periodic
    weight = 2.0 * s.mu * s.lam ** 2 * domain.cell_area
    flat_free = np.flatnonzero(free.ravel())

    def objective(candidate):
        linear = np.sum((weight * H_target * candidate)[free])
        return surface_area(model, candidate) + linear

    current = objective(values)
    residual_history, area_history, step_kinds = [], [current], []
    converged = False
    iterations = 0
    H = mean_curvature(model, values)

    for iterations in range(1, config.max_iterations + 1):
        residual = float(np.max(np.abs(H - H_target)[free]))
        residual_history.append(residual)
        logger.debug(f"iteration {iterations}: residual {residual:.3e}, functional {current:.15g}")
        if residual <= config.tolerance:
            converged = True
            break

        gradient = (weight * (H_target - H))[free]
        hessian = area_hessian(model, values)[flat_free][:, flat_free]
        if periodic:
            newton = solve_zero_mean(hessian, -gradient, config.linear_tolerance)
        else:
            newton = spsolve(hessian.tocsc(), -gradient)

        accepted = None
        if np.all(np.isfinite(newton)) and gradient @ newton < 0:
            direction = np.zeros(domain.shape)
            direction[free] = newton
            accepted, value = _line_search(objective, values, current, gradient @ newton,
                                           direction, config)
            kind = "newton"
        if accepted is None:
            diagonal = hessian.diagonal()
            preconditioned = -gradient / np.where(diagonal > 0, diagonal, 1.0)
            direction = np.zeros(domain.shape)
            direction[free] = preconditioned
            accepted, value = _line_search(objective, values, current, gradient @ preconditioned,
                                           direction, config)
            kind = "gradient"
        if accepted is None:
            logger.warning(f"Line search stalled at iteration {iterations} (residual {residual:.3e})")
            break

        values = accepted - np.mean(accepted) if periodic else accepted
        current = value
        area_history.append(current)
        step_kinds.append(kind)
        H = mean_curvature(model, values)
    else:
        residual_history.append(float(np.max(np.abs(H - H_target)[free])))
        converged = residual_history[-1] <= config.tolerance

    solution = GraphFunction(domain, values)
    report = SolveReport(
        solution=solution,
        H=H,
        iterations=len(step_kinds),
        residual=residual_history[-1],
        area=surface_area(model, values),
        converged=converged,
        tolerance=config.tolerance,
        residual_history=tuple(residual_history),
        area_history=tuple(area_history),
        step_kinds=tuple(step_kinds),
    )
    if converged:
        logger.info(f"Converged after {report.iterations} steps: residual {report.residual:.3e}, "
                    f"area {report.area:.12g}")
    else:
        logger.warning(f"Not converged after {report.iterations} steps: residual {report.residual:.3e}")
    return report


def solve_minimal_torus(model, config=None, initial=None):
    """
    Entire minimal graph over a torus base, gauged to zero mean.

    The model is connected with ``make_torus_z`` first when it carries no
    connection. Check ``report.converged`` or call ``raise_for_status()``.
    """
    config = config or SolverConfig()
    if not model.domain.periodic:
        raise ValidationError("domain.kind", "solve_minimal_torus needs a torus base")
    mean = obstruction_mean(model)
    if abs(mean) > config.obstruction_tolerance:
        raise ObstructionNonzero(mean, config.obstruction_tolerance)
    if not model.has_connection:
        model = connect_torus_model(model, config)

    if initial is None:
        values = np.zeros(model.domain.shape)
    elif isinstance(initial, GraphFunction):
        values = np.array(initial.values)
    else:
        values = np.array(initial, dtype=float)
    values = values - np.mean(values)
    free = np.ones(model.domain.shape, dtype=bool)
    return _minimise(model, values, free, 0.0, config)


def solve_dirichlet(model, boundary, H_target=0.0, config=None):
    """
    Graph of constant mean curvature ``H_target`` with the boundary ring of
    nodes fixed to ``boundary`` (a GraphFunction, field or expression).
    Interior nodes start from the mean of the boundary values.
    """
    config = config or SolverConfig()
    domain = model.domain
    if domain.periodic:
        raise ValidationError("domain.kind", "Dirichlet problems need a disk or rectangle base")
    if isinstance(boundary, GraphFunction):
        trace = np.array(boundary.values)
    else:
        trace = domain.sample(_as_field(boundary))
    free = np.array(domain.interior_mask)
    fixed = domain.mask & ~free
    if not np.all(np.isfinite(trace[fixed])):
        raise ValidationError("boundary", "boundary trace is not finite on the boundary ring")
    values = np.where(domain.mask, trace, np.nan)
    values[free] = np.mean(trace[fixed])
    return _minimise(model, values, free, float(H_target), config)


def _perturbation(domain, rng, modes, amplitude):
    x0, _, y0, _ = domain.bounds
    lx, ly = domain.lengths
    X_, Y_ = domain.mesh
    values = np.zeros(domain.shape)
    for _ in range(modes):
        kx, ky = rng.integers(-3, 4, size=2)
        if kx == 0 and ky == 0:
            kx = 1
        phase = rng.uniform(0.0, 2 * np.pi)
        weight = rng.normal()
        values += weight * np.sin(2 * np.pi * (kx * (X_ - x0) / lx + ky * (Y_ - y0) / ly) + phase)
    return amplitude * values / np.max(np.abs(values))


def verify_area_minimality(model, u_min, trials=MINIMALITY_TRIALS, seed=DEFAULT_SEED,
                           modes=PERTURBATION_MODES, amplitude=PERTURBATION_AMPLITUDE):
    """
    Compare the area of ``u_min`` with random smooth periodic perturbations
    u_min + v (truncated Fourier series, max |v| = amplitude). A trial passes
    when area(u_min + v) - area(u_min) >= -1e-12.
    """
    if not model.domain.periodic:
        raise ValidationError("domain.kind", "area minimality trials need a torus base")
    if not model.has_connection:
        model = connect_torus_model(model)
    base_values = u_min.values if isinstance(u_min, GraphFunction) else np.asarray(u_min, dtype=float)
    rng = np.random.default_rng(seed)
    perturbations = [_perturbation(model.domain, rng, modes, amplitude) for _ in range(trials)]
    base_area = surface_area(model, base_values)

    def margin(v):
        return surface_area(model, base_values + v) - base_area

    with ThreadPoolExecutor(max_workers=THREADS) as pool:
        margins = tuple(float(m) for m in pool.map(margin, perturbations))
    failures = tuple(i for i, m in enumerate(margins) if m < -1e-12)
    report = MinimalityReport(passed=not failures, margins=margins, trials=trials, seed=seed,
                              failures=failures)
    logger.info(f"Area minimality: {trials - len(failures)}/{trials} trials passed, "
                f"min margin {min(margins) if margins else float('nan'):.3e}")
    return report
