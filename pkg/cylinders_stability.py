"""
Vertical cylinders, graph shape operators and the stability operator

A unit-speed base curve with Euclidean angle theta satisfies

    x' = cos(theta) / lambda,   y' = sin(theta) / lambda,
    theta' = kappa_g + (-sin(theta) lambda_x + cos(theta) lambda_y) / lambda^2,

where kappa_g is the geodesic curvature measured against eta = J gamma'.
The vertical cylinder over it has constant mean curvature H exactly when
kappa_g = 2H + eta(log mu).
"""

import logging
from dataclasses import dataclass

import numpy as np
from scipy.integrate import solve_ivp

from config import CYLINDER_SAMPLES, CYLINDER_TOLERANCE
from exceptions import GridMismatch, LeftDomain, OutOfDomain, OutOfRange, ValidationError
from killing_graphs import GraphFunction, area_element_grid, centred_difference
from killing_model import _connection_table, scalar_curvature_grid

logger = logging.getLogger(__name__)

# fraction of the grid spacing kept between a curve and the domain edge
_EDGE_MARGIN = 1e-9


class CylinderCurve:
    """Unit-speed base curve of a vertical cylinder with target mean curvature H"""

    def __init__(self, model, H, solution, length, complete):
        self.model = model
        self.H = float(H)
        self._solution = solution
        self.length = float(length)
        self.complete = complete

    def __repr__(self):
        return f"CylinderCurve(H={self.H}, length={self.length:.6g}, complete={self.complete})"

    def _check(self, s):
        s = np.asarray(s, dtype=float)
        if np.any(s < 0) or np.any(s > self.length):
            raise OutOfRange(float(np.min(s) if np.any(s < 0) else np.max(s)), 0.0, self.length)
        return s

    def state(self, s):
        return self._solution(self._check(s))

    def position(self, s):
        x, y, _ = self.state(s)
        return x, y

    def angle(self, s):
        return self.state(s)[2]

    def samples(self, count=CYLINDER_SAMPLES):
        return np.linspace(0.0, self.length, count)

    def _derivative(self, function, s):
        """Five-point stencil derivative of a dense-output quantity (one-sided near the ends)"""
        s = np.atleast_1d(self._check(s))
        delta = min(1e-2, self.length / 8)
        result = np.empty(s.shape)
        for index, point in enumerate(s):
            if point - 2 * delta >= 0 and point + 2 * delta <= self.length:
                stencil = point + delta * np.array([-2, -1, 1, 2])
                weights = np.array([1, -8, 8, -1]) / (12 * delta)
            elif point + 4 * delta <= self.length:
                stencil = point + delta * np.arange(5)
                weights = np.array([-25, 48, -36, 16, -3]) / (12 * delta)
            else:
                stencil = point - delta * np.arange(5)
                weights = -np.array([-25, 48, -36, 16, -3]) / (12 * delta)
            result[index] = float(weights @ function(stencil))
        return result

    def turning_rate(self, s):
        """d(theta)/ds"""
        return self._derivative(self.angle, s)

    def normal_log_mu(self, s):
        """eta(log mu) with eta = J gamma' = (-sin theta, cos theta) / lambda"""
        x, y, theta = self.state(s)
        lam = self.model.lam(x, y)
        mu = self.model.mu(x, y)
        mx, my = self.model.mu.gradient(x, y)
        return (-np.sin(theta) * mx + np.cos(theta) * my) / (lam * mu)

    def geodesic_curvature(self, s):
        x, y, theta = self.state(s)
        lam = self.model.lam(x, y)
        lx, ly = self.model.lam.gradient(x, y)
        return self.turning_rate(s) - (-np.sin(theta) * lx + np.cos(theta) * ly) / lam ** 2

    def speed(self, s):
        """Base-metric speed |gamma'| of the sampled curve"""
        x, y = self.position(s)
        vx = self._derivative(lambda t: self.position(t)[0], s)
        vy = self._derivative(lambda t: self.position(t)[1], s)
        return self.model.lam(x, y) * np.hypot(vx, vy)


def _exit_event(domain):
    if domain.periodic:
        return None
    margin = _EDGE_MARGIN * max(domain.hx, domain.hy)

    def event(_s, state):
        return domain.distance_to_boundary(state[0], state[1]) - margin

    event.terminal = True
    event.direction = -1
    return event


def cmc_cylinder_curve(model, H, start, direction, length, tolerance=CYLINDER_TOLERANCE,
                       allow_partial=False):
    """
    Base curve of the vertical cylinder with constant mean curvature H,
    starting at ``start`` with initial heading ``direction`` (only the
    direction matters; the curve is parametrised by base arclength).

    If the curve leaves the domain first, LeftDomain is raised carrying the
    partial curve, or the partial curve is returned when ``allow_partial``.
    """
    x0, y0 = model.check_point(start)
    if not model.domain.contains(x0, y0, margin=_EDGE_MARGIN * max(model.domain.hx, model.domain.hy)):
        raise OutOfDomain(start)
    dx, dy = (float(c) for c in direction)
    if not np.hypot(dx, dy) > 0:
        raise ValidationError("direction", "initial direction must be nonzero")
    if not length > 0:
        raise ValidationError("length", "curve length must be positive")
    lam, mu = model.lam, model.mu

    def rhs(_s, state):
        x, y, theta = state
        c, s = np.cos(theta), np.sin(theta)
        lam_value = lam(x, y)
        lx, ly = lam.gradient(x, y)
        mx, my = mu.gradient(x, y)
        kappa = 2 * H + (-s * mx + c * my) / (lam_value * mu(x, y))
        return [c / lam_value, s / lam_value, kappa + (-s * lx + c * ly) / lam_value ** 2]

    event = _exit_event(model.domain)
    solution = solve_ivp(rhs, (0.0, float(length)), [x0, y0, np.arctan2(dy, dx)], method="DOP853",
                         rtol=tolerance, atol=tolerance, dense_output=True,
                         events=None if event is None else [event])
    if solution.status == -1:
        raise LeftDomain(f"cylinder integration failed: {solution.message}")
    end = float(solution.t[-1])
    complete = solution.status == 0
    curve = CylinderCurve(model, H, solution.sol, end, complete)
    if not complete:
        message = f"curve left the domain at s = {end:.6g} of {length}"
        if not allow_partial:
            raise LeftDomain(message, curve=curve)
        logger.warning(message)
    return curve


def cylinder_second_fundamental(model, curve, s):
    """[[kappa_g, tau], [tau, -eta(log mu)]] at gamma(s), in the frame (gamma', E3)"""
    x, y = curve.position(s)
    kappa = float(curve.geodesic_curvature(s)[0])
    tau = float(model.tau(x, y))
    return np.array([[kappa, tau], [tau, -float(curve.normal_log_mu(s))]])


def cylinder_metric_coefficient(model, curve, s):
    """mu(gamma(s))^2, the dt^2 coefficient of the cylinder metric ds^2 + mu^2 dt^2"""
    x, y = curve.position(s)
    return float(model.mu(x, y) ** 2)


def angle_function(model, u):
    """nu = <N, xi> = 1 / W for the upward normal"""
    return 1.0 / area_element_grid(model, u)


@dataclass(frozen=True)
class GraphGeometry:
    """Nodal first/second fundamental forms of a Killing graph in coordinates (x, y)"""
    E: np.ndarray
    F: np.ndarray
    G: np.ndarray
    h11: np.ndarray
    h12: np.ndarray
    h22: np.ndarray
    H: np.ndarray
    det_A: np.ndarray
    nu: np.ndarray


def _values(model, u):
    values = u.values if isinstance(u, GraphFunction) else np.asarray(u, dtype=float)
    if values.shape != model.domain.shape:
        raise GridMismatch(model.domain.shape, values.shape)
    return values


def graph_shape_operator(model, u):
    """
    First and second fundamental forms of the graph of u, its mean
    curvature and det A, from the frame connection table.

    Tangents are c_x = lambda E1 + mu p E3 and c_y = lambda E2 + mu q E3 with
    p = u_x - alpha, q = u_y - beta, and the upward unit normal is
    N = (-(p / lambda) E1 - (q / lambda) E2 + (1 / mu) E3) / W.
    """
    domain = model.domain
    periodic = domain.periodic
    values = _values(model, u)
    X_, Y_ = domain.mesh
    s = model.samples
    lam, mu = s.lam, s.mu
    p = centred_difference(values, domain.hx, 0, periodic) - s.alpha
    q = centred_difference(values, domain.hy, 1, periodic) - s.beta
    W = np.sqrt(1.0 / mu ** 2 + (p ** 2 + q ** 2) / lam ** 2)

    zero = np.zeros(domain.shape)
    lx, ly = model.lam.gradient(X_, Y_)
    mp, mq = mu * p, mu * q
    tangents = np.array([[lam, zero, mp], [zero, lam, mq]])
    derivatives = np.array([
        [[lx, zero, centred_difference(mp, domain.hx, 0, periodic)],
         [zero, lx, centred_difference(mq, domain.hx, 0, periodic)]],
        [[ly, zero, centred_difference(mp, domain.hy, 1, periodic)],
         [zero, ly, centred_difference(mq, domain.hy, 1, periodic)]],
    ])
    normal = np.array([-p / lam, -q / lam, 1.0 / mu]) / W
    table = _connection_table(model, X_, Y_)

    h = (np.einsum("ijk...,k...->ij...", derivatives, normal)
         + np.einsum("il...,jk...,lkm...,m...->ij...", tangents, tangents, table, normal))
    h12 = 0.5 * (h[0, 1] + h[1, 0])
    E = lam ** 2 + mp ** 2
    F = mp * mq
    G = lam ** 2 + mq ** 2
    det_I = E * G - F ** 2
    H = 0.5 * (G * h[0, 0] - 2 * F * h12 + E * h[1, 1]) / det_I
    det_A = (h[0, 0] * h[1, 1] - h12 ** 2) / det_I
    return GraphGeometry(E=E, F=F, G=G, h11=h[0, 0], h12=h12, h22=h[1, 1], H=H, det_A=det_A,
                         nu=1.0 / W)


def _gaussian_curvature(E, F, G, hx, hy, periodic):
    """Brioschi formula with nested central differences"""
    def dx(a):
        return centred_difference(a, hx, 0, periodic)

    def dy(a):
        return centred_difference(a, hy, 1, periodic)

    Ex, Ey, Fx, Fy, Gx, Gy = dx(E), dy(E), dx(F), dy(F), dx(G), dy(G)
    first = np.array([
        [-0.5 * dy(Ey) + dy(Fx) - 0.5 * dx(Gx), 0.5 * Ex, Fx - 0.5 * Ey],
        [Fy - 0.5 * Gx, E, F],
        [0.5 * Gy, F, G],
    ])
    second = np.array([
        [np.zeros_like(E), 0.5 * Ey, 0.5 * Gx],
        [0.5 * Ey, E, F],
        [0.5 * Gx, F, G],
    ])
    det_first = np.linalg.det(np.moveaxis(first, (0, 1), (-2, -1)))
    det_second = np.linalg.det(np.moveaxis(second, (0, 1), (-2, -1)))
    return (det_first - det_second) / (E * G - F ** 2) ** 2


def _laplace_beltrami(f, E, F, G, hx, hy, periodic):
    root = np.sqrt(E * G - F ** 2)
    fx = centred_difference(f, hx, 0, periodic)
    fy = centred_difference(f, hy, 1, periodic)
    vx = (G * fx - F * fy) / root
    vy = (-F * fx + E * fy) / root
    return (centred_difference(vx, hx, 0, periodic) + centred_difference(vy, hy, 1, periodic)) / root


def stability_apply(model, u, f):
    """
    L f = Laplacian_Sigma f + (-K + 4 H^2 + S / 2 - det A) f on the graph of u,
    with K the Gaussian curvature of the induced metric and S the ambient
    scalar curvature. Boundary rings of bounded domains are NaN.
    """
    domain = model.domain
    f_values = _values(model, f)
    geometry = graph_shape_operator(model, u)
    X_, Y_ = domain.mesh
    args = (geometry.E, geometry.F, geometry.G, domain.hx, domain.hy, domain.periodic)
    laplacian = _laplace_beltrami(f_values, *args)
    K = _gaussian_curvature(*args)
    S = scalar_curvature_grid(model, X_, Y_)
    potential = -K + 4 * geometry.H ** 2 + 0.5 * S - geometry.det_A
    result = laplacian + potential * f_values
    return np.where(domain.interior_mask, result, np.nan)


def rosenberg_threshold(model, region=None):
    """
    sup of tau^2 - K_M + Laplacian(mu) / mu over region nodes (default: the
    whole domain); complete stable H-surfaces can only exist with
    3 H^2 <= this value.
    """
    domain = model.domain
    X_, Y_ = domain.mesh
    if region is None:
        nodes = np.array(domain.mask)
    elif isinstance(region, np.ndarray):
        if region.shape != domain.shape:
            raise GridMismatch(domain.shape, region.shape)
        nodes = region.astype(bool) & domain.mask
    else:
        cx, cy = region.center
        theta = np.linspace(0.0, 2 * np.pi, 64, endpoint=False)
        edge_x, edge_y = cx + region.radius * np.cos(theta), cy + region.radius * np.sin(theta)
        if not np.all(domain.contains(edge_x, edge_y)):
            raise OutOfDomain(region.center, f"region of radius {region.radius} leaves the domain")
        nodes = ((X_ - cx) ** 2 + (Y_ - cy) ** 2 <= region.radius ** 2) & domain.mask
    if not np.any(nodes):
        raise OutOfDomain((float("nan"), float("nan")), "region contains no grid nodes")
    x, y = X_[nodes], Y_[nodes]
    lam = model.lam(x, y)
    mu = model.mu(x, y)
    values = model.tau(x, y) ** 2 - model.km(x, y) + model.mu.laplacian(x, y) / (lam ** 2 * mu)
    return float(np.max(values))
