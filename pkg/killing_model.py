"""
Killing submersion models over planar domains

A model is a base domain with fields (lambda, tau, mu) and connection data
alpha = lambda*a, beta = lambda*b realising the metric

    lambda^2 (dx^2 + dy^2) + mu^2 (dt - alpha dx - beta dy)^2

whose Killing field is d/dt, with bundle curvature tau and Killing length mu.
Over disks and rectangles containing the origin the connection is built from
the radial potential eta (alpha = -y eta, beta = x eta); over tori it comes
from a periodic potential (see minimal_solver.make_torus_z).
"""

import logging
from dataclasses import dataclass
from functools import cached_property

import numpy as np
import sympy
from scipy.integrate import simpson

from config import (
    SIMPSON_NODES, POSITIVITY_OVERSAMPLING, PERIODICITY_TOLERANCE,
)
from exceptions import (
    BoundaryTooClose, NonPositiveField, OutOfDomain, ValidationError,
)
from expression_parser import X, Y
from scalar_fields import (
    AnalyticField, GridField, RadialEtaField, VectorField2D, _as_field,
)

logger = logging.getLogger(__name__)


class Connection:
    """Connection coefficients alpha = lambda*a and beta = lambda*b"""

    z_source = "explicit"

    def __init__(self, alpha, beta):
        self.alpha = _as_field(alpha)
        self.beta = _as_field(beta)

    def face_values(self, domain):
        """beta at x-faces (x_i + hx/2, y_j) and alpha at y-faces (x_i, y_j + hy/2)"""
        X_, Y_ = domain.mesh
        beta_x = domain.sample_at(self.beta, X_ + 0.5 * domain.hx, Y_)
        alpha_y = domain.sample_at(self.alpha, X_, Y_ + 0.5 * domain.hy)
        return beta_x, alpha_y


class RadialConnection(Connection):
    z_source = "radial_eta"

    def __init__(self, eta):
        self.eta = eta
        super().__init__(AnalyticField(-Y) * eta, AnalyticField(X) * eta)


class PotentialConnection(Connection):
    """
    Connection of Z = J grad(psi) for a periodic potential psi sampled on a
    torus grid: alpha = -psi_y, beta = psi_x.

    Nodal values use central differences; face values use the one-sided
    differences across each face, so the face divergence of (beta, -alpha)
    is exactly the five-point Laplacian of psi.
    """

    z_source = "poisson_potential"

    def __init__(self, domain, psi):
        psi = np.array(psi, dtype=float)
        psi.flags.writeable = False
        self.domain = domain
        self.psi = psi
        alpha = -(np.roll(psi, -1, axis=1) - np.roll(psi, 1, axis=1)) / (2 * domain.hy)
        beta = (np.roll(psi, -1, axis=0) - np.roll(psi, 1, axis=0)) / (2 * domain.hx)
        super().__init__(GridField.from_domain(domain, alpha, name="alpha"),
                         GridField.from_domain(domain, beta, name="beta"))

    def face_values(self, domain):
        if domain.shape != self.domain.shape:
            raise ValidationError("connection", "potential was solved on a different grid")
        beta_x = (np.roll(self.psi, -1, axis=0) - self.psi) / domain.hx
        alpha_y = -(np.roll(self.psi, -1, axis=1) - self.psi) / domain.hy
        return beta_x, alpha_y


@dataclass(frozen=True)
class GridSamples:
    """Model data sampled on the domain nodes (NaN off the domain)"""
    X: np.ndarray
    Y: np.ndarray
    lam: np.ndarray
    tau: np.ndarray
    mu: np.ndarray
    alpha: np.ndarray
    beta: np.ndarray
    beta_xface: np.ndarray
    alpha_yface: np.ndarray


class KillingModel:
    """
    Base domain plus (lambda, tau, mu) and the derived connection data.

    Construction checks lambda > 0 and mu > 0 on every node (and on a
    4x oversampled grid for analytic fields) and, on tori, periodicity of
    every field. Over tori no connection is built here; pass one or use
    ``minimal_solver.make_torus_z``.
    """

    def __init__(self, domain, lam, tau, mu, connection=None, quadrature_nodes=SIMPSON_NODES,
                 check=True):
        self.domain = domain
        self.lam = _as_field(lam)
        self.tau = _as_field(tau)
        self.mu = _as_field(mu)
        self.quadrature_nodes = int(quadrature_nodes)

        if check:
            self._check_positive("lambda", self.lam)
            self._check_positive("mu", self.mu)
            if domain.periodic:
                for name, field in (("lambda", self.lam), ("tau", self.tau), ("mu", self.mu)):
                    self._check_periodic(name, field)

        if connection is None and not domain.periodic:
            # disks and rectangles are convex: every segment from the origin stays inside
            if not bool(domain.contains(0.0, 0.0)):
                raise OutOfDomain((0.0, 0.0), "the radial connection integrates along segments "
                                              "from the origin, which must lie in the domain")
            connection = RadialConnection(
                RadialEtaField(self.tau * self.lam * self.lam / self.mu, nodes=self.quadrature_nodes)
            )
        self.connection = connection

        if isinstance(self.lam, AnalyticField):
            log_lam = sympy.log(self.lam.expression)
            km = -(sympy.diff(log_lam, X, 2) + sympy.diff(log_lam, Y, 2)) / self.lam.expression ** 2
            self._km_field = AnalyticField(km)
            self.km_method = "symbolic"
        else:
            self._km_field = None
            self.km_method = "finite_difference"

        logger.debug(f"Built {self!r}")

    @classmethod
    def from_connection(cls, domain, lam, tau, mu, alpha, beta, quadrature_nodes=SIMPSON_NODES):
        """Model with explicitly prescribed alpha = lambda*a and beta = lambda*b"""
        return cls(domain, lam, tau, mu, connection=Connection(alpha, beta),
                   quadrature_nodes=quadrature_nodes)

    def with_connection(self, connection):
        return KillingModel(self.domain, self.lam, self.tau, self.mu, connection=connection,
                            quadrature_nodes=self.quadrature_nodes, check=False)

    def __repr__(self):
        return (f"KillingModel({self.domain!r}, lambda={self.lam!r}, tau={self.tau!r}, "
                f"mu={self.mu!r}, z_source={self.z_source})")

    @property
    def z_source(self):
        return None if self.connection is None else self.connection.z_source

    @property
    def has_connection(self):
        return self.connection is not None

    def require_connection(self):
        if self.connection is None:
            raise ValidationError(
                "connection", "torus models need a periodic connection; build it with make_torus_z"
            )
        return self.connection

    @property
    def eta(self):
        return getattr(self.connection, "eta", None)

    @property
    def alpha(self):
        return self.require_connection().alpha

    @property
    def beta(self):
        return self.require_connection().beta

    @property
    def a(self):
        return self.alpha / self.lam

    @property
    def b(self):
        return self.beta / self.lam

    def z_field(self):
        """Z = a e1 + b e2 in coordinates: (a / lambda, b / lambda)"""
        lam2 = self.lam * self.lam
        return VectorField2D(self.alpha / lam2, self.beta / lam2, name="Z")

    @cached_property
    def samples(self):
        domain = self.domain
        X_, Y_ = domain.mesh
        connection = self.require_connection()
        beta_xface, alpha_yface = connection.face_values(domain)
        return GridSamples(
            X=X_, Y=Y_,
            lam=domain.sample(self.lam),
            tau=domain.sample(self.tau),
            mu=domain.sample(self.mu),
            alpha=domain.sample(connection.alpha),
            beta=domain.sample(connection.beta),
            beta_xface=beta_xface,
            alpha_yface=alpha_yface,
        )

    def check_point(self, point):
        x, y = (float(c) for c in point)
        if not (np.isfinite(x) and np.isfinite(y)) or not self.domain.contains(x, y):
            raise OutOfDomain(point)
        return self.domain.wrap(x, y)

    def km(self, x, y):
        """Gaussian curvature K_M = -Laplacian_0(log lambda) / lambda^2 of the base"""
        if self._km_field is not None:
            return self._km_field(x, y)
        lam = self.lam(x, y)
        lx, ly = self.lam.gradient(x, y)
        lap = self.lam.laplacian(x, y)
        return -(lap / lam - (lx ** 2 + ly ** 2) / lam ** 2) / lam ** 2

    def _check_positive(self, name, field):
        domain = self.domain
        X_, Y_ = domain.mesh
        xs, ys = X_[domain.mask], Y_[domain.mask]
        if isinstance(field, AnalyticField) and not field.is_constant:
            fx, fy = domain.oversampled_points(POSITIVITY_OVERSAMPLING)
            xs, ys = np.concatenate([xs, fx]), np.concatenate([ys, fy])
        values = np.asarray(field(xs, ys), dtype=float)
        bad = ~(values > 0)
        if np.any(bad):
            index = int(np.argmax(bad))
            raise NonPositiveField(name, (float(xs[index]), float(ys[index])), float(values[index]))

    def _check_periodic(self, name, field):
        domain = self.domain
        x0, x1, y0, y1 = domain.bounds
        ys = np.linspace(y0, y1, domain.ny, endpoint=False)
        xs = np.linspace(x0, x1, domain.nx, endpoint=False)
        gap_x = np.abs(field(np.full_like(ys, x0), ys) - field(np.full_like(ys, x1), ys))
        gap_y = np.abs(field(xs, np.full_like(xs, y0)) - field(xs, np.full_like(xs, y1)))
        gap = float(max(np.max(gap_x), np.max(gap_y)))
        if not gap <= PERIODICITY_TOLERANCE:
            raise ValidationError(f"fields.{name}", f"not periodic on the torus (gap {gap:.3g})")


def build_eta(tau, lam, mu, point, nodes=SIMPSON_NODES, domain=None):
    """
    eta(p) = integral_0^1 2 s tau(sp) lambda(sp)^2 / mu(sp) ds by composite
    Simpson quadrature, checking positivity and domain membership along the
    segment from the origin to p.
    """
    if nodes < 3 or nodes % 2 == 0:
        raise ValidationError("quadrature.nodes", "Simpson quadrature needs an odd node count >= 3")
    tau, lam, mu = _as_field(tau), _as_field(lam), _as_field(mu)
    x, y = (float(c) for c in point)
    s = np.linspace(0.0, 1.0, nodes)
    sx, sy = s * x, s * y
    if domain is not None and not np.all(domain.contains(sx, sy)):
        raise OutOfDomain(point, "segment from the origin leaves the domain")
    lam_s = lam(sx, sy)
    mu_s = mu(sx, sy)
    for name, values in (("lambda", lam_s), ("mu", mu_s)):
        bad = ~(values > 0)
        if np.any(bad):
            index = int(np.argmax(bad))
            raise NonPositiveField(name, (float(sx[index]), float(sy[index])), float(values[index]))
    integrand = 2.0 * s * tau(sx, sy) * lam_s ** 2 / mu_s
    return float(simpson(integrand, x=s))


def _metric_components(model, x, y):
    lam = model.lam(x, y)
    mu = model.mu(x, y)
    alpha = model.alpha(x, y)
    beta = model.beta(x, y)
    mu2 = mu ** 2
    return np.array([
        [lam ** 2 + mu2 * alpha ** 2, mu2 * alpha * beta, -mu2 * alpha],
        [mu2 * alpha * beta, lam ** 2 + mu2 * beta ** 2, -mu2 * beta],
        [-mu2 * alpha, -mu2 * beta, mu2],
    ])


def metric_at(model, point):
    """Components of the model metric in coordinates (x, y, t)"""
    x, y = model.check_point(point)
    return _metric_components(model, x, y)


def frame_at(model, point):
    """Rows E1, E2, E3 of the orthonormal frame in coordinates (x, y, t)"""
    x, y = model.check_point(point)
    lam = model.lam(x, y)
    mu = model.mu(x, y)
    a = model.alpha(x, y) / lam
    b = model.beta(x, y) / lam
    return np.array([
        [1.0 / lam, 0.0, a],
        [0.0, 1.0 / lam, b],
        [0.0, 0.0, 1.0 / mu],
    ])


def _connection_curl(model, x, y, step=None):
    """(lambda b)_x - (lambda a)_y, exactly or by central differences of width 2*step"""
    if step is None:
        beta_x, _ = model.beta.gradient(x, y)
        _, alpha_y = model.alpha.gradient(x, y)
        return beta_x - alpha_y
    beta_x = (model.beta(x + step, y) - model.beta(x - step, y)) / (2 * step)
    alpha_y = (model.alpha(x, y + step) - model.alpha(x, y - step)) / (2 * step)
    return beta_x - alpha_y


def bundle_curvature_check(model, point, step=None):
    """
    Bundle curvature recovered from the metric data,
    tau_hat = (mu / 2 lambda^2) ((lambda b)_x - (lambda a)_y).

    With ``step=None`` the field derivatives are used directly (exact for
    analytic and radial models, finite differences for grid fields);
    otherwise central differences of width ``2*step``.
    """
    x, y = model.check_point(point)
    connection = model.require_connection()
    spacing = max(model.domain.hx, model.domain.hy)
    needs_room = step is not None or not (
        connection.alpha.exact_derivatives and connection.beta.exact_derivatives
    )
    if needs_room and not model.domain.periodic:
        room = spacing if step is None else max(spacing, step)
        if model.domain.distance_to_boundary(x, y) <= room:
            raise BoundaryTooClose(point, room)
    lam = model.lam(x, y)
    mu = model.mu(x, y)
    return float(mu / (2 * lam ** 2) * _connection_curl(model, x, y, step))


def _derivative_data(model, x, y):
    lam = model.lam(x, y)
    mu = model.mu(x, y)
    lx, ly = model.lam.gradient(x, y)
    mx, my = model.mu.gradient(x, y)
    return lam, mu, lx, ly, mx, my


def _connection_table(model, x, y):
    lam, mu, lx, ly, mx, my = _derivative_data(model, x, y)
    tau = model.tau(x, y)
    shape = np.shape(lam)
    table = np.zeros((3, 3, 3) + shape)
    gx = lx / lam ** 2
    gy = ly / lam ** 2
    hx = mx / (lam * mu)
    hy = my / (lam * mu)
    table[0, 0, 1] = -gy
    table[0, 1, 0] = gy
    table[0, 1, 2] = tau
    table[0, 2, 1] = -tau
    table[1, 0, 1] = gx
    table[1, 0, 2] = -tau
    table[1, 1, 0] = -gx
    table[1, 2, 0] = tau
    table[2, 0, 1] = -tau
    table[2, 0, 2] = hx
    table[2, 1, 0] = tau
    table[2, 1, 2] = hy
    table[2, 2, 0] = -hx
    table[2, 2, 1] = -hy
    return table


def connection_coeffs(model, point):
    """
    Levi-Civita connection on the frame: entry [i, j, k] is the E_k component
    of nabla_{E_i} E_j.
    """
    x, y = model.check_point(point)
    return _connection_table(model, x, y)


def lie_brackets(model, point):
    """Entry [i, j, k] is the E_k component of [E_i, E_j]"""
    x, y = model.check_point(point)
    lam, mu, lx, ly, mx, my = _derivative_data(model, x, y)
    curl = _connection_curl(model, x, y)
    brackets = np.zeros((3, 3, 3))
    brackets[0, 1] = [ly / lam ** 2, -lx / lam ** 2, mu / lam ** 2 * curl]
    brackets[0, 2] = [0.0, 0.0, -mx / (lam * mu)]
    brackets[1, 2] = [0.0, 0.0, -my / (lam * mu)]
    for i, j in ((0, 1), (0, 2), (1, 2)):
        brackets[j, i] = -brackets[i, j]
    return brackets


def gaussian_curvature(model, point):
    x, y = model.check_point(point)
    return float(model.km(x, y))


def _sectional(model, x, y):
    lam, mu, lx, ly, mx, my = _derivative_data(model, x, y)
    mxx, _, myy = model.mu.hessian(x, y)
    tau2 = model.tau(x, y) ** 2
    k12 = model.km(x, y) - 3 * tau2
    k13 = tau2 - (mxx / lam ** 2 - lx * mx / lam ** 3) / mu - ly * my / (lam ** 3 * mu)
    k23 = tau2 - (myy / lam ** 2 - ly * my / lam ** 3) / mu - lx * mx / (lam ** 3 * mu)
    return k12, k13, k23


def sectional_curvatures(model, point):
    """Curvatures of the planes (E1,E2), (E1,E3), (E2,E3)"""
    x, y = model.check_point(point)
    return tuple(float(k) for k in _sectional(model, x, y))


def scalar_curvature_grid(model, x, y):
    """S = 2 (K_M - tau^2 - Laplacian(mu) / mu), vectorised over points"""
    lam = model.lam(x, y)
    mu = model.mu(x, y)
    delta_mu = model.mu.laplacian(x, y) / lam ** 2
    return 2.0 * (model.km(x, y) - model.tau(x, y) ** 2 - delta_mu / mu)


def scalar_curvature(model, point):
    x, y = model.check_point(point)
    return float(scalar_curvature_grid(model, x, y))
