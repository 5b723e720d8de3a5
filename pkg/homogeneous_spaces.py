"""
Homogeneous examples: semidirect products R^2 x_A R and Heisenberg quotients

For the semidirect product with matrix A and alpha_ij(z) the entries of
exp(zA), the metric

    mu^2 (dx - Q dy)^2 + dy^2 / Dn + dz^2,

with Dn = alpha22^2 + alpha21^2, Q = (alpha11 alpha21 + alpha12 alpha22) / Dn
and D = det exp(zA), is a Killing submersion along d/dx with

    mu = sqrt(Dn) / D,    2 tau / mu = sqrt(Dn) dQ/dz.
"""

import logging
from dataclasses import dataclass

import numpy as np
import sympy
from scipy.integrate import cumulative_simpson
from scipy.interpolate import CubicSpline
from scipy.special import factorial

from exceptions import DegenerateFrame, ValidationError
from holonomy import BaseCurve, horizontal_lift
from killing_model import KillingModel
from scalar_fields import Domain2D, GridField

logger = logging.getLogger(__name__)

# below this |discriminant| the exponential uses its power series
_SERIES_THRESHOLD = 1e-6
_SERIES_TERMS = 12


def _as_matrix(A):
    A = np.asarray(A, dtype=float)
    if A.shape != (2, 2) or not np.all(np.isfinite(A)):
        raise ValidationError("matrix", "expected a finite 2x2 matrix")
    return A


def exp_matrix(A, z):
    """
    exp(zA) for a 2x2 matrix in closed form. With M = zA, s = tr(M)/2 and
    B = M - sI, B^2 = d I for d = s^2 - det M, so

        exp(M) = e^s (c(d) I + k(d) B)

    with c = cosh(sqrt d), k = sinh(sqrt d)/sqrt d (cos/sin for d < 0), and the
    power series of c and k near d = 0.
    """
    M = float(z) * _as_matrix(A)
    s = 0.5 * np.trace(M)
    B = M - s * np.eye(2)
    d = s * s - np.linalg.det(M)
    if abs(d) < _SERIES_THRESHOLD:
        c = k = 0.0
        term = 1.0
        for n in range(_SERIES_TERMS):
            c += term / factorial(2 * n)
            k += term / factorial(2 * n + 1)
            term *= d
    elif d > 0:
        root = np.sqrt(d)
        c, k = np.cosh(root), np.sinh(root) / root
    else:
        root = np.sqrt(-d)
        c, k = np.cos(root), np.sin(root) / root
    return np.exp(s) * (c * np.eye(2) + k * B)


class SemidirectModel:
    """R^2 x_A R with its Killing submersion data along the x direction"""

    def __init__(self, A):
        self.A = _as_matrix(A)

    def __repr__(self):
        return f"SemidirectModel(A={self.A.tolist()})"

    def exp(self, z):
        return exp_matrix(self.A, z)

    def determinant(self, z):
        return float(np.linalg.det(self.exp(z)))

    def _entries(self, z):
        E = self.exp(z)
        dE = self.A @ E
        D = float(np.linalg.det(E))
        if not D > 0:
            raise DegenerateFrame(z, D)
        return E, dE, D

    def normal_density(self, z):
        """Dn = alpha22^2 + alpha21^2"""
        E = self.exp(z)
        return float(E[1, 1] ** 2 + E[1, 0] ** 2)

    def twist(self, z):
        """Q = (alpha11 alpha21 + alpha12 alpha22) / Dn"""
        E = self.exp(z)
        return float((E[0, 0] * E[1, 0] + E[0, 1] * E[1, 1]) / (E[1, 1] ** 2 + E[1, 0] ** 2))

    def tau_mu(self, z):
        """(2 tau / mu, mu) at height z"""
        E, dE, D = self._entries(z)
        dn = E[1, 1] ** 2 + E[1, 0] ** 2
        dn_z = 2 * (E[1, 1] * dE[1, 1] + E[1, 0] * dE[1, 0])
        numerator = E[0, 0] * E[1, 0] + E[0, 1] * E[1, 1]
        numerator_z = dE[0, 0] * E[1, 0] + E[0, 0] * dE[1, 0] + dE[0, 1] * E[1, 1] + E[0, 1] * dE[1, 1]
        q_z = (numerator_z * dn - numerator * dn_z) / dn ** 2
        return float(np.sqrt(dn) * q_z), float(np.sqrt(dn) / D)

    def tau(self, z):
        two_tau_over_mu, mu = self.tau_mu(z)
        return 0.5 * two_tau_over_mu * mu

    def table(self, z_values):
        rows = []
        for z in z_values:
            two_tau_over_mu, mu = self.tau_mu(z)
            rows.append({"z": float(z), "mu": mu, "two_tau_over_mu": two_tau_over_mu,
                         "tau": 0.5 * two_tau_over_mu * mu})
        return rows


def semidirect_tau_mu(A, z):
    return SemidirectModel(A).tau_mu(z)


def semidirect_killing_model(A, z_range, y_range, nx, ny, samples=4097):
    """
    KillingModel of R^2 x_A R over the strip z0 <= z <= z1, y0 <= y <= y1 in
    conformal coordinates (w, y) with dw = sqrt(Dn) dz, where the base metric
    is (dw^2 + dy^2) / Dn. Fields are sampled on the grid (lambda = Dn^-1/2,
    connection alpha = 0, beta = Q).
    """
    semidirect = SemidirectModel(A)
    z0, z1 = (float(v) for v in z_range)
    if not z1 > z0:
        raise ValidationError("z_range", "need z0 < z1")
    z_fine = np.linspace(z0, z1, samples)
    density = np.sqrt([semidirect.normal_density(z) for z in z_fine])
    w_fine = cumulative_simpson(density, x=z_fine, initial=0.0)
    z_of_w = CubicSpline(w_fine, z_fine)

    domain = Domain2D("rectangle", nx, ny, bounds=(0.0, float(w_fine[-1]), *y_range))
    z_nodes = z_of_w(domain.x)
    data = np.array([(semidirect.normal_density(z), *semidirect.tau_mu(z), semidirect.twist(z))
                     for z in z_nodes])
    dn, two_tau_over_mu, mu, q = data.T
    tau = 0.5 * two_tau_over_mu * mu

    def column(values, name):
        return GridField.from_domain(domain, np.repeat(values[:, None], domain.ny, axis=1), name=name)

    model = KillingModel.from_connection(
        domain, column(dn ** -0.5, "lambda"), column(tau, "tau"), column(mu, "mu"),
        column(np.zeros_like(q), "alpha"), column(q, "beta"),
    )
    logger.debug(f"Semidirect model for {semidirect!r} on w in [0, {w_fine[-1]:.6g}]")
    return model, z_of_w


@dataclass(frozen=True)
class QuotientSpec:
    """Heisenberg quotient by f1 = (x+1, y, z + tau y + a) and f2 = (x, y+1, z - tau x + b)"""
    tau: float
    a: float = 0.0
    b: float = 0.0

    def __post_init__(self):
        if not self.tau > 0:
            raise ValidationError("tau", "quotient bundle curvature must be positive")

    def maps(self):
        """(linear part, translation) of f1 and f2 as exact rational matrices"""
        tau, a, b = (sympy.Rational(str(v)) for v in (self.tau, self.a, self.b))
        f1 = (sympy.Matrix([[1, 0, 0], [0, 1, 0], [0, tau, 1]]), sympy.Matrix([1, 0, a]))
        f2 = (sympy.Matrix([[1, 0, 0], [0, 1, 0], [-tau, 0, 1]]), sympy.Matrix([0, 1, b]))
        return f1, f2


def _compose(outer, inner):
    return outer[0] * inner[0], outer[0] * inner[1] + outer[1]


def _inverse(affine):
    linear = affine[0].inv()
    return linear, -linear * affine[1]


@dataclass(frozen=True)
class QuotientHolonomy:
    commutator_shift: float
    loop_distance: float
    raw_lift_distance: float
    fiber_length: float
    agrees: bool

    def summary(self):
        return {
            "commutator_shift": self.commutator_shift,
            "loop_distance": self.loop_distance,
            "raw_lift_distance": self.raw_lift_distance,
            "fiber_length": self.fiber_length,
            "agrees_mod_fiber": self.agrees,
        }


def commutator(spec):
    """f1 o f2 o f1^-1 o f2^-1 in exact arithmetic"""
    f1, f2 = spec.maps()
    return _compose(f1, _compose(f2, _compose(_inverse(f1), _inverse(f2))))


def nil3_quotient_holonomy(spec):
    """
    Vertical data of the quotient of Nil3(tau) by f1, f2: the commutator
    shift 2 tau, the loop distance 2 tau - a of alpha(t) = (t, 0), and the
    distance obtained by lifting that loop horizontally and mapping the end
    back over the origin with f1^-1 (equal modulo the fibre length 2 tau).
    """
    linear, translation = commutator(spec)
    if linear != sympy.eye(3) or translation[0] != 0 or translation[1] != 0:
        raise ValidationError("quotient", "commutator is not a vertical translation")
    shift = float(translation[2])

    heisenberg = KillingModel(Domain2D("rectangle", 9, 9, bounds=(-2.0, 2.0, -2.0, 2.0)),
                              1, spec.tau, 1)
    lift = horizontal_lift(heisenberg, BaseCurve.segment((0.0, 0.0), (1.0, 0.0)))
    f1, _ = spec.maps()
    end = sympy.Matrix([1, 0, sympy.Float(float(lift.t[-1]), 17)])
    back = _inverse(f1)
    identified = back[0] * end + back[1]
    raw = float(identified[2]) - float(lift.t[0])

    loop = 2 * spec.tau - spec.a
    fiber = 2 * spec.tau
    gap = (raw - loop) / fiber
    agrees = abs(gap - round(gap)) < 1e-8
    logger.info(f"Nil3 quotient tau={spec.tau}, a={spec.a}, b={spec.b}: shift {shift:.12g}, "
                f"loop distance {loop:.12g}, raw lift distance {raw:.12g}")
    return QuotientHolonomy(commutator_shift=shift, loop_distance=loop, raw_lift_distance=raw,
                            fiber_length=fiber, agrees=agrees)
