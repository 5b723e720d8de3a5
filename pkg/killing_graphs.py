"""
Killing graphs over the base: Z, Gu, area element, area and mean curvature

A function u on the base spans the graph t = u(x, y). With p = u_x - alpha
and q = u_y - beta, the generalised gradient Gu = grad u - Z has length
sqrt(p^2 + q^2) / lambda, and the graph has area element lambda^2 mu W with

    W = sqrt(mu^-2 + |Gu|^2).

Discretisation
--------------
Every node carries four quadrant gradients built from forward/backward
differences (p uses D+x or D-x, q uses D+y or D-y). The discrete area is the
average over the quadrants of lambda^2 mu W, and the flux-form mean curvature

    H = div_h(F) / (2 mu lambda^2),

with face fluxes F averaged from the quadrant values of mu p / W and mu q / W,
is exactly minus the gradient of that discrete area divided by
2 mu lambda^2 hx hy. Summation by parts therefore holds to rounding: on a torus
sum(H mu lambda^2) vanishes, and on bounded domains the interior sum equals
the boundary flux.

Normals point upwards (positive t-component), so the lower hemisphere of
radius R in R^3 has H = 1/R.
"""

import logging
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from exceptions import GridMismatch, OutOfDomain, ValidationError
from scalar_fields import AnalyticField, GridField, _as_field

logger = logging.getLogger(__name__)

_FORWARD, _BACKWARD = 0, 1


class GraphFunction:
    """
    Candidate section u sampled on the model grid.

    ``boundary`` is ``periodic`` on tori and ``dirichlet`` otherwise; values
    off the domain are NaN. An analytic expression is kept when the function
    was built from one, so point evaluations stay exact.
    """

    def __init__(self, domain, values, boundary=None, expression=None):
        values = np.array(values, dtype=float)
        if values.shape != domain.shape:
            raise GridMismatch(domain.shape, values.shape)
        boundary = boundary or ("periodic" if domain.periodic else "dirichlet")
        if boundary not in ("periodic", "dirichlet"):
            raise ValidationError("graph.boundary", "must be periodic or dirichlet")
        if (boundary == "periodic") != domain.periodic:
            raise ValidationError("graph.boundary", f"{boundary} boundary on a {domain.kind} domain")
        values[~domain.mask] = np.nan
        values.flags.writeable = False
        self.domain = domain
        self.values = values
        self.boundary = boundary
        self.expression = expression

    def __repr__(self):
        return f"GraphFunction({self.domain!r}, boundary={self.boundary})"

    @classmethod
    def from_expression(cls, domain, expression):
        field = _as_field(expression)
        if domain.periodic and isinstance(field, AnalyticField):
            x0, x1, y0, y1 = domain.bounds
            gap = max(
                float(np.max(np.abs(field(np.full(domain.ny, x0), domain.y)
                                    - field(np.full(domain.ny, x1), domain.y)))),
                float(np.max(np.abs(field(domain.x, np.full(domain.nx, y0))
                                    - field(domain.x, np.full(domain.nx, y1))))),
            )
            if gap > 1e-12:
                raise ValidationError("graph", f"expression is not periodic on the torus (gap {gap:.3g})")
        return cls(domain, domain.sample(field), expression=field)

    @classmethod
    def constant(cls, domain, value=0.0):
        return cls(domain, np.full(domain.shape, float(value)))

    def __add__(self, other):
        if isinstance(other, GraphFunction):
            other = other.values
        return GraphFunction(self.domain, self.values + other, self.boundary)

    def field(self):
        if self.expression is not None:
            return self.expression
        return GridField.from_domain(self.domain, self.values, name="u")


def _values(model, u):
    if isinstance(u, GraphFunction):
        if u.domain.shape != model.domain.shape:
            raise GridMismatch(model.domain.shape, u.domain.shape)
        return u.values
    u = np.asarray(u, dtype=float)
    if u.shape != model.domain.shape:
        raise GridMismatch(model.domain.shape, u.shape)
    return u


def shifted(values, offset, axis, periodic, fill=np.nan):
    """Array whose entry i is values[i + offset] along ``axis``"""
    if periodic:
        return np.roll(values, -offset, axis=axis)
    out = np.full_like(values, fill)
    src = [slice(None), slice(None)]
    dst = [slice(None), slice(None)]
    if offset > 0:
        src[axis], dst[axis] = slice(offset, None), slice(None, -offset)
    else:
        src[axis], dst[axis] = slice(None, offset), slice(-offset, None)
    out[tuple(dst)] = values[tuple(src)]
    return out


@dataclass(frozen=True)
class QuadrantData:
    """Quadrant quantities, indexed [x-side, y-side, i, j] with side 0 forward, 1 backward"""
    p: np.ndarray
    q: np.ndarray
    W: np.ndarray
    phi_x: np.ndarray
    phi_y: np.ndarray
    density: np.ndarray


def quadrant_data(model, u):
    values = _values(model, u)
    domain = model.domain
    s = model.samples
    periodic = domain.periodic
    dx_f = (shifted(values, 1, 0, periodic) - values) / domain.hx
    dx_b = (values - shifted(values, -1, 0, periodic)) / domain.hx
    dy_f = (shifted(values, 1, 1, periodic) - values) / domain.hy
    dy_b = (values - shifted(values, -1, 1, periodic)) / domain.hy
    p = np.stack([dx_f, dx_b])[:, None] - s.alpha
    q = np.stack([dy_f, dy_b])[None, :] - s.beta
    p, q = np.broadcast_arrays(p, q)
    with np.errstate(invalid="ignore"):
        W = np.sqrt(1.0 / s.mu ** 2 + (p ** 2 + q ** 2) / s.lam ** 2)
        phi_x = s.mu * p / W
        phi_y = s.mu * q / W
    return QuadrantData(p=p, q=q, W=W, phi_x=phi_x, phi_y=phi_y, density=s.lam ** 2 * s.mu * W)


def face_fluxes(model, quadrants):
    """Fluxes on x-faces (i + 1/2, j) and y-faces (i, j + 1/2)"""
    periodic = model.domain.periodic
    phi_x, phi_y = quadrants.phi_x, quadrants.phi_y
    flux_x = 0.25 * (phi_x[_FORWARD].sum(axis=0)
                     + shifted(phi_x[_BACKWARD].sum(axis=0), 1, 0, periodic))
    flux_y = 0.25 * (phi_y[:, _FORWARD].sum(axis=0)
                     + shifted(phi_y[:, _BACKWARD].sum(axis=0), 1, 1, periodic))
    return flux_x, flux_y


def flux_divergence(model, flux_x, flux_y):
    domain = model.domain
    periodic = domain.periodic
    return ((flux_x - shifted(flux_x, -1, 0, periodic)) / domain.hx
            + (flux_y - shifted(flux_y, -1, 1, periodic)) / domain.hy)


def z_field(model):
    """Z = a e1 + b e2 with coordinate components (a / lambda, b / lambda)"""
    return model.z_field()


def div_jz_residual(model):
    """
    div(JZ) + 2 tau / mu at interior nodes (NaN elsewhere), with the
    divergence taken across the faces of each node's cell:

        div(JZ) = (-(beta_x(i+1/2) - beta_x(i-1/2)) / hx
                   + (alpha_y(j+1/2) - alpha_y(j-1/2)) / hy) / lambda^2
    """
    domain = model.domain
    s = model.samples
    periodic = domain.periodic
    beta_x = s.beta_xface
    alpha_y = s.alpha_yface
    curl = (-(beta_x - shifted(beta_x, -1, 0, periodic)) / domain.hx
            + (alpha_y - shifted(alpha_y, -1, 1, periodic)) / domain.hy)
    residual = curl / s.lam ** 2 + 2.0 * s.tau / s.mu
    return np.where(domain.interior_mask, residual, np.nan)


def area_element(model, u, point):
    """W = sqrt(mu^-2 + |Gu|^2) at a point, from the derivatives of u"""
    x, y = model.check_point(point)
    field = u.field() if isinstance(u, GraphFunction) else _as_field(u)
    ux, uy = field.gradient(x, y)
    if not (np.isfinite(ux) and np.isfinite(uy)):
        raise OutOfDomain(point, "graph derivatives are not available there")
    lam = model.lam(x, y)
    mu = model.mu(x, y)
    p = ux - model.alpha(x, y)
    q = uy - model.beta(x, y)
    return float(np.sqrt(1.0 / mu ** 2 + (p ** 2 + q ** 2) / lam ** 2))


def centred_difference(values, h, axis, periodic):
    forward = shifted(values, 1, axis, periodic)
    backward = shifted(values, -1, axis, periodic)
    centred = (forward - backward) / (2 * h)
    centred = np.where(np.isnan(centred), (forward - values) / h, centred)
    return np.where(np.isnan(centred), (values - backward) / h, centred)


def area_element_grid(model, u):
    """Nodal W from central differences, one-sided where a neighbour is missing"""
    values = _values(model, u)
    domain = model.domain
    s = model.samples
    p = centred_difference(values, domain.hx, 0, domain.periodic) - s.alpha
    q = centred_difference(values, domain.hy, 1, domain.periodic) - s.beta
    return np.sqrt(1.0 / s.mu ** 2 + (p ** 2 + q ** 2) / s.lam ** 2)


def _quadrature(model, density):
    # quadrants reaching outside the domain are NaN and drop out, which gives
    # trapezoid weights along rectangle edges
    return float(0.25 * np.nansum(density) * model.domain.cell_area)


def area(model, u):
    """Integral of W lambda^2 dx dy"""
    quadrants = quadrant_data(model, u)
    return _quadrature(model, quadrants.W * model.samples.lam ** 2)


def surface_area(model, u):
    """Area of the graph itself, the integral of mu W lambda^2 dx dy"""
    return _quadrature(model, quadrant_data(model, u).density)


def mean_curvature(model, u):
    """Flux-form mean curvature at interior (or all periodic) nodes; NaN elsewhere"""
    quadrants = quadrant_data(model, u)
    flux_x, flux_y = face_fluxes(model, quadrants)
    s = model.samples
    H = flux_divergence(model, flux_x, flux_y) / (2.0 * s.mu * s.lam ** 2)
    return np.where(model.domain.interior_mask, H, np.nan)


def boundary_flux(model, u):
    """
    Outward flux of (mu p / W, mu q / W) through the outer faces of the
    interior node block, in coordinate measure. Zero on tori.
    """
    domain = model.domain
    periodic = domain.periodic
    flux_x, flux_y = face_fluxes(model, quadrant_data(model, u))
    inside = domain.interior_mask
    total = 0.0
    for axis, flux, width in ((0, flux_x, domain.hy), (1, flux_y, domain.hx)):
        upper = inside & ~shifted(inside, 1, axis, periodic, fill=False)
        lower = inside & ~shifted(inside, -1, axis, periodic, fill=False)
        lower_flux = shifted(flux, -1, axis, periodic)
        total += width * (np.sum(flux[upper]) - np.sum(lower_flux[lower]))
    return float(total)


def difference_matrices(n, h, periodic):
    eye = sp.identity(n, format="csr")
    if periodic:
        forward = sp.diags([-np.ones(n), np.ones(n - 1), np.ones(1)], [0, 1, -(n - 1)], format="csr")
    else:
        forward = sp.diags([-np.ones(n), np.ones(n - 1)], [0, 1], format="csr")
    forward = forward / h
    if periodic:
        backward = -forward.T
    else:
        backward = sp.diags([np.ones(n), -np.ones(n - 1)], [0, -1], format="csr") / h
    return eye, forward.tocsr(), backward.tocsr()


def area_hessian(model, u):
    """
    Sparse Hessian of the discrete surface area with respect to the nodal
    values of u (symmetric, positive semidefinite).
    """
    domain = model.domain
    quadrants = quadrant_data(model, u)
    s = model.samples
    lam2 = s.lam ** 2
    W = quadrants.W
    p, q = quadrants.p, quadrants.q
    with np.errstate(invalid="ignore"):
        phi_pp = s.mu / W * (1.0 - p ** 2 / (lam2 * W ** 2))
        phi_qq = s.mu / W * (1.0 - q ** 2 / (lam2 * W ** 2))
        phi_pq = -s.mu * p * q / (lam2 * W ** 3)

    eye_x, fx, bx = difference_matrices(domain.nx, domain.hx, domain.periodic)
    eye_y, fy, by = difference_matrices(domain.ny, domain.hy, domain.periodic)
    dx = (sp.kron(fx, eye_y, format="csr"), sp.kron(bx, eye_y, format="csr"))
    dy = (sp.kron(eye_x, fy, format="csr"), sp.kron(eye_x, by, format="csr"))

    weight = 0.25 * domain.cell_area
    hessian = sp.csr_matrix((domain.nx * domain.ny,) * 2)
    for side_x in (_FORWARD, _BACKWARD):
        for side_y in (_FORWARD, _BACKWARD):
            coefficients = [np.nan_to_num(c[side_x, side_y]).ravel() * weight
                            for c in (phi_pp, phi_pq, phi_qq)]
            a, b, c = (sp.diags(coefficient) for coefficient in coefficients)
            Dx, Dy = dx[side_x], dy[side_y]
            hessian = hessian + Dx.T @ a @ Dx + Dx.T @ b @ Dy + Dy.T @ b @ Dx + Dy.T @ c @ Dy
    return hessian.tocsr()
