"""
Calabi-type duality between spacelike graphs and minimal Killing graphs

A spacelike function v (|grad v| < mu) solving

    div( grad v / (mu sqrt(mu^2 - |grad v|^2)) ) = 2 tau / mu

has a dual: G = -J grad v / (mu sqrt(mu^2 - |grad v|^2)) satisfies
curl(G + Z) = 0, so G + Z = grad u on simply connected bases, and the
Killing graph of u is minimal with Gu = G. J rotates e1 to e2; in
coordinates J(X, Y) = (-Y, X).
"""

import logging

import numpy as np
import sympy
from scipy.integrate import cumulative_simpson, cumulative_trapezoid

from config import CLOSURE_GRID_FACTOR, CURL_TOLERANCE, PATH_TOLERANCE
from exceptions import GridMismatch, NotClosed, NotSpacelike, ValidationError
from expression_parser import X, Y
from killing_graphs import GraphFunction, area_element_grid, centred_difference, shifted
from scalar_fields import AnalyticField, GridField, VectorField2D, _as_field

logger = logging.getLogger(__name__)


class SpacelikeFunction:
    """
    Function v on a disk or rectangle model with |grad v| < mu at every node.

    Built from an expression (exact derivatives) or from nodal values
    (central differences, one-sided next to the boundary).
    """

    def __init__(self, model, values=None, expression=None):
        domain = model.domain
        if domain.periodic:
            raise ValidationError("domain.kind", "duality runs on simply connected planar patches")
        if expression is not None:
            self.field = _as_field(expression)
            values = domain.sample(self.field)
        else:
            values = np.array(values, dtype=float)
            if values.shape != domain.shape:
                raise GridMismatch(domain.shape, values.shape)
            values[~domain.mask] = np.nan
            self.field = GridField.from_domain(domain, values, name="v")
        values.flags.writeable = False
        self.model = model
        self.values = values
        self.expression = self.field if expression is not None else None

        vx, vy = self.nodal_gradient()
        s = model.samples
        norm = np.hypot(vx, vy) / s.lam
        self.margin = float(np.nanmin((s.mu - norm)[domain.mask]))
        if not self.margin > 0:
            raise NotSpacelike(self.margin)

    def __repr__(self):
        return f"SpacelikeFunction(margin={self.margin:.6g})"

    def nodal_gradient(self):
        domain = self.model.domain
        if self.expression is not None:
            X_, Y_ = domain.mesh
            vx, vy = self.field.gradient(X_, Y_)
            return np.where(domain.mask, vx, np.nan), np.where(domain.mask, vy, np.nan)
        return (centred_difference(self.values, domain.hx, 0, False),
                centred_difference(self.values, domain.hy, 1, False))

    @property
    def analytic(self):
        return isinstance(self.expression, AnalyticField)


def _symbolic_flux(lam, mu, v):
    vx, vy = sympy.diff(v, X), sympy.diff(v, Y)
    speed = sympy.sqrt(mu ** 2 - (vx ** 2 + vy ** 2) / lam ** 2)
    return vx / (mu * speed), vy / (mu * speed)


def _lorentz_lhs_expression(lam, mu, v):
    fx, fy = _symbolic_flux(lam, mu, v)
    return (sympy.diff(fx, X) + sympy.diff(fy, Y)) / lam ** 2


def manufactured_tau(lam, mu, v):
    """tau = (mu / 2) div(grad v / (mu sqrt(mu^2 - |grad v|^2))) as an analytic field"""
    lam, mu, v = (_as_field(f) for f in (lam, mu, v))
    if not all(isinstance(f, AnalyticField) for f in (lam, mu, v)):
        raise ValidationError("fields", "manufactured tau needs analytic lambda, mu and v")
    lhs = _lorentz_lhs_expression(lam.expression, mu.expression, v.expression)
    return AnalyticField(mu.expression * lhs / 2, name="tau")


def _all_analytic(model, v):
    return (v.analytic and isinstance(model.lam, AnalyticField)
            and isinstance(model.mu, AnalyticField))


def lorentz_mc_residual(model, v):
    """
    div(grad v / (mu sqrt(mu^2 - |grad v|^2))) - 2 tau / mu at interior nodes.

    Evaluated symbolically when v, lambda and mu are analytic; otherwise by
    face fluxes (D+ across the face, averaged central differences along it).
    """
    domain = model.domain
    s = model.samples
    if _all_analytic(model, v):
        lhs_field = AnalyticField(_lorentz_lhs_expression(
            model.lam.expression, model.mu.expression, v.expression.expression))
        lhs = domain.sample(lhs_field)
    else:
        values = v.values
        vx_c, vy_c = v.nodal_gradient()
        lhs = np.zeros(domain.shape)
        for axis, h, along in ((0, domain.hx, vy_c), (1, domain.hy, vx_c)):
            across = (shifted(values, 1, axis, False) - values) / h
            tangential = 0.5 * (along + shifted(along, 1, axis, False))
            lam = 0.5 * (s.lam + shifted(s.lam, 1, axis, False))
            mu = 0.5 * (s.mu + shifted(s.mu, 1, axis, False))
            with np.errstate(invalid="ignore"):
                speed = np.sqrt(mu ** 2 - (across ** 2 + tangential ** 2) / lam ** 2)
            flux = across / (mu * speed)
            lhs = lhs + (flux - shifted(flux, -1, axis, False)) / h
        lhs = lhs / s.lam ** 2
    residual = lhs - 2.0 * s.tau / s.mu
    return np.where(domain.interior_mask, residual, np.nan)


def dual_gradient(model, v):
    """
    G = -J grad v / (mu sqrt(mu^2 - |grad v|^2)) in coordinates,
    (v_y, -v_x) / (lambda^2 mu sqrt(mu^2 - |grad v|^2)).
    """
    if not v.margin > 0:
        raise NotSpacelike(v.margin)
    if _all_analytic(model, v):
        lam, mu = model.lam.expression, model.mu.expression
        fx, fy = _symbolic_flux(lam, mu, v.expression.expression)
        return VectorField2D(AnalyticField(fy / lam ** 2), AnalyticField(-fx / lam ** 2), name="G")
    domain = model.domain
    s = model.samples
    vx, vy = v.nodal_gradient()
    denominator = s.lam ** 2 * s.mu * np.sqrt(s.mu ** 2 - (vx ** 2 + vy ** 2) / s.lam ** 2)
    return VectorField2D(GridField.from_domain(domain, vy / denominator, name="G_x"),
                         GridField.from_domain(domain, -vx / denominator, name="G_y"), name="G")


def norm_identity_residual(model, v, u=None):
    """
    |W sqrt(mu^2 - |grad v|^2) - 1| per node, with W from G (u=None) or
    from the nodal differences of u.
    """
    s = model.samples
    vx, vy = v.nodal_gradient()
    speed = np.sqrt(s.mu ** 2 - (vx ** 2 + vy ** 2) / s.lam ** 2)
    if u is None:
        gx, gy = dual_gradient(model, v).sample(model.domain)
        W = np.sqrt(1.0 / s.mu ** 2 + s.lam ** 2 * (gx ** 2 + gy ** 2))
    else:
        W = area_element_grid(model, u)
    return np.abs(W * speed - 1.0)


def rotation_divergence(model, v):
    """div(J grad v) with central differences, which commute; zero to rounding"""
    domain = model.domain

    def central(values, h, axis):
        return (shifted(values, 1, axis, False) - shifted(values, -1, axis, False)) / (2 * h)

    vx = central(v.values, domain.hx, 0)
    vy = central(v.values, domain.hy, 1)
    return (central(-vy, domain.hx, 0) + central(vx, domain.hy, 1)) / model.samples.lam ** 2


def _cumulative(values, h):
    if len(values) == 1:
        return np.zeros(1)
    if len(values) < 3:
        return cumulative_trapezoid(values, dx=h, initial=0.0)
    return cumulative_simpson(values, dx=h, initial=0.0)


def _integrate_from(values, h, start):
    out = np.empty_like(values)
    out[start:] = _cumulative(values[start:], h)
    out[:start + 1] = -_cumulative(values[start::-1], h)[::-1]
    return out


def _run(finite, index):
    """Bounds of the contiguous True run of ``finite`` containing ``index``"""
    if not finite[index]:
        return None
    lo = index
    while lo > 0 and finite[lo - 1]:
        lo -= 1
    hi = index
    while hi < len(finite) - 1 and finite[hi + 1]:
        hi += 1
    return lo, hi + 1


def _line_integral(first, second, h_first, h_second, base):
    """
    Integrate ``first`` along axis 0 through the base row, then ``second``
    along axis 1 from there. Arrays are indexed [first-axis, second-axis].
    """
    i0, j0 = base
    u = np.full(first.shape, np.nan)
    row = _run(np.isfinite(first[:, j0]), i0)
    if row is None:
        return u
    lo, hi = row
    u[lo:hi, j0] = _integrate_from(first[lo:hi, j0], h_first, i0 - lo)
    for i in range(lo, hi):
        column = _run(np.isfinite(second[i]), j0)
        if column is None:
            continue
        clo, chi = column
        u[i, clo:chi] = u[i, j0] + _integrate_from(second[i, clo:chi], h_second, j0 - clo)
    return u


def closure_slack(domain, P, Q):
    """
    h^2 times the largest third derivative of the nodal components (P, Q).

    Central differences of a closed form sampled on the grid leave a curl of
    about h^2 / 6 (P_yyy - Q_xxx), so sampled forms are only closed to this
    order. Forms with exact derivatives get no slack.
    """
    if P.exact_derivatives and Q.exact_derivatives:
        return 0.0
    inside = domain.interior_mask
    largest = 0.0
    for values in (domain.sample(P), domain.sample(Q)):
        derivatives = [values]
        for _ in range(3):
            derivatives = [np.gradient(d, h, axis=axis, edge_order=2) for d in derivatives
                           for axis, h in ((0, domain.hx), (1, domain.hy))]
        stacked = np.abs(np.stack([d[inside] for d in derivatives]))
        if np.any(np.isfinite(stacked)):
            largest = max(largest, float(np.nanmax(stacked)))
    return CLOSURE_GRID_FACTOR * max(domain.hx, domain.hy) ** 2 * largest


def integrate_potential(model, field, basepoint=None, curl_tolerance=CURL_TOLERANCE,
                        path_tolerance=PATH_TOLERANCE):
    """
    u with grad u = field + Z, i.e. (u_x, u_y) = lambda^2 field + (alpha, beta),
    vanishing at the grid node nearest ``basepoint``.

    The curl of the 1-form is checked at interior nodes first; u is
    integrated along the basepoint row then along columns, and compared
    against the column-then-row path. For sampled forms both tolerances are
    widened by ``closure_slack`` (times the bounding-box area for paths).
    """
    domain = model.domain
    if domain.periodic:
        raise ValidationError("domain.kind", "potentials are integrated on simply connected patches")
    lam2 = model.lam * model.lam
    P = lam2 * field.x_component + model.alpha
    Q = lam2 * field.y_component + model.beta

    slack = closure_slack(domain, P, Q)
    lx, ly = domain.lengths
    curl_tolerance = curl_tolerance + slack
    path_tolerance = path_tolerance + slack * lx * ly

    X_, Y_ = domain.mesh
    inside = domain.interior_mask
    _, P_y = P.gradient(X_[inside], Y_[inside])
    Q_x, _ = Q.gradient(X_[inside], Y_[inside])
    curl = float(np.nanmax(np.abs(P_y - Q_x))) if np.any(inside) else 0.0
    if not curl <= curl_tolerance:
        raise NotClosed(curl, curl_tolerance, detail="curl")

    if basepoint is None:
        x0, x1, y0, y1 = domain.bounds
        basepoint = (0.5 * (x0 + x1), 0.5 * (y0 + y1))
    base = (int(np.clip(round((basepoint[0] - domain.x[0]) / domain.hx), 0, domain.nx - 1)),
            int(np.clip(round((basepoint[1] - domain.y[0]) / domain.hy), 0, domain.ny - 1)))
    if not domain.mask[base]:
        raise ValidationError("basepoint", f"{basepoint} is not a domain node")

    p_nodes = domain.sample(P)
    q_nodes = domain.sample(Q)
    rows_first = _line_integral(p_nodes, q_nodes, domain.hx, domain.hy, base)
    columns_first = _line_integral(q_nodes.T, p_nodes.T, domain.hy, domain.hx, base[::-1]).T
    gap = float(np.nanmax(np.abs(rows_first - columns_first)))
    logger.debug(f"Potential integrated: curl {curl:.3e}, path gap {gap:.3e}, slack {slack:.3e}")
    if not gap <= path_tolerance:
        raise NotClosed(gap, path_tolerance, detail="path-independence")
    return GraphFunction(domain, rows_first)


def calabi_dual(model, v, config=None, basepoint=None):
    """
    Minimal Killing graph dual to a spacelike solution v of the Lorentzian
    equation for the model's tau.
    """
    curl_tolerance = getattr(config, "curl_tolerance", CURL_TOLERANCE)
    residual = lorentz_mc_residual(model, v)
    logger.info(f"Lorentzian residual max {np.nanmax(np.abs(residual)):.3e}, "
                f"spacelike margin {v.margin:.6g}")
    G = dual_gradient(model, v)
    return integrate_potential(model, G, basepoint, curl_tolerance=curl_tolerance)
