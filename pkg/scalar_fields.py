"""
Scalar and vector fields on planar base domains

Fields are immutable after construction. Analytic fields are sympy trees and
carry exact derivatives; grid fields are sampled arrays interpolated
bilinearly, with derivatives taken by second-order finite differences.
Fields can be combined with +, -, * and /; analytic operands stay analytic and
mixed operands differentiate by the product and quotient rules.
"""

import logging
from abc import ABC, abstractmethod
from functools import cached_property

import numpy as np
import sympy
from scipy import ndimage
from scipy.integrate import simpson
from scipy.interpolate import RegularGridInterpolator

from config import SIMPSON_NODES
from exceptions import ValidationError
from expression_parser import X, Y, parse_expression

logger = logging.getLogger(__name__)

_EVAL_CHUNK = 4096


class Domain2D:
    """
    Planar base domain with its node grid.

    Grids use ``indexing='ij'``: axis 0 runs along x, axis 1 along y.

    * ``disk``: disk of radius R centred at the origin; nodes cover the
      bounding box [-R, R]^2 endpoints included, and only nodes with r < R
      belong to the domain.
    * ``rectangle``: [x0, x1] x [y0, y1], endpoints included.
    * ``torus``: the rectangle with opposite sides identified; nodes at
      x0 + i*hx for i < nx (the right edge is the left edge).
    """

    KINDS = ("disk", "rectangle", "torus")

    def __init__(self, kind, nx, ny, radius=None, bounds=None):
        if kind not in self.KINDS:
            raise ValidationError("domain.kind", f"must be one of {', '.join(self.KINDS)}")
        if int(nx) != nx or int(ny) != ny or nx < 3 or ny < 3:
            raise ValidationError("grid", "nx and ny must be integers >= 3")
        self.kind = kind
        self.nx = int(nx)
        self.ny = int(ny)

        if kind == "disk":
            if radius is None or not radius > 0:
                raise ValidationError("domain.radius", "disk radius must be positive")
            self.radius = float(radius)
            self.bounds = (-self.radius, self.radius, -self.radius, self.radius)
        else:
            if bounds is None or len(bounds) != 4:
                raise ValidationError("domain.bounds", "expected [x0, x1, y0, y1]")
            x0, x1, y0, y1 = (float(b) for b in bounds)
            if not (x1 > x0 and y1 > y0):
                raise ValidationError("domain.bounds", "need x0 < x1 and y0 < y1")
            self.radius = None
            self.bounds = (x0, x1, y0, y1)

    def __repr__(self):
        extent = f"radius={self.radius}" if self.kind == "disk" else f"bounds={self.bounds}"
        return f"Domain2D({self.kind}, {extent}, grid={self.nx}x{self.ny})"

    @property
    def periodic(self):
        return self.kind == "torus"

    @property
    def shape(self):
        return (self.nx, self.ny)

    @property
    def lengths(self):
        x0, x1, y0, y1 = self.bounds
        return (x1 - x0, y1 - y0)

    @property
    def hx(self):
        lx = self.lengths[0]
        return lx / self.nx if self.periodic else lx / (self.nx - 1)

    @property
    def hy(self):
        ly = self.lengths[1]
        return ly / self.ny if self.periodic else ly / (self.ny - 1)

    @cached_property
    def x(self):
        return self.bounds[0] + self.hx * np.arange(self.nx)

    @cached_property
    def y(self):
        return self.bounds[2] + self.hy * np.arange(self.ny)

    @cached_property
    def mesh(self):
        X_, Y_ = np.meshgrid(self.x, self.y, indexing="ij")
        X_.flags.writeable = False
        Y_.flags.writeable = False
        return X_, Y_

    @cached_property
    def mask(self):
        """Nodes that belong to the domain"""
        X_, Y_ = self.mesh
        if self.kind == "disk":
            inside = X_ ** 2 + Y_ ** 2 < self.radius ** 2
        else:
            inside = np.ones(self.shape, dtype=bool)
        inside.flags.writeable = False
        return inside

    @cached_property
    def interior_mask(self):
        """Nodes whose full 3x3 stencil lies in the domain"""
        if self.periodic:
            interior = np.ones(self.shape, dtype=bool)
        else:
            interior = ndimage.binary_erosion(
                self.mask, structure=np.ones((3, 3), dtype=bool), border_value=0
            )
        interior.flags.writeable = False
        return interior

    @property
    def cell_area(self):
        return self.hx * self.hy

    def contains(self, x, y, margin=0.0):
        x = np.asarray(x, dtype=float)
        y = np.asarray(y, dtype=float)
        if self.periodic:
            return np.isfinite(x) & np.isfinite(y)
        if self.kind == "disk":
            return np.hypot(x, y) < self.radius - margin
        x0, x1, y0, y1 = self.bounds
        return (x >= x0 + margin) & (x <= x1 - margin) & (y >= y0 + margin) & (y <= y1 - margin)

    def distance_to_boundary(self, x, y):
        if self.periodic:
            return np.inf
        if self.kind == "disk":
            return self.radius - float(np.hypot(x, y))
        x0, x1, y0, y1 = self.bounds
        return float(min(x - x0, x1 - x, y - y0, y1 - y))

    def wrap(self, x, y):
        """Map coordinates into the fundamental rectangle (torus only)"""
        if not self.periodic:
            return x, y
        x0, _, y0, _ = self.bounds
        lx, ly = self.lengths
        return x0 + np.mod(x - x0, lx), y0 + np.mod(y - y0, ly)

    def cell_centers(self):
        """Cell-centre coordinates and the mask of cells inside the domain"""
        x0, x1, y0, y1 = self.bounds
        if self.periodic:
            xc = self.x + 0.5 * self.hx
            yc = self.y + 0.5 * self.hy
        else:
            xc = self.x[:-1] + 0.5 * self.hx
            yc = self.y[:-1] + 0.5 * self.hy
        XC, YC = np.meshgrid(xc, yc, indexing="ij")
        return XC, YC, self.contains(XC, YC)

    def oversampled_points(self, factor):
        """Points of a grid refined ``factor`` times, restricted to the domain"""
        x0, x1, y0, y1 = self.bounds
        if self.periodic:
            nx, ny = self.nx * factor, self.ny * factor
        else:
            nx, ny = (self.nx - 1) * factor + 1, (self.ny - 1) * factor + 1
        xs = np.linspace(x0, x1, nx, endpoint=not self.periodic)
        ys = np.linspace(y0, y1, ny, endpoint=not self.periodic)
        XF, YF = np.meshgrid(xs, ys, indexing="ij")
        inside = self.contains(XF, YF)
        return XF[inside], YF[inside]

    def sample(self, field):
        """Evaluate a field on the domain nodes; NaN off the domain"""
        values = np.full(self.shape, np.nan)
        X_, Y_ = self.mesh
        values[self.mask] = field(X_[self.mask], Y_[self.mask])
        return values

    def sample_at(self, field, X_, Y_):
        values = np.full(np.shape(X_), np.nan)
        inside = self.contains(X_, Y_)
        values[inside] = field(X_[inside], Y_[inside])
        return values

    def refined(self, nx, ny=None):
        return Domain2D(self.kind, nx, nx if ny is None else ny,
                        radius=self.radius, bounds=None if self.kind == "disk" else self.bounds)


def _broadcast(x, y):
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    scalar = x.ndim == 0 and y.ndim == 0
    x, y = np.broadcast_arrays(x, y)
    return x, y, scalar


def _finish(value, scalar):
    if scalar:
        return float(np.asarray(value).reshape(-1)[0])
    return value


class ScalarField2D(ABC):
    """
    Real-valued field on a planar domain.

    Subclasses implement ``_evaluate`` and ``_gradient`` on broadcast arrays;
    the public methods accept scalars or arrays and return matching shapes.
    """

    kind = "derived"

    @abstractmethod
    def _evaluate(self, x, y):
        ...

    @abstractmethod
    def _gradient(self, x, y):
        ...

    def _hessian(self, x, y):
        step = 1e-5
        gx_p, gy_p = self._gradient(x + step, y)
        gx_m, gy_m = self._gradient(x - step, y)
        hx_p, hy_p = self._gradient(x, y + step)
        hx_m, hy_m = self._gradient(x, y - step)
        fxx = (gx_p - gx_m) / (2 * step)
        fyy = (hy_p - hy_m) / (2 * step)
        fxy = 0.5 * ((gy_p - gy_m) + (hx_p - hx_m)) / (2 * step)
        return fxx, fxy, fyy

    @property
    def exact_derivatives(self):
        """True when gradients are exact rather than finite differences"""
        return False

    @property
    def is_constant(self):
        return False

    @property
    def expression(self):
        return None

    def __call__(self, x, y):
        x, y, scalar = _broadcast(x, y)
        return _finish(self._evaluate(x, y), scalar)

    def gradient(self, x, y):
        x, y, scalar = _broadcast(x, y)
        fx, fy = self._gradient(x, y)
        return _finish(fx, scalar), _finish(fy, scalar)

    def hessian(self, x, y):
        """Second derivatives (f_xx, f_xy, f_yy)"""
        x, y, scalar = _broadcast(x, y)
        return tuple(_finish(h, scalar) for h in self._hessian(x, y))

    def laplacian(self, x, y):
        fxx, _, fyy = self.hessian(x, y)
        return fxx + fyy

    def __add__(self, other):
        return _combine(self, other, "+")

    def __radd__(self, other):
        return _combine(other, self, "+")

    def __sub__(self, other):
        return _combine(self, other, "-")

    def __rsub__(self, other):
        return _combine(other, self, "-")

    def __mul__(self, other):
        return _combine(self, other, "*")

    def __rmul__(self, other):
        return _combine(other, self, "*")

    def __truediv__(self, other):
        return _combine(self, other, "/")

    def __rtruediv__(self, other):
        return _combine(other, self, "/")

    def __neg__(self):
        return _combine(-1, self, "*")


class AnalyticField(ScalarField2D):
    """Field given by an expression tree, with exact symbolic derivatives"""

    kind = "analytic"

    def __init__(self, expression, name=None):
        if isinstance(expression, str):
            expression = parse_expression(expression)
        self._expr = sympy.sympify(expression)
        self.name = name or str(self._expr)
        extra = self._expr.free_symbols - {X, Y}
        if extra:
            raise ValidationError(self.name, f"unknown symbols {sorted(map(str, extra))}")

        fx = sympy.diff(self._expr, X)
        fy = sympy.diff(self._expr, Y)
        self._derivatives = {
            "f": self._expr,
            "fx": fx,
            "fy": fy,
            "fxx": sympy.diff(fx, X),
            "fxy": sympy.diff(fx, Y),
            "fyy": sympy.diff(fy, Y),
        }
        self._functions = {
            key: sympy.lambdify((X, Y), expr, modules="numpy")
            for key, expr in self._derivatives.items()
        }

    def __repr__(self):
        return f"AnalyticField({self._expr})"

    @property
    def expression(self):
        return self._expr

    @property
    def exact_derivatives(self):
        return True

    @property
    def is_constant(self):
        return not self._expr.free_symbols

    def derivative_expression(self, key):
        return self._derivatives[key]

    def _call(self, key, x, y):
        with np.errstate(all="ignore"):
            value = np.asarray(self._functions[key](x, y), dtype=float)
        return np.broadcast_to(value, np.shape(x)).copy()

    def _evaluate(self, x, y):
        return self._call("f", x, y)

    def _gradient(self, x, y):
        return self._call("fx", x, y), self._call("fy", x, y)

    def _hessian(self, x, y):
        return self._call("fxx", x, y), self._call("fxy", x, y), self._call("fyy", x, y)


def constant_field(value):
    value = float(value)
    return AnalyticField(sympy.Integer(int(value)) if value.is_integer() else sympy.Float(value, 17))


class GridField(ScalarField2D):
    """
    Field sampled on a regular node grid, interpolated bilinearly.

    Gradients are second-order central differences (one-sided second order
    at non-periodic edges), themselves interpolated bilinearly.
    """

    kind = "grid"

    def __init__(self, values, x0, y0, hx, hy, periodic=False, name="grid"):
        values = np.array(values, dtype=float)
        if values.ndim != 2 or min(values.shape) < 3:
            raise ValidationError(name, "grid samples must be a 2-D array with at least 3x3 nodes")
        values.flags.writeable = False
        self.values = values
        self.x0, self.y0 = float(x0), float(y0)
        self.hx, self.hy = float(hx), float(hy)
        self.periodic = periodic
        self.name = name

        fx = _grid_derivative(values, self.hx, 0, periodic)
        fy = _grid_derivative(values, self.hy, 1, periodic)
        fxx = _grid_derivative(fx, self.hx, 0, periodic)
        fxy = 0.5 * (_grid_derivative(fx, self.hy, 1, periodic) + _grid_derivative(fy, self.hx, 0, periodic))
        fyy = _grid_derivative(fy, self.hy, 1, periodic)
        self._interpolators = {
            key: self._interpolator(array)
            for key, array in (("f", values), ("fx", fx), ("fy", fy),
                               ("fxx", fxx), ("fxy", fxy), ("fyy", fyy))
        }

    @classmethod
    def from_domain(cls, domain, values, name="grid"):
        values = np.asarray(values, dtype=float)
        if values.shape != domain.shape:
            raise ValidationError(name, f"expected shape {domain.shape}, got {values.shape}")
        return cls(values, domain.x[0], domain.y[0], domain.hx, domain.hy,
                   periodic=domain.periodic, name=name)

    def __repr__(self):
        return f"GridField({self.name}, shape={self.values.shape}, periodic={self.periodic})"

    def _interpolator(self, array):
        nx, ny = array.shape
        xs = self.x0 + self.hx * np.arange(nx + (1 if self.periodic else 0))
        ys = self.y0 + self.hy * np.arange(ny + (1 if self.periodic else 0))
        if self.periodic:
            array = np.pad(array, ((0, 1), (0, 1)), mode="wrap")
        return RegularGridInterpolator((xs, ys), array, method="linear",
                                       bounds_error=False, fill_value=np.nan)

    def _interpolate(self, key, x, y):
        if self.periodic:
            nx, ny = self.values.shape
            x = self.x0 + np.mod(x - self.x0, nx * self.hx)
            y = self.y0 + np.mod(y - self.y0, ny * self.hy)
        points = np.stack([np.ravel(x), np.ravel(y)], axis=-1)
        return self._interpolators[key](points).reshape(np.shape(x))

    def _evaluate(self, x, y):
        return self._interpolate("f", x, y)

    def _gradient(self, x, y):
        return self._interpolate("fx", x, y), self._interpolate("fy", x, y)

    def _hessian(self, x, y):
        return tuple(self._interpolate(key, x, y) for key in ("fxx", "fxy", "fyy"))


def _grid_derivative(values, h, axis, periodic):
    if periodic:
        return (np.roll(values, -1, axis=axis) - np.roll(values, 1, axis=axis)) / (2 * h)
    return np.gradient(values, h, axis=axis, edge_order=2)


class _BinaryField(ScalarField2D):
    def __init__(self, left, right, op):
        self.left = left
        self.right = right
        self.op = op

    def __repr__(self):
        return f"({self.left!r} {self.op} {self.right!r})"

    @property
    def exact_derivatives(self):
        return self.left.exact_derivatives and self.right.exact_derivatives

    def _evaluate(self, x, y):
        a = self.left._evaluate(x, y)
        b = self.right._evaluate(x, y)
        if self.op == "+":
            return a + b
        if self.op == "-":
            return a - b
        if self.op == "*":
            return a * b
        return a / b

    def _gradient(self, x, y):
        ax, ay = self.left._gradient(x, y)
        bx, by = self.right._gradient(x, y)
        if self.op == "+":
            return ax + bx, ay + by
        if self.op == "-":
            return ax - bx, ay - by
        a = self.left._evaluate(x, y)
        b = self.right._evaluate(x, y)
        if self.op == "*":
            return ax * b + a * bx, ay * b + a * by
        return (ax * b - a * bx) / b ** 2, (ay * b - a * by) / b ** 2


def _as_field(value):
    if isinstance(value, ScalarField2D):
        return value
    if isinstance(value, (int, float, np.floating, np.integer)):
        return constant_field(float(value))
    if isinstance(value, (str, sympy.Basic)):
        return AnalyticField(value)
    return NotImplemented


def _combine(left, right, op):
    left = _as_field(left)
    right = _as_field(right)
    if left is NotImplemented or right is NotImplemented:
        return NotImplemented
    if isinstance(left, AnalyticField) and isinstance(right, AnalyticField):
        a, b = left.expression, right.expression
        expr = {"+": a + b, "-": a - b, "*": a * b, "/": a / b}[op]
        return AnalyticField(expr)
    return _BinaryField(left, right, op)


class RadialEtaField(ScalarField2D):
    """
    eta(p) = integral_0^1 2 s g(s p) ds for an integrand g, by composite
    Simpson quadrature on ``nodes`` equally spaced points.

    With g = tau * lambda^2 / mu this is the potential of the radial
    connection: (x eta)_x + (y eta)_y = 2 g.
    """

    def __init__(self, integrand, nodes=SIMPSON_NODES):
        if nodes < 3 or nodes % 2 == 0:
            raise ValidationError("quadrature.nodes", "Simpson quadrature needs an odd node count >= 3")
        self.integrand = integrand
        self.nodes = int(nodes)
        self._s = np.linspace(0.0, 1.0, self.nodes)

    def __repr__(self):
        return f"RadialEtaField({self.integrand!r}, nodes={self.nodes})"

    @property
    def exact_derivatives(self):
        return self.integrand.exact_derivatives

    def _quadrature(self, x, y, weight_power, derivative):
        s = self._s
        flat_x = np.ravel(x)
        flat_y = np.ravel(y)
        outputs = [np.empty(flat_x.shape) for _ in range(1 if derivative is None else 2)]
        for start in range(0, flat_x.size, _EVAL_CHUNK):
            stop = start + _EVAL_CHUNK
            sx = np.outer(flat_x[start:stop], s)
            sy = np.outer(flat_y[start:stop], s)
            weight = 2.0 * s ** weight_power
            if derivative is None:
                samples = [self.integrand._evaluate(sx, sy)]
            else:
                samples = list(self.integrand._gradient(sx, sy))
            for out, sample in zip(outputs, samples):
                out[start:stop] = simpson(weight * sample, x=s, axis=-1)
        return [out.reshape(np.shape(x)) for out in outputs]

    def _evaluate(self, x, y):
        return self._quadrature(x, y, 1, None)[0]

    def _gradient(self, x, y):
        fx, fy = self._quadrature(x, y, 2, "gradient")
        return fx, fy


class VectorField2D:
    """Coordinate components (X^x, X^y) of a tangent field on the base"""

    def __init__(self, x_component, y_component, name="vector"):
        self.x_component = _as_field(x_component)
        self.y_component = _as_field(y_component)
        self.name = name

    def __repr__(self):
        return f"VectorField2D({self.name})"

    def __call__(self, x, y):
        return self.x_component(x, y), self.y_component(x, y)

    def __add__(self, other):
        return VectorField2D(self.x_component + other.x_component,
                             self.y_component + other.y_component,
                             name=f"{self.name}+{other.name}")

    def norm(self, lam, x, y):
        """Length for the base metric lambda^2 (dx^2 + dy^2)"""
        vx, vy = self(x, y)
        return lam(x, y) * np.hypot(vx, vy)

    def sample(self, domain):
        return domain.sample(self.x_component), domain.sample(self.y_component)
