"""
Horizontal lifts of base curves and the holonomy / flux identity.

A lift of c(s) = (x(s), y(s)) solves dt/ds = alpha x' + beta y', so the lift
is tangent to the horizontal distribution of dt - alpha dx - beta dy. For a
closed simple curve bounding O, the vertical displacement d of the lift
satisfies |d| = |integral_O 2 tau / mu|.
"""

import logging
from dataclasses import dataclass, field

import numpy as np
import pandas as pd
from numpy.polynomial.legendre import leggauss
from scipy.integrate import solve_ivp
from scipy.interpolate import CubicSpline

from config import CLOSED_CURVE_TOLERANCE, LIFT_SAMPLES_PER_PIECE, LIFT_TOLERANCE
from exceptions import CurveNotClosed, OutOfDomain, ToleranceNotMet, ValidationError

logger = logging.getLogger(__name__)

_GAUSS_POINTS = 8


class _CirclePiece:
    def __init__(self, center, radius, theta0, theta1):
        self.center = (float(center[0]), float(center[1]))
        self.radius = float(radius)
        self.theta0 = float(theta0)
        self.theta1 = float(theta1)

    def position(self, s):
        theta = self.theta0 + (self.theta1 - self.theta0) * np.asarray(s, dtype=float)
        return (self.center[0] + self.radius * np.cos(theta),
                self.center[1] + self.radius * np.sin(theta))

    def velocity(self, s):
        span = self.theta1 - self.theta0
        theta = self.theta0 + span * np.asarray(s, dtype=float)
        return -self.radius * span * np.sin(theta), self.radius * span * np.cos(theta)

    def reversed(self):
        return _CirclePiece(self.center, self.radius, self.theta1, self.theta0)


class _SegmentPiece:
    def __init__(self, start, end):
        self.start = np.array(start, dtype=float)
        self.end = np.array(end, dtype=float)

    def position(self, s):
        s = np.asarray(s, dtype=float)
        return (self.start[0] + (self.end[0] - self.start[0]) * s,
                self.start[1] + (self.end[1] - self.start[1]) * s)

    def velocity(self, s):
        s = np.asarray(s, dtype=float)
        d = self.end - self.start
        return np.full(s.shape, d[0]), np.full(s.shape, d[1])

    def reversed(self):
        return _SegmentPiece(self.end, self.start)


class _SplinePiece:
    def __init__(self, spline, flip=False):
        self.spline = spline
        self.flip = flip
        self._derivative = spline.derivative()

    def _param(self, s):
        s = np.asarray(s, dtype=float)
        return 1.0 - s if self.flip else s

    def position(self, s):
        xy = self.spline(self._param(s))
        return xy[..., 0], xy[..., 1]

    def velocity(self, s):
        sign = -1.0 if self.flip else 1.0
        dxy = self._derivative(self._param(s))
        return sign * dxy[..., 0], sign * dxy[..., 1]

    def reversed(self):
        return _SplinePiece(self.spline, not self.flip)


class BaseCurve:
    """
    Piecewise C1 curve in the base, parametrised over [0, n_pieces]
    with each piece on a unit parameter interval.
    """

    def __init__(self, pieces, name="curve"):
        if not pieces:
            raise ValidationError("curve", "a curve needs at least one piece")
        self.pieces = list(pieces)
        self.name = name

    def __repr__(self):
        return f"BaseCurve({self.name}, pieces={len(self.pieces)}, closed={self.closed})"

    @classmethod
    def circle(cls, center, radius, clockwise=False):
        if not radius > 0:
            raise ValidationError("curve.radius", "circle radius must be positive")
        theta1 = -2 * np.pi if clockwise else 2 * np.pi
        return cls([_CirclePiece(center, radius, 0.0, theta1)],
                   name=f"circle({center[0]}, {center[1]}, r={radius})")

    @classmethod
    def segment(cls, start, end):
        return cls([_SegmentPiece(start, end)], name="segment")

    @classmethod
    def from_samples(cls, t, x, y, closed=None):
        """Cubic spline through samples (t_i, x_i, y_i); periodic when closed"""
        t = np.asarray(t, dtype=float)
        xy = np.column_stack([np.asarray(x, dtype=float), np.asarray(y, dtype=float)])
        if t.ndim != 1 or len(t) < 3 or xy.shape[0] != len(t):
            raise ValidationError("curve", "need at least three samples of equal length")
        if not np.all(np.diff(t) > 0):
            raise ValidationError("curve", "sample parameters must be strictly increasing")
        gap = float(np.hypot(*(xy[-1] - xy[0])))
        if closed is None:
            closed = gap <= CLOSED_CURVE_TOLERANCE
        elif closed and gap > CLOSED_CURVE_TOLERANCE:
            raise CurveNotClosed(gap)
        if closed:
            xy[-1] = xy[0]
        u = (t - t[0]) / (t[-1] - t[0])
        spline = CubicSpline(u, xy, axis=0, bc_type="periodic" if closed else "not-a-knot")
        return cls([_SplinePiece(spline)], name="samples")

    @staticmethod
    def join(*curves):
        """Concatenate curves; consecutive endpoints must coincide"""
        pieces = []
        for previous, current in zip(curves, curves[1:]):
            gap = float(np.hypot(*(np.subtract(previous.end, current.start))))
            if gap > CLOSED_CURVE_TOLERANCE:
                raise ValidationError("curve", f"pieces do not connect (gap {gap:.3g})")
        for curve in curves:
            pieces.extend(curve.pieces)
        return BaseCurve(pieces, name="+".join(curve.name for curve in curves))

    def reversed(self):
        return BaseCurve([piece.reversed() for piece in reversed(self.pieces)],
                         name=f"reversed({self.name})")

    @property
    def start(self):
        x, y = self.pieces[0].position(0.0)
        return float(x), float(y)

    @property
    def end(self):
        x, y = self.pieces[-1].position(1.0)
        return float(x), float(y)

    @property
    def gap(self):
        return float(np.hypot(self.end[0] - self.start[0], self.end[1] - self.start[1]))

    @property
    def closed(self):
        return self.gap <= CLOSED_CURVE_TOLERANCE

    def points(self, samples_per_piece=LIFT_SAMPLES_PER_PIECE):
        s = np.linspace(0.0, 1.0, samples_per_piece)
        xs, ys = zip(*(piece.position(s) for piece in self.pieces))
        return np.concatenate(xs), np.concatenate(ys)

    def length(self, lam=None):
        """Euclidean length, or metric length for the conformal factor ``lam``"""
        nodes, weights = leggauss(_GAUSS_POINTS)
        s = 0.5 * (nodes + 1.0)
        total = 0.0
        for piece in self.pieces:
            grid = (np.arange(32)[:, None] + s[None, :]) / 32
            vx, vy = piece.velocity(grid)
            speed = np.hypot(vx, vy)
            if lam is not None:
                speed = speed * lam(*piece.position(grid))
            total += float(np.sum(speed * weights[None, :])) * 0.5 / 32
        return total


@dataclass(frozen=True)
class LiftedCurve:
    """Samples (s, x, y, t) of a horizontal lift"""
    s: np.ndarray
    x: np.ndarray
    y: np.ndarray
    t: np.ndarray
    t0: float
    curve: BaseCurve = field(repr=False, compare=False)

    @property
    def displacement(self):
        return float(self.t[-1] - self.t[0])

    def to_frame(self):
        return pd.DataFrame({"s": self.s, "x": self.x, "y": self.y, "t": self.t})

    def horizontality_residual(self, model):
        """
        Largest mismatch between the sampled Delta t and the integral of
        alpha x' + beta y' over a sample interval, per unit base length.
        """
        nodes, weights = leggauss(_GAUSS_POINTS)
        worst = 0.0
        samples = (len(self.s) - 1) // len(self.curve.pieces)
        for index, piece in enumerate(self.curve.pieces):
            edges = self.s[index * samples:(index + 1) * samples + 1] - index
            dt = np.diff(self.t[index * samples:(index + 1) * samples + 1])
            left, right = edges[:-1], edges[1:]
            half = 0.5 * (right - left)
            quad_s = left[:, None] + half[:, None] * (nodes[None, :] + 1.0)
            x, y = piece.position(quad_s)
            vx, vy = piece.velocity(quad_s)
            rate = model.alpha(x, y) * vx + model.beta(x, y) * vy
            speed = model.lam(x, y) * np.hypot(vx, vy)
            integral = np.sum(rate * weights, axis=1) * half
            length = np.sum(speed * weights, axis=1) * half
            with np.errstate(invalid="ignore", divide="ignore"):
                residual = np.abs(dt - integral) / np.where(length > 0, length, 1.0)
            worst = max(worst, float(np.max(residual)))
        return worst


def _check_inside(model, curve, samples):
    x, y = curve.points(samples)
    inside = model.domain.contains(x, y)
    if not np.all(inside):
        index = int(np.argmin(inside))
        raise OutOfDomain((float(x[index]), float(y[index])), f"{curve.name} leaves the domain")


def horizontal_lift(model, curve, t0=0.0, tolerance=LIFT_TOLERANCE,
                    samples_per_piece=LIFT_SAMPLES_PER_PIECE):
    """
    Horizontal lift of ``curve`` starting at fibre coordinate ``t0``.

    Each piece is integrated with an adaptive Runge-Kutta 4(5) pair at
    ``atol = rtol = tolerance``. The vertical coordinate is integrated from 0
    and shifted by t0 afterwards, so lifts differing only in t0 differ by
    exactly t0.
    """
    model.require_connection()
    _check_inside(model, curve, samples_per_piece)
    alpha, beta = model.alpha, model.beta
    s_eval = np.linspace(0.0, 1.0, samples_per_piece)

    s_parts, x_parts, y_parts, t_parts = [], [], [], []
    offset = 0.0
    for index, piece in enumerate(curve.pieces):
        def rate(s, _t, piece=piece):
            x, y = piece.position(s)
            vx, vy = piece.velocity(s)
            return [alpha(x, y) * vx + beta(x, y) * vy]

        solution = solve_ivp(rate, (0.0, 1.0), [0.0], method="RK45", t_eval=s_eval,
                             rtol=tolerance, atol=tolerance)
        if not solution.success or not np.all(np.isfinite(solution.y)):
            raise ToleranceNotMet(f"lift of {curve.name} piece {index}: {solution.message}")
        x, y = piece.position(s_eval)
        start = 0 if index == 0 else 1
        s_parts.append(index + s_eval[start:])
        x_parts.append(np.asarray(x)[start:])
        y_parts.append(np.asarray(y)[start:])
        t_parts.append(offset + solution.y[0][start:])
        offset = offset + solution.y[0][-1]

    t = np.concatenate(t_parts) + t0
    lifted = LiftedCurve(np.concatenate(s_parts), np.concatenate(x_parts), np.concatenate(y_parts),
                         t, float(t0), curve)
    logger.debug(f"Lifted {curve.name}: displacement {lifted.displacement:.12g}")
    return lifted


def holonomy_displacement(model, curve, tolerance=LIFT_TOLERANCE):
    """
    Signed vertical displacement d = t_end - t_start of the lift of a closed
    curve. Counterclockwise loops give d with the sign of the enclosed flux
    of 2 tau / mu.
    """
    if not curve.closed:
        raise CurveNotClosed(curve.gap)
    return horizontal_lift(model, curve, 0.0, tolerance).displacement


class DiskRegion:
    """Disk region, integrated in polar coordinates (Gauss-Legendre in r, midpoint in theta)"""

    def __init__(self, center, radius, radial_nodes=48, angular_nodes=128):
        if not radius > 0:
            raise ValidationError("region.radius", "disk radius must be positive")
        self.center = (float(center[0]), float(center[1]))
        self.radius = float(radius)
        self.radial_nodes = radial_nodes
        self.angular_nodes = angular_nodes

    def __repr__(self):
        return f"DiskRegion(center={self.center}, radius={self.radius})"

    def integrate(self, model, integrand):
        theta = 2 * np.pi * (np.arange(self.angular_nodes) + 0.5) / self.angular_nodes
        edge_x = self.center[0] + self.radius * np.cos(theta)
        edge_y = self.center[1] + self.radius * np.sin(theta)
        if not np.all(model.domain.contains(edge_x, edge_y)):
            raise OutOfDomain(self.center, f"disk of radius {self.radius} is not inside the domain")
        nodes, weights = leggauss(self.radial_nodes)
        r = 0.5 * self.radius * (nodes + 1.0)
        R, T = np.meshgrid(r, theta, indexing="ij")
        values = integrand(self.center[0] + R * np.cos(T), self.center[1] + R * np.sin(T))
        radial = np.sum(values, axis=1) * (2 * np.pi / self.angular_nodes)
        return float(0.5 * self.radius * np.sum(weights * r * radial))


class MaskRegion:
    """Union of grid cells flagged by a boolean cell-centre indicator"""

    def __init__(self, mask=None):
        self.mask = None if mask is None else np.asarray(mask, dtype=bool)

    def __repr__(self):
        return "MaskRegion(whole domain)" if self.mask is None else f"MaskRegion({int(self.mask.sum())} cells)"

    def integrate(self, model, integrand):
        XC, YC, inside = model.domain.cell_centers()
        if self.mask is not None:
            if self.mask.shape != inside.shape:
                raise ValidationError("region.mask", f"expected cell shape {inside.shape}")
            if np.any(self.mask & ~inside):
                raise OutOfDomain((float(XC[self.mask & ~inside][0]), float(YC[self.mask & ~inside][0])),
                                  "region cell outside the domain")
            inside = self.mask
        values = integrand(XC[inside], YC[inside])
        return float(np.sum(values) * model.domain.cell_area)


def flux_integral(model, region=None):
    """Integral of (2 tau / mu) lambda^2 dx dy over a region (default: the whole domain)"""
    region = MaskRegion() if region is None else region
    tau, lam, mu = model.tau, model.lam, model.mu

    def integrand(x, y):
        return 2.0 * tau(x, y) * lam(x, y) ** 2 / mu(x, y)

    flux = region.integrate(model, integrand)
    logger.debug(f"Flux of 2 tau / mu over {region!r}: {flux:.12g}")
    return flux
