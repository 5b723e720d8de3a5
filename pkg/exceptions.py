"""
Error types raised by the Killing Geometry Toolkit
"""


class KillingGeometryError(Exception):
    """Base class for every error raised by the toolkit"""


class ParseError(KillingGeometryError):
    """Malformed expression or configuration text"""

    def __init__(self, message, position=None, line=None, column=None):
        self.message = message
        self.position = position
        self.line = line
        self.column = column
        if line is not None:
            where = f"line {line}, column {column}: "
        elif position is not None:
            where = f"position {position}: "
        else:
            where = ""
        super().__init__(f"{where}{message}")


class ValidationError(KillingGeometryError):
    def __init__(self, key, reason):
        self.key = key
        self.reason = reason
        super().__init__(f"{key}: {reason}")


class NonPositiveField(KillingGeometryError):
    def __init__(self, name, point, value=None):
        self.name = name
        self.point = point
        self.value = value
        super().__init__(f"{name} must be positive, got {value} at {point}")


class OutOfDomain(KillingGeometryError):
    def __init__(self, point, detail=""):
        self.point = point
        message = f"point {point} lies outside the model domain"
        super().__init__(f"{message} ({detail})" if detail else message)


class BoundaryTooClose(KillingGeometryError):
    def __init__(self, point, spacing):
        self.point = point
        self.spacing = spacing
        super().__init__(f"point {point} is within one grid spacing ({spacing:.3g}) of the boundary")


class DegenerateFrame(KillingGeometryError):
    def __init__(self, z, determinant):
        self.z = z
        self.determinant = determinant
        super().__init__(f"det(exp(zA)) = {determinant:.3g} <= 0 at z = {z}")


class GridMismatch(KillingGeometryError):
    def __init__(self, expected, got):
        self.expected = expected
        self.got = got
        super().__init__(f"grid shape {got} does not match model grid {expected}")


class OutOfRange(KillingGeometryError):
    def __init__(self, value, lower, upper):
        self.value = value
        super().__init__(f"parameter {value} outside [{lower}, {upper}]")


class CurveNotClosed(KillingGeometryError):
    def __init__(self, gap):
        self.gap = gap
        super().__init__(f"curve endpoints differ by {gap:.3g}")


class ToleranceNotMet(KillingGeometryError):
    """The adaptive integrator could not reach the requested tolerance"""


class LeftDomain(KillingGeometryError):
    def __init__(self, message, curve=None):
        self.curve = curve
        super().__init__(message)


class MaxIterationsExceeded(KillingGeometryError):
    def __init__(self, report):
        self.report = report
        super().__init__(
            f"solver stopped after {report.iterations} iterations "
            f"with residual {report.residual:.3e}"
        )


class NotSpacelike(KillingGeometryError):
    def __init__(self, margin):
        self.margin = margin
        super().__init__(f"function is not spacelike: min(mu - |grad v|) = {margin:.3g}")


class NotClosed(KillingGeometryError):
    def __init__(self, residual, tolerance, detail="curl"):
        self.residual = residual
        self.tolerance = tolerance
        super().__init__(f"{detail} residual {residual:.3e} exceeds tolerance {tolerance:.1e}")


class ObstructionError(KillingGeometryError):
    """Geometric obstruction: the requested object cannot exist"""


class ObstructionNonzero(ObstructionError):
    def __init__(self, mean, tolerance):
        self.mean = mean
        self.tolerance = tolerance
        super().__init__(
            f"mean of tau lambda^2 / mu over the torus is {mean:.6g} (tolerance {tolerance:.1e}); "
            "a Killing submersion over a compact base admits a global section "
            "only when the integral of tau / mu over the base vanishes"
        )
