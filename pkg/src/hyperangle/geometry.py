"""Hyperboloid-model primitives.

Hyperbolic n-space is realized as the upper sheet of the quadric
``<x,x> = -1`` in R^{n+1} equipped with the bilinear form ``<x,y> = x^t J y``
where ``J = diag(I_n, -1)``.  Isometries are (n+1)x(n+1) matrices in the
identity component of the group preserving J; the distance of a group element
g from the base point ``e_{n+1}`` is ``t(g) = arccosh(g[n,n])`` and its norm is
``|g|^2 = 2 cosh t(g)``.

The module also provides the unsigned angle at the base point between two
hyperboloid points (the Euclidean angle between their truncated coordinate
vectors) and closed formulas for how norm and base angle change under right
multiplication.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence, Union

import numpy as np

from .errors import (
    DegenerateInputError,
    InvariantViolationError,
    PreconditionError,
    UsageError,
)

__all__ = [
    "AngleValue",
    "ClampStats",
    "GroupElement",
    "HyperboloidPoint",
    "LorentzVector",
    "angle_at_base",
    "angle_at_base_total",
    "base_point",
    "cartan_t",
    "clamp_stats",
    "group_norm_sq",
    "hyperbolic_distance",
    "make_rotation",
    "make_translation",
    "minkowski_inner",
    "minkowski_matrix",
    "north_reference",
    "theta_of",
    "right_mult_angle",
    "right_mult_norm_sq",
]

# Inverse-trig arguments further out of domain than this indicate bad input,
# not rounding, and raise instead of clamping.
ARG_HARD_LIMIT = 1e-6
_DEGENERATE_TOL = 1e-12


@dataclass
class ClampStats:
    """Running record of how far arccos/arccosh arguments were clamped."""

    activations: int = 0
    max_excess: float = 0.0

    def record(self, excess: float) -> None:
        self.activations += 1
        if excess > self.max_excess:
            self.max_excess = excess

    def reset(self) -> None:
        self.activations = 0
        self.max_excess = 0.0


#: Module-wide clamp log; tests reset it and assert max_excess stays tiny.
clamp_stats = ClampStats()


def _checked_arccos(x: float) -> float:
    excess = abs(x) - 1.0
    if excess > ARG_HARD_LIMIT:
        raise InvariantViolationError(
            f"arccos argument {x!r} out of domain by {excess:.3e}"
        )
    if excess > 0.0:
        clamp_stats.record(excess)
        x = 1.0 if x > 0 else -1.0
    return math.acos(x)


def _checked_arccosh(x: float) -> float:
    excess = 1.0 - x
    if excess > ARG_HARD_LIMIT:
        raise InvariantViolationError(
            f"arccosh argument {x!r} out of domain by {excess:.3e}"
        )
    if excess > 0.0:
        clamp_stats.record(excess)
        return 0.0
    return math.acosh(x)


def minkowski_matrix(n: int) -> np.ndarray:
    """J = diag(I_n, -1) on R^{n+1}."""
    J = np.eye(n + 1)
    J[n, n] = -1.0
    return J


@dataclass(frozen=True)
class LorentzVector:
    """A vector of R^{n+1} carrying the form ``<x,y> = x^t J y``."""

    coords: np.ndarray

    def __post_init__(self):
        c = np.asarray(self.coords, dtype=float)
        if c.ndim != 1 or c.size < 3:
            raise UsageError("LorentzVector needs a flat vector of length n+1 >= 3")
        object.__setattr__(self, "coords", c)

    @property
    def n(self) -> int:
        return self.coords.size - 1

    @property
    def spatial(self) -> np.ndarray:
        """First n coordinates (the part entering base-point angles)."""
        return self.coords[:-1]


class HyperboloidPoint(LorentzVector):
    """LorentzVector constrained to the upper sheet ``<x,x> = -1, x_{n+1}>0``."""

    def __post_init__(self):
        super().__post_init__()
        q = minkowski_inner(self, self)
        if abs(q + 1.0) > 1e-9:
            raise InvariantViolationError(
                f"point off the hyperboloid: <x,x> = {q!r}"
            )
        if self.coords[-1] <= 0.0:
            raise InvariantViolationError("point on the lower sheet (x_{n+1} <= 0)")


def base_point(n: int) -> HyperboloidPoint:
    """The orbit origin e_{n+1}."""
    c = np.zeros(n + 1)
    c[n] = 1.0
    return HyperboloidPoint(c)


def north_reference(n: int) -> HyperboloidPoint:
    """The reference point (1, 0, ..., 0, sqrt(2)) used for degenerate angles."""
    c = np.zeros(n + 1)
    c[0] = 1.0
    c[n] = math.sqrt(2.0)
    return HyperboloidPoint(c)


class AngleValue(float):
    """An unsigned angle in radians, constrained to [0, pi]."""

    def __new__(cls, radians: float) -> "AngleValue":
        r = float(radians)
        if not (-1e-12 <= r <= math.pi + 1e-12):
            raise InvariantViolationError(f"angle {r!r} outside [0, pi]")
        return super().__new__(cls, min(max(r, 0.0), math.pi))

    @property
    def radians(self) -> float:
        return float(self)


VectorLike = Union[LorentzVector, Sequence[float], np.ndarray]


def _coords(x: VectorLike) -> np.ndarray:
    if isinstance(x, LorentzVector):
        return x.coords
    return np.asarray(x, dtype=float)


def minkowski_inner(x: VectorLike, y: VectorLike) -> float:
    """<x,y> = sum_{i<=n} x_i y_i - x_{n+1} y_{n+1}."""
    cx, cy = _coords(x), _coords(y)
    if cx.shape != cy.shape:
        raise UsageError(f"dimension mismatch: {cx.shape} vs {cy.shape}")
    return float(np.dot(cx[:-1], cy[:-1]) - cx[-1] * cy[-1])


def hyperbolic_distance(x: VectorLike, y: VectorLike) -> float:
    """Distance on the hyperboloid, via cosh d(x,y) = -<x,y>."""
    c = -minkowski_inner(x, y)
    return _checked_arccosh(c)


@dataclass(frozen=True)
class GroupElement:
    """An (n+1)x(n+1) matrix preserving J, in the identity component.

    The Cartan parameter ``t = arccosh(matrix[n,n])`` is computed and cached at
    construction.  Validation tolerances scale with the square of the matrix
    magnitude: the defining identities are quadratic in the entries, so the
    representable accuracy of a translation by t degrades like cosh(t)^2.
    """

    matrix: np.ndarray
    t: float = field(init=False)

    def __post_init__(self):
        m = np.asarray(self.matrix, dtype=float)
        if m.ndim != 2 or m.shape[0] != m.shape[1] or m.shape[0] < 3:
            raise UsageError("GroupElement needs a square matrix of size n+1 >= 3")
        n = m.shape[0] - 1
        scale = max(1.0, float(m[n, n]) ** 2)
        J = minkowski_matrix(n)
        form_err = float(np.abs(m.T @ J @ m - J).max())
        if form_err > 1e-9 * scale:
            raise InvariantViolationError(
                f"matrix does not preserve the form (max residual {form_err:.3e})"
            )
        det_err = abs(float(np.linalg.det(m)) - 1.0)
        if det_err > 1e-9 * scale:
            raise InvariantViolationError(f"det(g) != 1 (residual {det_err:.3e})")
        if m[n, n] < 1.0 - 1e-12:
            raise InvariantViolationError(
                f"corner entry {m[n, n]!r} < 1: not in the identity component"
            )
        object.__setattr__(self, "matrix", m)
        object.__setattr__(self, "t", _checked_arccosh(max(float(m[n, n]), 1.0)))

    @property
    def n(self) -> int:
        return self.matrix.shape[0] - 1

    def apply(self, x: VectorLike) -> HyperboloidPoint:
        return HyperboloidPoint(self.matrix @ _coords(x))

    def orbit_point(self) -> HyperboloidPoint:
        """g e_{n+1}: the last column of the matrix."""
        return HyperboloidPoint(self.matrix[:, -1].copy())

    def inverse_orbit_point(self) -> HyperboloidPoint:
        """g^{-1} e_{n+1} without inverting: g^{-1} = J g^t J."""
        c = self.matrix[-1, :].copy()
        c[:-1] *= -1.0
        return HyperboloidPoint(c)

    def __matmul__(self, other: "GroupElement") -> "GroupElement":
        return GroupElement(self.matrix @ other.matrix)


def group_norm_sq(g: GroupElement) -> float:
    """|g|^2 = 2 cosh(d(g e_{n+1}, e_{n+1})) = twice the corner entry."""
    return 2.0 * float(g.matrix[-1, -1])


def cartan_t(g: GroupElement) -> float:
    """Cartan parameter t(g) = arccosh of the corner entry (cached)."""
    if g.matrix[-1, -1] < 1.0 - 1e-9:
        raise InvariantViolationError("corner entry below 1")
    return g.t


def make_translation(t: float, n: int) -> GroupElement:
    """The one-parameter translation a_t along the geodesic through e_{n+1}.

    cosh t and sinh t sit in the (1,1), (1,n+1), (n+1,1), (n+1,n+1) slots of
    the matrix (1-based), with an identity block in between; a_s a_t = a_{s+t}.
    """
    if n < 2:
        raise UsageError("dimension n must be >= 2")
    m = np.eye(n + 1)
    ch, sh = math.cosh(t), math.sinh(t)
    m[0, 0] = m[n, n] = ch
    m[0, n] = m[n, 0] = sh
    return GroupElement(m)


def make_rotation(theta: float, n: int, axes: tuple[int, int] = (0, 1)) -> GroupElement:
    """A rotation by theta in a coordinate plane of the first n axes.

    These fix the base point; products of them generate the full stabilizer.
    """
    i, j = axes
    if not (0 <= i < j < n):
        raise UsageError(f"rotation plane {axes!r} must lie in the first {n} axes")
    m = np.eye(n + 1)
    c, s = math.cos(theta), math.sin(theta)
    m[i, i] = m[j, j] = c
    m[i, j] = s
    m[j, i] = -s
    return GroupElement(m)


def _spatial_unit(x: VectorLike, what: str) -> np.ndarray:
    u = _coords(x)[:-1]
    norm = float(np.linalg.norm(u))
    if norm <= _DEGENERATE_TOL:
        raise DegenerateInputError(
            f"{what} coincides with the base point; its direction is undefined"
        )
    return u / norm


def angle_at_base(x: VectorLike, y: VectorLike) -> AngleValue:
    """Unsigned angle at e_{n+1} between the geodesics toward x and y.

    Equals the Euclidean angle between the truncated coordinate vectors.
    Raises DegenerateInputError when either point is (numerically) the base
    point; see angle_at_base_total for the conventional completion.
    """
    u = _spatial_unit(x, "first point")
    v = _spatial_unit(y, "second point")
    return AngleValue(_checked_arccos(float(np.dot(u, v))))


def angle_at_base_total(x: VectorLike, y: VectorLike) -> AngleValue:
    """angle_at_base, substituting the reference point N for base-point inputs.

    The substitution is a convention, not geometry: the angle at the vertex of
    a zero-length geodesic is arbitrary.  Statistics code never relies on it;
    it exists for callers that need a total function.
    """
    cx, cy = _coords(x), _coords(y)
    n = cx.size - 1
    if float(np.linalg.norm(cx[:-1])) <= _DEGENERATE_TOL:
        cx = north_reference(n).coords
    if float(np.linalg.norm(cy[:-1])) <= _DEGENERATE_TOL:
        cy = north_reference(n).coords
    return angle_at_base(cx, cy)


def theta_of(g: GroupElement) -> AngleValue:
    """Polar angle of the orbit point: arccos(g[0,n] / sinh t(g)).

    Equals the base angle between g e_{n+1} and the reference point N.
    """
    if g.t <= _DEGENERATE_TOL:
        raise DegenerateInputError("theta undefined for stabilizer elements (t ~ 0)")
    return AngleValue(_checked_arccos(float(g.matrix[0, -1]) / math.sinh(g.t)))


def _relative_cos_v(g: GroupElement, M: GroupElement) -> float:
    """cos v with v = pi - angle(g^{-1} e_{n+1}, M e_{n+1}).

    When either element stabilizes the base point the angle is taken with the
    reference-point convention (it is then multiplied by sinh(0) = 0 anyway).
    """
    a = g.inverse_orbit_point().coords
    b = M.orbit_point().coords
    n = a.size - 1
    ref = north_reference(n).coords
    ua = a[:-1] if np.linalg.norm(a[:-1]) > _DEGENERATE_TOL else ref[:-1]
    ub = b[:-1] if np.linalg.norm(b[:-1]) > _DEGENERATE_TOL else ref[:-1]
    c = float(np.dot(ua, ub) / (np.linalg.norm(ua) * np.linalg.norm(ub)))
    return -min(1.0, max(-1.0, c))


def right_mult_norm_sq(g: GroupElement, M: GroupElement) -> float:
    """|gM|^2 = 2(cosh t(g) cosh t(M) + cos v sinh t(g) sinh t(M)).

    Here v = pi - angle(g^{-1}, M); agrees with the corner entry of the
    matrix product to relative precision.
    """
    cv = _relative_cos_v(g, M)
    tg, tm = g.t, M.t
    return 2.0 * (math.cosh(tg) * math.cosh(tm) + cv * math.sinh(tg) * math.sinh(tm))


def right_mult_angle(g: GroupElement, M: GroupElement) -> AngleValue:
    """Base angle between gM e_{n+1} and g e_{n+1}, assuming t(g) > t(M).

    tan of the angle is sin v sinh t(M) over
    cosh t(M) sinh t(g) + cos v cosh t(g) sinh t(M); under the hypothesis the
    denominator is positive, so the angle lies in [0, pi/2).
    """
    if g.t <= M.t:
        raise PreconditionError(
            f"right_mult_angle requires t(g) > t(M); got {g.t!r} <= {M.t!r}"
        )
    cv = _relative_cos_v(g, M)
    sv = math.sqrt(max(0.0, 1.0 - cv * cv))
    tg, tm = g.t, M.t
    num = sv * math.sinh(tm)
    den = math.cosh(tm) * math.sinh(tg) + cv * math.cosh(tg) * math.sinh(tm)
    return AngleValue(math.atan2(num, den))
