"""The radial kernel f_xi(l), its cumulative integral, and their contexts.

For a point at hyperbolic distance l from the origin write

    A = cosh l,   B = sinh l,   C = 2 sinh(l/2),

and for 0 < xi <= B

    alpha       = sqrt(1 - xi^2/B^2),
    lambda_pm   = (-xi^2 A/B +- alpha) / (xi^2 + 1).

The kernel is

    f_xi(l) = xi^{-n} * integral over I(xi,l) of
              (1 - y^2)^{n-2} (y + coth l)^{-(n-1)} dy,

where I(xi,l) is [-1,lambda_-) u (alpha,1] for xi <= C, gains the middle
interval (lambda_+, -alpha) for C < xi <= B, and is all of [-1,1] for B < xi.
For n = 2 and n = 3 the integral has elementary closed forms, used as the
default evaluation path; adaptive quadrature covers general n and doubles as
an oracle for the closed forms.

The cumulative F(xi, l) = integral of f_zeta(l) over zeta in (0, xi] is
computed from an equivalent two-integral form in y alone,

    F = 1/(n-1) * [ int_{I1} (1-y^2)^{(n-3)/2} (1 - L(y)^{n-1}) dy
                  + int_{I2} (1-y^2)^{(n-3)/2} ((A+By)^{-(n-1)} - L(y)^{n-1}) dy ],

with L(y) = B sqrt(1-y^2) / (xi (A+By)) and I1/I2 explicit interval unions;
its xi-derivative is f_xi(l).  For n = 2 the zeta-antiderivative is also
elementary and is used on hot paths.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np
from scipy.integrate import quad

from ..errors import InvariantViolationError, NumericalError, UsageError

__all__ = [
    "DensityContext",
    "DistanceSpectrum",
    "IntervalUnion",
    "QuadratureSettings",
    "abc_of",
    "ball_volume",
    "big_F",
    "f_xi",
    "f_xi_closed_vec",
    "f_xi_quadrature",
    "F_cumulative",
    "F_cumulative_closed_n2",
    "F_cumulative_quadrature",
    "interval_set",
    "normalization_constant",
    "sphere_volume",
]


def sphere_volume(j: int) -> float:
    """omega_j: the (j-1)-dimensional volume of the unit sphere in R^j."""
    if j < 1:
        raise UsageError("sphere dimension must be >= 1")
    return 2.0 * math.pi ** (j / 2.0) / math.gamma(j / 2.0)


def ball_volume(j: int) -> float:
    """V_j = omega_j / j: volume of the unit ball in R^j."""
    return sphere_volume(j) / j


def normalization_constant(n: int, v_eff: float) -> float:
    """k = ((n-1) V_eff / V_{n-1})^{1/(n-1)}, the angle normalization."""
    if n < 2:
        raise UsageError("dimension n must be >= 2")
    if v_eff <= 0:
        raise UsageError("effective covolume must be positive")
    return ((n - 1) * v_eff / ball_volume(n - 1)) ** (1.0 / (n - 1))


@dataclass(frozen=True)
class QuadratureSettings:
    """Tolerances for the adaptive quadratures in this package."""

    abs_tol: float = 1e-12
    rel_tol: float = 1e-10
    max_subdiv: int = 200


DEFAULT_QUAD = QuadratureSettings()


@dataclass(frozen=True)
class DensityContext:
    """Everything needed to evaluate the theoretical density: (n, V_eff, k).

    k is derived from V_eff; passing an explicit k that disagrees with the
    defining formula by more than 1e-12 relative is rejected.
    """

    n: int
    v_eff: float
    k: float = None  # type: ignore[assignment]
    quad: QuadratureSettings = DEFAULT_QUAD

    def __post_init__(self):
        if self.n < 2:
            raise UsageError("dimension n must be >= 2")
        if self.v_eff <= 0:
            raise UsageError("effective covolume must be positive")
        k_ref = normalization_constant(self.n, self.v_eff)
        if self.k is None:
            object.__setattr__(self, "k", k_ref)
        elif abs(self.k - k_ref) > 1e-12 * k_ref:
            raise InvariantViolationError(
                f"k={self.k!r} inconsistent with V_eff (expected {k_ref!r})"
            )


@dataclass(frozen=True)
class IntervalUnion:
    """Sorted disjoint intervals inside [-1, 1]."""

    intervals: tuple[tuple[float, float], ...]

    def __post_init__(self):
        prev = -1.0 - 1e-12
        total = 0.0
        for a, b in self.intervals:
            if a < -1.0 - 1e-12 or b > 1.0 + 1e-12:
                raise InvariantViolationError(f"interval ({a},{b}) leaves [-1,1]")
            if a < prev - 1e-12 or b < a - 1e-12:
                raise InvariantViolationError("intervals overlap or are unsorted")
            total += b - a
            prev = b
        if total > 2.0 + 1e-9:
            raise InvariantViolationError("total interval length exceeds 2")

    @property
    def total_length(self) -> float:
        return sum(b - a for a, b in self.intervals)


@dataclass(frozen=True)
class DistanceSpectrum:
    """Sorted distinct distances from the base point, with multiplicities."""

    ts: np.ndarray
    multiplicities: np.ndarray
    source: str = ""

    def __post_init__(self):
        ts = np.asarray(self.ts, dtype=float)
        ms = np.asarray(self.multiplicities, dtype=np.int64)
        if ts.shape != ms.shape or ts.ndim != 1:
            raise UsageError("ts and multiplicities must be 1-d and aligned")
        if ts.size:
            if ts[0] <= 1e-9:
                raise InvariantViolationError(
                    "spectrum entries must have t > 1e-9 (base point excluded)"
                )
            if np.any(np.diff(ts) <= 0):
                raise InvariantViolationError("spectrum must be strictly increasing")
            if np.any(ms < 1):
                raise InvariantViolationError("multiplicities must be >= 1")
        object.__setattr__(self, "ts", ts)
        object.__setattr__(self, "multiplicities", ms)

    @classmethod
    def from_entries(
        cls, entries: Iterable[tuple[float, int]], source: str = ""
    ) -> "DistanceSpectrum":
        ent = sorted(entries)
        ts = np.array([t for t, _ in ent], dtype=float)
        ms = np.array([m for _, m in ent], dtype=np.int64)
        return cls(ts, ms, source)

    def __len__(self) -> int:
        return int(self.ts.size)

    def __iter__(self):
        return iter(zip(self.ts.tolist(), self.multiplicities.tolist()))

    def truncate_norm(self, T: float) -> "DistanceSpectrum":
        """Entries with group norm |M| = sqrt(2 cosh t) at most T.

        The comparison carries a relative slack of a few ulps so that a
        boundary entry survives the sqrt/square round trip.
        """
        keep = 2.0 * np.cosh(self.ts) <= T * T * (1.0 + 1e-12)
        return DistanceSpectrum(self.ts[keep], self.multiplicities[keep], self.source)

    @property
    def min_norm(self) -> float:
        if not len(self):
            raise UsageError("empty spectrum has no smallest entry")
        return math.sqrt(2.0 * math.cosh(float(self.ts[0])))


def abc_of(l: float) -> tuple[float, float, float]:
    """(A, B, C) = (cosh l, sinh l, 2 sinh(l/2)); C^2 = 2(A - 1)."""
    if l <= 0:
        raise UsageError("l must be positive")
    return math.cosh(l), math.sinh(l), 2.0 * math.sinh(l / 2.0)


def _alpha_lambdas(xi: float, l: float) -> tuple[float, float, float]:
    """(alpha, lambda_-, lambda_+) for xi <= B, with a cancellation-free
    lambda_-: 1 + lambda_- = xi^2 / ((1+alpha) B^2 e^l (A + B alpha))."""
    A, B, _ = abc_of(l)
    alpha = math.sqrt(max(0.0, (B - xi) * (B + xi))) / B
    lp = (-xi * xi * A / B + alpha) / (xi * xi + 1.0)
    lm = -1.0 + xi * xi / ((1.0 + alpha) * B * B * math.exp(l) * (A + B * alpha))
    return alpha, lm, lp


def interval_set(xi: float, l: float) -> IntervalUnion:
    """The set I(xi, l) over which the kernel integrand is integrated."""
    if xi <= 0:
        raise UsageError("xi must be positive")
    A, B, C = abc_of(l)
    if B < xi:
        return IntervalUnion(((-1.0, 1.0),))
    alpha, lm, lp = _alpha_lambdas(xi, l)
    if xi <= C:
        return IntervalUnion(((-1.0, lm), (alpha, 1.0)))
    # middle case: the four endpoints must be ordered lm < lp <= -alpha <= alpha
    # (equalities only on the case boundaries xi = C, xi = B)
    if not (lm < lp + 1e-12 and lp <= -alpha + 1e-12):
        raise InvariantViolationError(
            f"endpoint ordering violated at xi={xi!r}, l={l!r}"
        )
    lp = min(lp, -alpha)
    return IntervalUnion(((-1.0, lm), (lp, -alpha), (alpha, 1.0)))


# --- closed forms (n = 2, 3), vectorized over l ------------------------------

def _coth_l_times_l_minus_1(l: np.ndarray) -> np.ndarray:
    # l*coth(l) - 1 without cancellation at small l
    small = l < 1e-3
    safe = np.where(small, 1.0, l)
    direct = safe / np.tanh(safe) - 1.0
    series = l * l / 3.0 - l ** 4 / 45.0
    return np.where(small, series, direct)


def f_xi_closed_vec(n: int, xi: float, ls: np.ndarray) -> np.ndarray:
    """Closed-form f_xi(l) for n in {2, 3}, vectorized over l > 0.

    Uses log1p-based rearrangements so the xi <= C branch stays accurate when
    l is large (the naive form loses all digits to cancellation there).
    """
    if n not in (2, 3):
        raise UsageError("closed forms exist only for n = 2 and n = 3")
    if xi <= 0:
        raise UsageError("xi must be positive")
    l = np.asarray(ls, dtype=float)
    if np.any(l <= 0):
        raise UsageError("l must be positive")
    A = np.cosh(l)
    B = np.sinh(l)
    C = 2.0 * np.sinh(l / 2.0)
    below = xi <= B  # branches 1 and 2 need alpha
    Bc = np.where(below, B, 2.0 * xi)  # clamp to keep sqrt in-domain off-branch
    alpha = np.sqrt(np.maximum((Bc - xi) * (Bc + xi), 0.0)) / Bc
    # beta = xi^2 e^{-l} / (B (1+alpha));  l - log(A + B alpha) = -log1p(-beta)
    # (beta < 1/2 wherever the branch is selected; clamp the unselected lanes)
    beta = xi * xi * np.exp(-l) / (Bc * (1.0 + alpha))
    m1 = -np.log1p(-np.minimum(beta, 0.5))
    if n == 2:
        b1 = (2.0 / xi ** 2) * m1
        b2 = (2.0 / xi ** 2) * (np.log1p(xi * xi) - l + 2.0 * m1)
        b3 = (2.0 / xi ** 2) * l
    else:
        cothl = A / B
        b1 = (4.0 / xi ** 3) * (
            cothl * m1
            + (xi * xi * np.exp(-l) - xi * xi * (xi * xi + 2.0) / (Bc * (1.0 + alpha)))
            / (2.0 * B * (xi * xi + 1.0))
        )
        b2 = (4.0 / xi ** 3) * (
            cothl * (np.log1p(xi * xi) - l + 2.0 * m1)
            + (xi * xi + 2.0) * alpha / (xi * xi + 1.0)
            - 1.0
        )
        b3 = (4.0 / xi ** 3) * _coth_l_times_l_minus_1(l)
    out = np.where(xi <= C, b1, np.where(below, b2, b3))
    # the kernel is nonnegative; clip the sub-epsilon cancellation noise the
    # n = 3 branches can leave at (large l, xi << B), which is absolutely
    # tiny but may carry the wrong sign
    return np.maximum(out, 0.0)


# --- general-n quadrature -----------------------------------------------------

def _quad_checked(func, a: float, b: float, quad_cfg: QuadratureSettings,
                  points: Sequence[float] | None = None) -> float:
    """scipy quad with the context tolerances; raises NumericalError when the
    achieved estimate is far from the request."""
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        out = quad(
            func, a, b,
            epsabs=quad_cfg.abs_tol, epsrel=quad_cfg.rel_tol,
            limit=quad_cfg.max_subdiv, points=points, full_output=1,
        )
    value, abserr = out[0], out[1]
    tol = 100.0 * max(quad_cfg.abs_tol, quad_cfg.rel_tol * abs(value), 1e-15)
    if len(out) > 3 and abserr > tol:
        raise NumericalError(
            f"quadrature failed on [{a}, {b}]: {out[3]}", achieved=abserr
        )
    return value


def f_xi_quadrature(xi: float, l: float, ctx: DensityContext) -> float:
    """f_xi(l) by adaptive quadrature over each interval of interval_set.

    Retained for every n as the oracle for the closed forms.  Substituting
    u = 1 + y and then w = log(u + delta) with delta = coth(l) - 1 turns the
    integrand into (u(2-u))^{n-2} e^{-(n-2)w}, which is smooth and, unlike
    the y-space form, resolvable in doubles even on the sliver interval next
    to y = -1 that appears for large l (its width shrinks like xi^2 B^{-4}
    while the integrand grows like a truncated 1/u there).
    """
    if xi <= 0 or l <= 0:
        raise UsageError("f_xi requires xi > 0 and l > 0")
    n = ctx.n
    delta = 2.0 / math.expm1(2.0 * l)  # coth l - 1
    log_delta = math.log(delta)

    def integrand_w(w: float) -> float:
        u = delta * math.expm1(w - log_delta)
        core = max(0.0, u * (2.0 - u))
        cpow = core ** (n - 2) if n > 2 else 1.0
        return cpow * math.exp(-(n - 2) * w)

    A, B, C = abc_of(l)
    if B < xi:
        spans = [(0.0, 2.0)]
    else:
        alpha, _, lp = _alpha_lambdas(xi, l)
        s_minus = xi * xi / ((1.0 + alpha) * B * B * math.exp(l) * (A + B * alpha))
        if xi <= C:
            spans = [(0.0, s_minus), (1.0 + alpha, 2.0)]
        else:
            spans = [(0.0, s_minus), (1.0 + lp, 1.0 - alpha), (1.0 + alpha, 2.0)]

    total = 0.0
    for u_lo, u_hi in spans:
        if u_hi - u_lo <= 0.0:
            continue
        w_lo = log_delta if u_lo == 0.0 else math.log(u_lo + delta)
        w_hi = math.log(u_hi + delta)
        if w_hi - w_lo < 1e-15:
            continue
        total += _quad_checked(integrand_w, w_lo, w_hi, ctx.quad)
    return total / xi ** n


def f_xi(xi: float, l: float, ctx: DensityContext) -> float:
    """The kernel f_xi(l): closed form for n in {2,3}, quadrature otherwise.

    The n = 3 closed form subtracts terms of size ~ xi^2 e^{-2l} to produce a
    value of size ~ xi^4 e^{-4l}, so for large l and small xi it loses
    relative accuracy; those evaluations reroute to the quadrature, whose
    w-space integrand is positive and scale-free.
    """
    if xi <= 0 or l <= 0:
        raise UsageError("f_xi requires xi > 0 and l > 0")
    if ctx.n == 2:
        return float(f_xi_closed_vec(2, xi, np.array([l]))[0])
    if ctx.n == 3:
        cancellation = 2.0 * l - math.log(xi * xi * (1.0 + xi * xi))
        if xi > math.sinh(l) or cancellation <= 11.5:
            return float(f_xi_closed_vec(3, xi, np.array([l]))[0])
    return f_xi_quadrature(xi, l, ctx)


# --- cumulative integral ------------------------------------------------------

def _I1_I2(xi: float, l: float) -> tuple[list, list]:
    A, B, C = abc_of(l)
    yb = -math.tanh(l / 2.0)  # (1 - A)/B
    if B < xi:
        return [(-1.0, yb)], [(yb, 1.0)]
    alpha, lm, lp = _alpha_lambdas(xi, l)
    if xi <= C:
        return [(-1.0, lm)], [(alpha, 1.0)]
    return [(-1.0, lm), (min(lp, yb), yb)], [(yb, -alpha), (alpha, 1.0)]


def F_cumulative_quadrature(xi: float, l: float, ctx: DensityContext) -> float:
    """F(xi, l) from the explicit two-integral form, quadrature in y only.

    The substitution y = sin(theta) removes the (1-y^2)^{(n-3)/2} endpoint
    singularity that appears for n = 2.
    """
    if xi <= 0 or l <= 0:
        raise UsageError("F_cumulative requires xi > 0 and l > 0")
    n = ctx.n
    A, B, _ = abc_of(l)
    I1, I2 = _I1_I2(xi, l)

    def outer_part(theta: float) -> float:
        # integrand over I1: inner x-interval is [L(y), 1]
        y = math.sin(theta)
        cy = math.cos(theta)
        L = B * cy / (xi * (A + B * y))
        return cy ** (n - 2) * max(0.0, 1.0 - L ** (n - 1)) / (n - 1)

    def inner_part(theta: float) -> float:
        # integrand over I2: inner x-interval is [L(y), (A+By)^{-1}]
        y = math.sin(theta)
        cy = math.cos(theta)
        denom = A + B * y
        L = B * cy / (xi * denom)
        return cy ** (n - 2) * max(0.0, denom ** (-(n - 1)) - L ** (n - 1)) / (n - 1)

    total = 0.0
    for spans, g in ((I1, outer_part), (I2, inner_part)):
        for a, b in spans:
            ta, tb = math.asin(max(-1.0, a)), math.asin(min(1.0, b))
            if tb - ta < 5e-17:
                continue
            total += _quad_checked(g, ta, tb, ctx.quad)
    return total


def F_cumulative_closed_n2(xi: float, l: float) -> float:
    """Elementary zeta-antiderivative of f for n = 2 (hot-path equivalent).

    Each branch of f_zeta(l) integrates in closed form; the pieces are chained
    across the branch points zeta = C and zeta = B.
    """
    if xi <= 0 or l <= 0:
        raise UsageError("F_cumulative requires xi > 0 and l > 0")
    A, B, C = abc_of(l)

    def m_branch1(z: float) -> float:
        alpha = math.sqrt(max(0.0, (B - z) * (B + z))) / B
        return -math.log1p(-z * z * math.exp(-l) / (B * (1.0 + alpha)))

    def G1(z: float) -> float:
        s = math.sqrt(max(0.0, (B - z) * (B + z)))
        return (
            -(2.0 / z) * m_branch1(z)
            + 2.0 * math.atan2(A * z, s)
            - 2.0 * math.atan(z)
        )

    def G2(z: float) -> float:
        s = math.sqrt(max(0.0, (B - z) * (B + z)))
        w = math.log1p(z * z) - l + 2.0 * m_branch1(z)
        return -(2.0 / z) * w + 4.0 * math.atan2(A * z, s)

    total = G1(min(xi, C))  # G1 vanishes at 0+
    if xi > C:
        total += G2(min(xi, B)) - G2(C)
    if xi > B:
        total += (-2.0 * l / xi) - (-2.0 * l / B)
    return total


def F_cumulative(xi: float, l: float, ctx: DensityContext) -> float:
    """Cumulative kernel integral F(xi, l) = int_0^xi f_zeta(l) dzeta.

    Dispatches to the elementary antiderivative for n = 2 (the two-integral
    quadrature remains available as F_cumulative_quadrature and is asserted
    equivalent in the test suite).
    """
    if ctx.n == 2:
        return F_cumulative_closed_n2(xi, l)
    return F_cumulative_quadrature(xi, l, ctx)


def big_F(xi: float, t: float, ctx: DensityContext) -> float:
    """Rescaled kernel F_xi(t) = ((n-1) omega_{n-1} k / omega_n) f_{xi k}(t)."""
    n = ctx.n
    pre = (n - 1) * sphere_volume(n - 1) * ctx.k / sphere_volume(n)
    return pre * f_xi(xi * ctx.k, t, ctx)


def kernel_prefactor(ctx: DensityContext) -> float:
    """(n-1) omega_{n-1} k / omega_n: the multiplier turning kernel sums into
    the pair-correlation density."""
    n = ctx.n
    return (n - 1) * sphere_volume(n - 1) * ctx.k / sphere_volume(n)
