"""Volumes of norm balls and of the pair-counting regions.

With the Haar normalization fixed by the polar integration formula

    int_G h dg = omega_n int_K int_0^inf int_K h(k1 a_t k2) sinh^{n-1} t dt,

the norm ball B_Q = {|g| <= Q} has

    vol(B_Q) = omega_n int_0^{arccosh(Q^2/2)} sinh^{n-1} t dt
             ~ omega_n Q^{2(n-1)} / (2^{n-1} (n-1)).

The pair-counting region for a displacement M with t(M) = t_M,

    R_M(Q, xi) = {g : |g| <= Q, |gM| <= Q, angle(g, gM) < 2 xi / Q^2},

has main-term volume omega_{n-1} Q^{2(n-1)} / 2^{n-1} * F(xi, t_M); the same
region is also integrated directly in polar coordinates (t, v) as a
cross-validation (vol_RM_numeric), where for each v the admissible t-range is
solved in closed form and the v-integral is done adaptively over the
segments on which the range is nonempty.
"""

from __future__ import annotations

import math

import numpy as np
from scipy.optimize import brentq

from ..errors import NumericalError, PreconditionError, UsageError
from .kernel import (
    DensityContext,
    F_cumulative,
    _quad_checked,
    f_xi_closed_vec,
    f_xi,
    sphere_volume,
)

__all__ = [
    "integral_f_over_G",
    "sinh_power_integral",
    "vol_ball",
    "vol_ball_asymptotic",
    "vol_RM_error_scale",
    "vol_RM_main",
    "vol_RM_numeric",
]

# Enforced ceiling on xi/Q^2 for the volume main term (the expansion regime).
XI_OVER_Q2_MAX = 0.01


def sinh_power_integral(m: int, t: float) -> float:
    """int_0^t sinh^m u du via the standard reduction formula."""
    if m < 0:
        raise UsageError("power must be nonnegative")
    if m == 0:
        return t
    if m == 1:
        return math.cosh(t) - 1.0
    return (
        math.sinh(t) ** (m - 1) * math.cosh(t) / m
        - (m - 1) / m * sinh_power_integral(m - 2, t)
    )


def vol_ball(Q: float, n: int) -> float:
    """Haar volume of the norm ball {|g| <= Q}; zero at the minimum Q = sqrt 2."""
    if n < 2:
        raise UsageError("dimension n must be >= 2")
    if Q * Q < 2.0:
        raise UsageError(f"norm balls need Q^2 >= 2; got Q={Q!r}")
    T = math.acosh(Q * Q / 2.0)
    return sphere_volume(n) * sinh_power_integral(n - 1, T)


def vol_ball_asymptotic(Q: float, n: int) -> float:
    """Leading term omega_n Q^{2(n-1)} / (2^{n-1} (n-1))."""
    return sphere_volume(n) * Q ** (2 * (n - 1)) / (2 ** (n - 1) * (n - 1))


def vol_RM_error_scale(Q: float, xi: float, t_M: float, n: int) -> float:
    """Shape of the main-term error, g(xi) |M|^{2(n-1)} Q^{2(n-1)^2/(n+1)}.

    The implied constant is unknown; this is reported as a scale only and is
    never added to values.  g(xi) = xi^{n-1} + xi^{-(n-1)}.
    """
    g = xi ** (n - 1) + xi ** (-(n - 1))
    norm_sq = 2.0 * math.cosh(t_M)
    return g * norm_sq ** (n - 1) * Q ** (2.0 * (n - 1) ** 2 / (n + 1))


def _check_volume_regime(Q: float, xi: float, t_M: float) -> None:
    if xi <= 0 or t_M <= 0:
        raise UsageError("xi and t_M must be positive")
    if xi / (Q * Q) >= XI_OVER_Q2_MAX:
        raise PreconditionError(
            f"xi/Q^2 = {xi / (Q * Q):.3g} too large for the volume expansion "
            f"(must be < {XI_OVER_Q2_MAX})"
        )


def vol_RM_main(Q: float, xi: float, t_M: float, ctx: DensityContext) -> float:
    """Main term omega_{n-1} Q^{2(n-1)} / 2^{n-1} * F(xi, t_M).

    The error scale is available separately via vol_RM_error_scale.
    """
    _check_volume_regime(Q, xi, t_M)
    n = ctx.n
    return (
        sphere_volume(n - 1)
        * Q ** (2 * (n - 1))
        / 2 ** (n - 1)
        * F_cumulative(xi, t_M, ctx)
    )


def vol_RM_numeric(Q: float, xi: float, t_M: float, ctx: DensityContext) -> float:
    """Direct polar-coordinate volume of R_M(Q, xi) (no proof-side truncation).

    In coordinates g = k1 a_t k^v m the region is cut out by

        2 cosh t <= Q^2,
        2 (A_M cosh t + B_M cos v sinh t) <= Q^2,
        B_M sin v < tan(2 xi/Q^2) (A_M sinh t + B_M cos v cosh t),

    the last line requiring a positive right factor (the angle formula's
    cosine must be positive for the angle to be below a small threshold).
    For fixed v both cuts are intervals in t:
    a cosh t + b sinh t = r cosh(t + phi) with r = sqrt(a^2-b^2),
    phi = artanh(b/a), so the inner integral of sinh^{n-1} is elementary.
    """
    _check_volume_regime(Q, xi, t_M)
    n = ctx.n
    A_M, B_M = math.cosh(t_M), math.sinh(t_M)
    T_Q = math.acosh(Q * Q / 2.0)
    c = math.tan(2.0 * xi / (Q * Q))

    def t_bounds(v: float) -> tuple[float, float]:
        y = math.cos(v)
        b = B_M * y
        r = math.sqrt(A_M * A_M - b * b)
        phi = math.atanh(b / A_M)
        arg = Q * Q / (2.0 * r)
        hi = min(T_Q, math.acosh(arg) - phi) if arg >= 1.0 else -math.inf
        lo = max(0.0, math.asinh(B_M * math.sin(v) / (c * r)) - phi)
        return lo, hi

    def width(v: float) -> float:
        lo, hi = t_bounds(v)
        return hi - lo

    def integrand(v: float) -> float:
        lo, hi = t_bounds(v)
        if hi <= lo:
            return 0.0
        sv = math.sin(v) ** (n - 2) if n > 2 else 1.0
        return sv * (sinh_power_integral(n - 1, hi) - sinh_power_integral(n - 1, lo))

    # The admissible v-set is a union of intervals (typically two slivers at
    # the ends); locate its boundaries before integrating each piece.
    grid = np.linspace(0.0, math.pi, 2001)
    w = np.array([width(v) for v in grid])
    cuts = [0.0]
    for i in range(grid.size - 1):
        if (w[i] > 0.0) != (w[i + 1] > 0.0):
            cuts.append(brentq(width, grid[i], grid[i + 1], xtol=1e-15))
    cuts.append(math.pi)

    total = 0.0
    for a, b in zip(cuts[:-1], cuts[1:]):
        if b - a < 1e-15 or width(0.5 * (a + b)) <= 0.0:
            continue
        total += _quad_checked(integrand, a, b, ctx.quad)
    if not math.isfinite(total):
        raise NumericalError("volume quadrature produced a non-finite result")
    return sphere_volume(n - 1) * total


def integral_f_over_G(
    xi: float, ctx: DensityContext, with_tail: bool = False
):
    """int_G f_xi(t(g)) dg = omega_n int_0^inf f_xi(l) sinh^{n-1} l dl.

    The integrand is smooth except at the branch points l with sinh l = xi
    and 2 sinh(l/2) = xi, so those split the quadrature; beyond the second
    the kernel envelope gives a geometric tail, and the cutoff L is chosen so
    the reported tail bound is negligible against the achieved value.

    Asymptotically the integral is omega_n xi^{n-2} / (n-1)^2.
    """
    if xi <= 0:
        raise UsageError("xi must be positive")
    n = ctx.n
    l1 = math.asinh(xi)
    l2 = 2.0 * math.asinh(xi / 2.0)

    from .sums import _kappa2  # late import: sums depends on this module's sibling

    kappa = _kappa2(n)

    # tail of omega_n * kappa xi^{n-2} int_L^inf sinh^{-(n-1)} below 1e-12 rel
    main_scale = sphere_volume(n) * max(xi ** (n - 2), 1.0) / (n - 1) ** 2
    L = l2 + 1.0
    while True:
        shrink = 1.0 - math.exp(-2.0 * L)
        tail = (
            sphere_volume(n)
            * kappa
            * xi ** (n - 2)
            * (2.0 / shrink) ** (n - 1)
            * math.exp(-(n - 1) * L)
            / (n - 1)
        )
        if tail <= 1e-12 * main_scale or L > l2 + 200.0:
            break
        L += 5.0

    if ctx.n in (2, 3):
        def integrand(l: float) -> float:
            return float(f_xi_closed_vec(n, xi, np.array([l]))[0]) * math.sinh(l) ** (
                n - 1
            )
    else:
        def integrand(l: float) -> float:
            return f_xi(xi, l, ctx) * math.sinh(l) ** (n - 1)

    total = 0.0
    pieces = [(1e-12, l1), (l1, l2), (l2, L)]
    for a, b in pieces:
        if b - a < 1e-12:
            continue
        total += _quad_checked(integrand, a, b, ctx.quad)
    value = sphere_volume(n) * total
    return (value, tail) if with_tail else value
