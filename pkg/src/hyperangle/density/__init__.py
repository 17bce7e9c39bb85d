"""Theory engine: limiting pair-correlation density and related integrals."""

from .kernel import (
    DensityContext,
    DistanceSpectrum,
    IntervalUnion,
    QuadratureSettings,
    abc_of,
    ball_volume,
    big_F,
    f_xi,
    f_xi_quadrature,
    F_cumulative,
    F_cumulative_closed_n2,
    F_cumulative_quadrature,
    interval_set,
    normalization_constant,
    sphere_volume,
)
from .sums import (
    g2_theoretical,
    g2_zero_limit_n2,
    r2_theoretical,
    spectrum_tail_estimate,
)
from .volumes import (
    integral_f_over_G,
    vol_ball,
    vol_ball_asymptotic,
    vol_RM_error_scale,
    vol_RM_main,
    vol_RM_numeric,
)
from .recover import kink_locations, recover_length_spectrum

__all__ = [
    "DensityContext",
    "DistanceSpectrum",
    "IntervalUnion",
    "QuadratureSettings",
    "abc_of",
    "ball_volume",
    "big_F",
    "f_xi",
    "f_xi_quadrature",
    "F_cumulative",
    "F_cumulative_closed_n2",
    "F_cumulative_quadrature",
    "g2_theoretical",
    "g2_zero_limit_n2",
    "integral_f_over_G",
    "interval_set",
    "kink_locations",
    "normalization_constant",
    "r2_theoretical",
    "recover_length_spectrum",
    "sphere_volume",
    "spectrum_tail_estimate",
    "vol_ball",
    "vol_ball_asymptotic",
    "vol_RM_error_scale",
    "vol_RM_main",
    "vol_RM_numeric",
]
