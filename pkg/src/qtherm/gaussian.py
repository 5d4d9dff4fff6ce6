"""Analytic bilinear model of the machine: exchange coupling g(a_h^dag a_c + h.c.).

With a bilinear coupling the steady state is Gaussian and fully determined
by the quadrature second moments.  This module solves the closed linear
system obeyed by the ten independent second moments, and provides the
closed-form mean current, current variance, temperature sensitivity, and
the dimensionless precision prefactors of the current measurement (alpha)
and of the optimal measurement (beta).

Quadrature convention: x = (a + a^dag)/sqrt(2), p = -i(a - a^dag)/sqrt(2),
covariance ordering (x_c, x_h, p_c, p_h), Gamma_ij = <r_i r_j + r_j r_i>/2.

Note on closed forms: the raw same-mode moments <x p> carry a commutator
part i/2 which the symmetrized covariance excludes.  The second-moment
linear system is solved directly; its solution has (kappa_c kappa_h + 4g^2)
denominators throughout, and attaches kappa_h to the cold-mode variances
(and vice versa).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import NumericalError
from .units import (BathState, MachineParams, MeasurementNoise, CURRENT_PA,
                    MILLIKELVIN)

#: raw second moments solved by the linear system, in order
MOMENT_LABELS = (
    "xc_xc", "xc_pc", "pc_pc", "xh_xh", "xh_ph", "ph_ph",
    "xc_xh", "xc_ph", "pc_xh", "pc_ph",
)

#: quadrature ordering of the 4x4 covariance matrix
QUADRATURE_ORDER = ("x_c", "x_h", "p_c", "p_h")


@dataclass(frozen=True)
class GaussianParams:
    """Bilinear-model parameters in natural units."""

    g: float
    kappa_c: float
    kappa_h: float
    omega_c: float
    omega_h: float

    def __post_init__(self):
        for name in ("kappa_c", "kappa_h", "omega_c", "omega_h"):
            if getattr(self, name) <= 0.0:
                raise ValueError(f"{name} must be positive")
        # g = 0 is the well-defined decoupled limit (thermal product state)
        if self.g < 0.0:
            raise ValueError("g must be non-negative")

    @classmethod
    def from_machine(cls, params: MachineParams,
                     g_ratio: float = 0.125) -> "GaussianParams":
        """Effective coupling as a fixed fraction of the junction energy."""
        return cls(g=g_ratio * params.e_j, kappa_c=params.kappa_c,
                   kappa_h=params.kappa_h, omega_c=params.omega_c,
                   omega_h=params.omega_h)


def moment_system(gp: GaussianParams, baths: BathState):
    """Generator (A, b) of the second-moment equations, dm/dt = A m + b.

    The ten raw moments are ordered as in MOMENT_LABELS; b is complex
    because the same-mode xp moments relax onto their commutator part i/2.
    """
    g, kc, kh = gp.g, gp.kappa_c, gp.kappa_h
    km = 0.5 * (kc + kh)
    a = np.zeros((10, 10))
    b = np.zeros(10, dtype=complex)
    # d<xc^2>   =  2g<xc ph> - kc<xc^2> + kc(nc + 1/2)
    a[0, 0] = -kc
    a[0, 7] = 2.0 * g
    b[0] = kc * (baths.n_c + 0.5)
    # d<xc pc>  = -g(<xc xh> - <pc ph>) - kc<xc pc> + i kc/2
    a[1, 1] = -kc
    a[1, 6] = -g
    a[1, 9] = g
    b[1] = 0.5j * kc
    # d<pc^2>   = -2g<pc xh> - kc<pc^2> + kc(nc + 1/2)
    a[2, 2] = -kc
    a[2, 8] = -2.0 * g
    b[2] = kc * (baths.n_c + 0.5)
    # d<xh^2>   =  2g<pc xh> - kh<xh^2> + kh(nh + 1/2)
    a[3, 3] = -kh
    a[3, 8] = 2.0 * g
    b[3] = kh * (baths.n_h + 0.5)
    # d<xh ph>  = -g(<xc xh> - <pc ph>) - kh<xh ph> + i kh/2
    a[4, 4] = -kh
    a[4, 6] = -g
    a[4, 9] = g
    b[4] = 0.5j * kh
    # d<ph^2>   = -2g<xc ph> - kh<ph^2> + kh(nh + 1/2)
    a[5, 5] = -kh
    a[5, 7] = -2.0 * g
    b[5] = kh * (baths.n_h + 0.5)
    # d<xc xh>  =  g(<xc pc> + <xh ph> - i) - km<xc xh>
    a[6, 1] = g
    a[6, 4] = g
    a[6, 6] = -km
    b[6] = -1.0j * g
    # d<xc ph>  = -g(<xc^2> - <ph^2>) - km<xc ph>
    a[7, 0] = -g
    a[7, 5] = g
    a[7, 7] = -km
    # d<pc xh>  = -g(<xh^2> - <pc^2>) - km<pc xh>
    a[8, 2] = g
    a[8, 3] = -g
    a[8, 8] = -km
    # d<pc ph>  = -g(<xc pc> + <xh ph> - i) - km<pc ph>
    a[9, 1] = -g
    a[9, 4] = -g
    a[9, 9] = -km
    b[9] = 1.0j * g
    return a, b


def steady_second_moments(gp: GaussianParams, baths: BathState) -> np.ndarray:
    """Raw steady-state second moments (complex vector, MOMENT_LABELS order)."""
    a, b = moment_system(gp, baths)
    try:
        m = np.linalg.solve(a.astype(complex), -b)
    except np.linalg.LinAlgError as exc:
        raise NumericalError(f"second-moment system is singular: {exc}") from exc
    return m


def steady_covariance(gp: GaussianParams, baths: BathState) -> np.ndarray:
    """Symmetrized 4x4 steady-state covariance matrix (QUADRATURE_ORDER)."""
    m = steady_second_moments(gp, baths).real
    gamma = np.zeros((4, 4))
    gamma[0, 0] = m[0]                      # <xc^2>
    gamma[1, 1] = m[3]                      # <xh^2>
    gamma[2, 2] = m[2]                      # <pc^2>
    gamma[3, 3] = m[5]                      # <ph^2>
    gamma[0, 2] = gamma[2, 0] = m[1]        # Re<xc pc> (zero at steady state)
    gamma[1, 3] = gamma[3, 1] = m[4]        # Re<xh ph>
    gamma[0, 1] = gamma[1, 0] = m[6]        # <xc xh>
    gamma[2, 3] = gamma[3, 2] = m[9]        # <pc ph>
    gamma[0, 3] = gamma[3, 0] = m[7]        # <xc ph>
    gamma[1, 2] = gamma[2, 1] = m[8]        # <pc xh>
    return gamma


def _current_prefactor(gp: GaussianParams) -> float:
    """4 kc kh g^2 / ((kc + kh)(kc kh + 4 g^2)); rate scale of the current."""
    g, kc, kh = gp.g, gp.kappa_c, gp.kappa_h
    return 4.0 * kc * kh * g * g / ((kc + kh) * (kc * kh + 4.0 * g * g))


def mean_current(gp: GaussianParams, baths: BathState) -> float:
    """Steady-state charge current in pA.

    Positive sign corresponds to the refrigeration regime n_h < n_c
    (hot temperature below the vanishing-flow point).
    """
    return -2.0 * _current_prefactor(gp) * (baths.n_h - baths.n_c) * CURRENT_PA


def current_variance(gp: GaussianParams, baths: BathState) -> float:
    """Steady-state quantum variance of the current operator, in pA^2.

    Wick's theorem on the solved second moments gives
    Var(I)/(2g)^2 = <x_c^2><p_h^2> + <p_c^2><x_h^2> + 2<x_c p_h>^2 - 1/2;
    equivalently the familiar expansion plus a (kc kh)^2 cross-moment term
    that vanishes when the occupations match (the only point where the
    closed-form value enters the precision prefactors).  The Fock-space
    oracle of the bilinear model confirms the cross-moment term.
    """
    g, kc, kh = gp.g, gp.kappa_c, gp.kappa_h
    nc, nh = baths.n_c, baths.n_h
    dn = nh - nc
    denom = (kh + kc) * (kh * kc + 4.0 * g * g)
    var_nat = (2.0 * g) ** 2 * (
        nc * (nh + 1.0) + nh * (nc + 1.0)
        + (8.0 * g * g * dn / denom) * (kh * (nh + 0.5) - kc * (nc + 0.5))
        + (8.0 * g * g * kc * kc * kh * kh - 32.0 * g ** 4 * kh * kc)
        * dn * dn / denom ** 2
    )
    return var_nat * CURRENT_PA ** 2


def dcurrent_dtc(gp: GaussianParams, baths: BathState) -> float:
    """Derivative of the mean current w.r.t. the cold temperature, pA/mK.

    Closed form, valid at (or near) the vanishing-flow point where only the
    cold occupation responds to T_c.
    """
    x = gp.omega_c / baths.t_c
    dn_dt = (gp.omega_c / baths.t_c ** 2) / (4.0 * math.sinh(0.5 * x) ** 2)
    slope_nat = 2.0 * _current_prefactor(gp) * dn_dt
    return slope_nat * CURRENT_PA * MILLIKELVIN


def alpha(gp: GaussianParams) -> float:
    """Precision prefactor of a steady-state current measurement.

    alpha = (kc + kh)(kc kh + 4 g^2) / (sqrt(2) kc kh g); its smallest
    value 4*sqrt(2) is reached at kappa_c = kappa_h = 2g.  Returns inf in
    the degenerate limits where the current carries no information.
    """
    g, kc, kh = gp.g, gp.kappa_c, gp.kappa_h
    denom = math.sqrt(2.0) * kc * kh * g
    if denom == 0.0:
        return math.inf
    return (kc + kh) * (kc * kh + 4.0 * g * g) / denom


def beta(gp_or_g, kappa_c: float | None = None,
         kappa_h: float | None = None) -> float:
    """Precision prefactor of the optimal measurement at the operating point.

    Accepts either a GaussianParams or the bare (g, kappa_c, kappa_h)
    triple so the kappa_h -> 0 limit (beta -> sqrt(2)) can be evaluated
    even though GaussianParams requires positive rates.
    """
    if kappa_c is None:
        g, kc, kh = gp_or_g.g, gp_or_g.kappa_c, gp_or_g.kappa_h
    else:
        g, kc, kh = gp_or_g, kappa_c, kappa_h
    radicand = (8.0 * g * g * kc * kh + kh * kh * (kc * kc + 16.0 * g * g)
                + 2.0 * kc * kh ** 3 + 32.0 * g ** 4 + kh ** 4)
    denom = kc * math.sqrt(radicand)
    if denom == 0.0:
        return math.inf
    return 2.0 * (kc + kh) * (kc * kh + 4.0 * g * g) / denom


def precision_shape(omega_c: float, t_c: float) -> float:
    """Common temperature profile (T^2/omega) sinh(omega/2T) of both bounds."""
    return t_c ** 2 / omega_c * math.sinh(0.5 * omega_c / t_c)


@dataclass(frozen=True)
class BudgetBreakdown:
    """Quadrature error budget of the located cold temperature, in mK."""

    total_mk: float
    current_term_mk: float
    temperature_term_mk: float


def delta_tc_budget(gp: GaussianParams, baths: BathState,
                    noise: MeasurementNoise) -> BudgetBreakdown:
    """Error budget of the protocol at the vanishing-flow point.

    Combines the current-resolution term delta_I / |dI/dT_c| with the hot
    thermometer term (omega_c/omega_h) * delta_T_h in quadrature.
    """
    temperature_term = (gp.omega_c / gp.omega_h) * noise.delta_th_mk
    if noise.delta_i_pa == 0.0:
        current_term = 0.0
    else:
        slope = abs(dcurrent_dtc(gp, baths))
        current_term = noise.delta_i_pa / slope if slope > 0.0 else math.inf
    return BudgetBreakdown(
        total_mk=math.hypot(current_term, temperature_term),
        current_term_mk=current_term,
        temperature_term_mk=temperature_term,
    )
