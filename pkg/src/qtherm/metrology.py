"""Estimation-theory machinery: symplectic diagonalization, Gaussian
Fisher information, its closed form at the vanishing-flow point, a
density-matrix spectral oracle, and the associated precision bounds.

Everything here works in natural units; convert Fisher informations with
``units.MILLIKELVIN**2`` (or temperature errors with ``units.MILLIKELVIN``)
at the boundary.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
import scipy.linalg as sla

from .errors import NumericalError
from .gaussian import GaussianParams, precision_shape, steady_covariance
from .units import BathState, MILLIKELVIN

#: symplectic form for the quadrature ordering (x_c, x_h, p_c, p_h)
OMEGA4 = np.array([
    [0.0, 0.0, 1.0, 0.0],
    [0.0, 0.0, 0.0, 1.0],
    [-1.0, 0.0, 0.0, 0.0],
    [0.0, -1.0, 0.0, 0.0],
])

#: default temperature step for finite-difference derivatives (1 uK)
DEFAULT_STEP = 1e-3 * MILLIKELVIN

_PURE_MARGIN = 1e-9


@dataclass(frozen=True)
class SymplecticDecomposition:
    """S with S Omega S^T = Omega and S Gamma S^T = diag(nu_1, nu_2, nu_1, nu_2)."""

    s: np.ndarray
    nu_1: float
    nu_2: float

    @property
    def diagonal(self) -> np.ndarray:
        return np.array([self.nu_1, self.nu_2, self.nu_1, self.nu_2])


@dataclass(frozen=True)
class QfiResult:
    """Fisher information (natural units, 1/T^2) with provenance."""

    fisher_information: float
    method: str
    derivative_step: float | None = None

    def precision(self, repetitions: int = 1) -> float:
        """Cramer-Rao temperature error 1/sqrt(nu F), natural units."""
        return cramer_rao(self.fisher_information, repetitions)


def _validate_symmetric(gamma: np.ndarray, name: str) -> np.ndarray:
    gamma = np.asarray(gamma, dtype=float)
    if gamma.shape != (4, 4):
        raise ValueError(f"{name} must be 4x4, got {gamma.shape}")
    if np.abs(gamma - gamma.T).max() > 1e-10 * max(1.0, np.abs(gamma).max()):
        raise ValueError(f"{name} must be symmetric")
    return 0.5 * (gamma + gamma.T)


def williamson(gamma: np.ndarray) -> SymplecticDecomposition:
    """Symplectic (congruence) diagonalization of a 4x4 covariance matrix.

    Uses the real Schur form of Gamma^{-1/2} Omega Gamma^{-1/2}: its
    2x2 antisymmetric blocks hold 1/nu_i, and the orthogonal Schur basis
    combined with Gamma^{-1/2} yields the symplectic congruence.  The
    symplectic eigenvalues are returned in descending order; the basis sign
    is fixed by making the largest-magnitude component of each x-row
    positive, so degenerate spectra still yield a deterministic S.

    Raises NumericalError if any symplectic eigenvalue is within
    1e-9 of the vacuum floor 1/2 (the Fisher-information denominators
    2 nu_i^2 nu_j^2 - 1/8 would vanish there).
    """
    gamma = _validate_symmetric(gamma, "gamma")
    evals, evecs = np.linalg.eigh(gamma)
    if evals.min() <= 0.0:
        raise NumericalError("covariance matrix is not positive definite")
    inv_sqrt = (evecs * (1.0 / np.sqrt(evals))) @ evecs.T

    kern = inv_sqrt @ OMEGA4 @ inv_sqrt
    kern = 0.5 * (kern - kern.T)  # exact antisymmetry
    t, q = sla.schur(kern, output="real")

    blocks = []
    for i in (0, 2):
        b = t[i, i + 1]
        if abs(t[i + 1, i] + b) > 1e-8 * max(1.0, abs(b)):
            raise NumericalError("Schur form of the symplectic kernel is not block-antisymmetric")
        cols = [i, i + 1] if b > 0.0 else [i + 1, i]
        blocks.append((1.0 / abs(b), q[:, cols[0]].copy(), q[:, cols[1]].copy()))
    blocks.sort(key=lambda item: -item[0])

    nu = (blocks[0][0], blocks[1][0])
    for value in nu:
        if value <= 0.5 + _PURE_MARGIN:
            raise NumericalError(
                f"symplectic eigenvalue {value} at the vacuum floor; "
                "state is pure/singular for the Fisher recipe")

    # rows of S: (x_1, x_2, p_1, p_2) built from the Schur basis columns
    rows = np.vstack([blocks[0][1], blocks[1][1], blocks[0][2], blocks[1][2]])
    for mode in range(2):
        x_row = rows[mode]
        lead = np.argmax(np.abs(x_row))
        if x_row[lead] < 0.0:
            rows[mode] *= -1.0
            rows[mode + 2] *= -1.0
    d_sqrt = np.sqrt(np.array([nu[0], nu[1], nu[0], nu[1]]))
    s = (rows * d_sqrt[:, None]) @ inv_sqrt

    dec = SymplecticDecomposition(s=s, nu_1=nu[0], nu_2=nu[1])
    _validate_decomposition(dec, gamma)
    return dec


def _validate_decomposition(dec: SymplecticDecomposition,
                            gamma: np.ndarray) -> None:
    s = dec.s
    sym_residual = np.abs(s @ OMEGA4 @ s.T - OMEGA4).max()
    diag = s @ gamma @ s.T
    diag_residual = np.abs(diag - np.diag(dec.diagonal)).max()
    scale = max(1.0, np.abs(gamma).max())
    if sym_residual > 1e-10 * scale or diag_residual > 1e-10 * scale:
        raise NumericalError(
            f"symplectic diagonalization failed: symplectic residual "
            f"{sym_residual:.3e}, diagonal residual {diag_residual:.3e}")


def symplectic_eigenvalues(gamma: np.ndarray) -> tuple[float, float]:
    """Moduli of the eigenvalues of i Omega Gamma, descending (plain eigensolve)."""
    gamma = _validate_symmetric(gamma, "gamma")
    evals = np.linalg.eigvals(1.0j * OMEGA4 @ gamma)
    nus = np.sort(np.abs(evals))
    return float(nus[-1]), float(nus[0])


def qfi_gaussian(gamma: np.ndarray, dgamma: np.ndarray,
                 derivative_step: float | None = None) -> QfiResult:
    """Fisher information of a zero-mean Gaussian family from (Gamma, dGamma).

    In the diagonalizing frame (frozen at the base point, dGamma_S =
    S dGamma S^T):

        (Phi_S)_ij = (Omega^T Gamma_S dGamma_S Gamma_S Omega + dGamma_S/4)_ij
                     / (2 nu_i^2 nu_j^2 - 1/8)

    then Phi = S^{-1} Phi_S S^{-T} and F = tr[Omega^T dGamma Omega Phi].
    """
    gamma = _validate_symmetric(gamma, "gamma")
    dgamma = _validate_symmetric(dgamma, "dgamma")
    dec = williamson(gamma)
    s = dec.s
    lam = dec.diagonal
    gamma_s = np.diag(lam)
    dgamma_s = s @ dgamma @ s.T

    numerator = OMEGA4.T @ gamma_s @ dgamma_s @ gamma_s @ OMEGA4 + 0.25 * dgamma_s
    denominator = 2.0 * np.outer(lam ** 2, lam ** 2) - 0.125
    phi_s = numerator / denominator
    s_inv = np.linalg.inv(s)
    phi = s_inv @ phi_s @ s_inv.T
    fisher = float(np.trace(OMEGA4.T @ dgamma @ OMEGA4 @ phi).real)
    if fisher < -1e-9:
        raise NumericalError(f"negative Fisher information: {fisher:.3e}")
    return QfiResult(fisher_information=max(fisher, 0.0),
                     method="symplectic-numeric",
                     derivative_step=derivative_step)


def covariance_tc_derivative(gp: GaussianParams, baths: BathState,
                             step: float = DEFAULT_STEP) -> np.ndarray:
    """Central-difference derivative of the steady covariance w.r.t. T_c.

    The hot temperature (and occupation) is held fixed while the cold
    occupation follows its bath temperature.
    """
    from .units import thermal_occupation

    def baths_at(t_c: float) -> BathState:
        return BathState(t_c=t_c, t_h=baths.t_h,
                         n_c=thermal_occupation(gp.omega_c, t_c),
                         n_h=baths.n_h)

    plus = steady_covariance(gp, baths_at(baths.t_c + step))
    minus = steady_covariance(gp, baths_at(baths.t_c - step))
    return (plus - minus) / (2.0 * step)


def qfi_gaussian_at(gp: GaussianParams, baths: BathState,
                    step: float = DEFAULT_STEP) -> QfiResult:
    """Gaussian Fisher information w.r.t. T_c at a steady-state point."""
    gamma = steady_covariance(gp, baths)
    dgamma = covariance_tc_derivative(gp, baths, step)
    return qfi_gaussian(gamma, dgamma, derivative_step=step)


def qfi_carnot_closed(gp: GaussianParams, baths: BathState) -> QfiResult:
    """Closed-form Fisher information at the vanishing-flow point.

    F = kc^2 (8 g^2 kh (kc + 2 kh) + kh^2 (kc + kh)^2 + 32 g^4)
        / (4 (kc + kh)^2 (kc kh + 4 g^2)^2)
        * (omega_c^2 / T_c^4) / sinh^2(omega_c / 2 T_c).

    ``gp.kappa_h`` may not be zero by construction; use
    ``carnot_fisher_prefactor`` directly for the disconnected-bath limit.
    """
    pref = carnot_fisher_prefactor(gp.g, gp.kappa_c, gp.kappa_h)
    t_c = baths.t_c
    x = gp.omega_c / t_c
    fisher = pref * (gp.omega_c ** 2 / t_c ** 4) / math.sinh(0.5 * x) ** 2
    return QfiResult(fisher_information=fisher, method="closed-form")


def carnot_fisher_prefactor(g: float, kappa_c: float, kappa_h: float) -> float:
    """Dimensionless coupling factor of the closed-form Fisher information."""
    num = kappa_c ** 2 * (8.0 * g * g * kappa_h * (kappa_c + 2.0 * kappa_h)
                          + kappa_h ** 2 * (kappa_c + kappa_h) ** 2
                          + 32.0 * g ** 4)
    den = 4.0 * (kappa_c + kappa_h) ** 2 * (kappa_c * kappa_h + 4.0 * g * g) ** 2
    return num / den


def carnot_precision_bound(gp: GaussianParams, baths: BathState) -> float:
    """Single-shot optimal precision beta (T_c^2/omega_c) sinh(omega_c/2T_c), natural units."""
    from .gaussian import beta

    return beta(gp) * precision_shape(gp.omega_c, baths.t_c)


def qfi_sld_oracle(rho: np.ndarray, drho: np.ndarray,
                   derivative_step: float | None = None,
                   eig_floor: float = 1e-12) -> QfiResult:
    """Spectral Fisher information F = 2 sum_ij |<i|drho|j>|^2 / (p_i + p_j).

    Independent of the Gaussian machinery; eigenvalue pairs with
    p_i + p_j below ``eig_floor`` are skipped.
    """
    for name, mat in (("rho", rho), ("drho", drho)):
        if np.abs(mat - mat.conj().T).max() > 1e-10 * max(1.0, np.abs(mat).max()):
            raise ValueError(f"{name} must be Hermitian")
    p, v = np.linalg.eigh(rho)
    m = v.conj().T @ drho @ v
    pair_sum = p[:, None] + p[None, :]
    mask = pair_sum >= eig_floor
    fisher = 2.0 * float(np.sum((np.abs(m) ** 2)[mask] / pair_sum[mask]))
    return QfiResult(fisher_information=fisher, method="sld-oracle",
                     derivative_step=derivative_step)


def cramer_rao(fisher: float, repetitions: int = 1) -> float:
    """Estimation-error lower bound 1/sqrt(repetitions * F)."""
    if fisher <= 0.0:
        raise ValueError(f"Fisher information must be positive, got {fisher}")
    if repetitions < 1:
        raise ValueError("repetitions must be at least 1")
    return 1.0 / math.sqrt(repetitions * fisher)


def error_propagation(mean_sensitivity: float, variance: float,
                      repetitions: int = 1) -> float:
    """Observable-based error sqrt(variance / repetitions) / |d<O>/dtheta|."""
    if mean_sensitivity == 0.0:
        raise ZeroDivisionError("zero mean sensitivity: the estimator diverges")
    if variance < 0.0:
        raise ValueError("variance must be non-negative")
    if repetitions < 1:
        raise ValueError("repetitions must be at least 1")
    return math.sqrt(variance / repetitions) / abs(mean_sensitivity)
