"""Full nonlinear model on a truncated two-mode Fock space.

Builds the junction-dressed exchange Hamiltonian and current operator,
assembles the local Lindblad generator as a sparse superoperator, solves
for the steady state through a trace-constrained linear solve, and
evaluates charge current, heat currents, and power.

Tensor convention: operators live on mode_c (x) mode_h, i.e. basis index
``n_c * dim_h + n_h``.  Density matrices are vectorized row-major, so the
superoperator of ``A rho B`` is ``kron(A, B.T)``.

All quantities are in natural units (see ``qtherm.units``); observables
are converted to pA/aW at the boundary.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .errors import NumericalError
from .units import (BathState, MachineParams, CURRENT_PA, POWER_AW)

#: trace-preservation / steady-state residual tolerance, relative to ||L||
RESIDUAL_RTOL = 1e-10
#: most negative admissible steady-state eigenvalue
POSITIVITY_FLOOR = -1e-8


@dataclass(frozen=True)
class FockCutoff:
    """Highest retained Fock level per mode."""

    n_max_c: int
    n_max_h: int

    def __post_init__(self):
        if self.n_max_c < 2 or self.n_max_h < 2:
            raise ValueError("cutoffs must be at least 2 per mode")

    @property
    def dim_c(self) -> int:
        return self.n_max_c + 1

    @property
    def dim_h(self) -> int:
        return self.n_max_h + 1

    @property
    def dim(self) -> int:
        return self.dim_c * self.dim_h


def laguerre_assoc(n: int, x: float) -> float:
    """Associated Laguerre polynomial L_n^(1)(x) by the three-term recurrence.

    (n+1) L_{n+1} = (2n + 2 - x) L_n - (n+1) L_{n-1}, with L_0 = 1 and
    L_1 = 2 - x.
    """
    if n < 0:
        raise ValueError("polynomial order must be non-negative")
    prev = 1.0
    if n == 0:
        return prev
    cur = 2.0 - x
    for k in range(1, n):
        prev, cur = cur, ((2.0 * k + 2.0 - x) * cur - (k + 1.0) * prev) / (k + 1.0)
    return cur


def _dressing_diag(lam: float, n_max: int) -> np.ndarray:
    """Level-dependent hopping renormalization 2 lam e^{-2 lam^2} L_n^(1)(4 lam^2)/(n+1)."""
    x = 4.0 * lam * lam
    scale = 2.0 * lam * math.exp(-2.0 * lam * lam)
    values = np.empty(n_max + 1)
    prev, cur = 1.0, 2.0 - x  # L_n, L_{n+1}
    for n in range(n_max + 1):
        values[n] = prev / (n + 1.0)
        prev, cur = cur, ((2.0 * n + 4.0 - x) * cur - (n + 2.0) * prev) / (n + 2.0)
    return scale * values


def build_dressing_operator(lam: float, n_max: int) -> np.ndarray:
    """Diagonal single-mode operator renormalizing the exchange per Fock level."""
    if lam <= 0.0:
        raise ValueError("lambda must be positive")
    if n_max < 1:
        raise ValueError("cutoff too small")
    return np.diag(_dressing_diag(lam, n_max))


def destroy(n_max: int) -> np.ndarray:
    """Single-mode annihilation operator on levels 0..n_max."""
    return np.diag(np.sqrt(np.arange(1.0, n_max + 1.0)), k=1)


def number_op(n_max: int) -> np.ndarray:
    return np.diag(np.arange(0.0, n_max + 1.0))


def _two_mode(op_c: np.ndarray, op_h: np.ndarray) -> np.ndarray:
    return np.kron(op_c, op_h)


def _exchange_term(params: MachineParams, cutoff: FockCutoff) -> np.ndarray:
    """The raising-on-c / lowering-on-h product a_c^dag A_c A_h a_h."""
    a_c = destroy(cutoff.n_max_c)
    a_h = destroy(cutoff.n_max_h)
    dress_c = build_dressing_operator(params.lambda_c, cutoff.n_max_c)
    dress_h = build_dressing_operator(params.lambda_h, cutoff.n_max_h)
    return _two_mode(a_c.T @ dress_c, dress_h @ a_h)


def build_hamiltonian(params: MachineParams, cutoff: FockCutoff) -> np.ndarray:
    """Rotating-frame exchange Hamiltonian (E_J/2)(a_h^dag A_h A_c a_c + h.c.)."""
    if cutoff.n_max_c < 1 or cutoff.n_max_h < 1:
        raise ValueError("cutoff too small")
    x = _exchange_term(params, cutoff)
    return 0.5 * params.e_j * (x + x.conj().T)


def build_current_operator(params: MachineParams, cutoff: FockCutoff) -> np.ndarray:
    """Charge current operator in units of e * rad/ns.

    i E_J (X - X^dag) with X = a_c^dag A_c A_h a_h; multiply expectations by
    ``units.CURRENT_PA`` to get pA.  Positive expectation = refrigeration.
    """
    x = _exchange_term(params, cutoff)
    return 1.0j * params.e_j * (x - x.conj().T)


def bilinear_hamiltonian(g: float, cutoff: FockCutoff) -> np.ndarray:
    """Exchange Hamiltonian g(a_h^dag a_c + h.c.) of the bilinear model."""
    a_c = destroy(cutoff.n_max_c)
    a_h = destroy(cutoff.n_max_h)
    x = _two_mode(a_c.T, a_h)
    return g * (x + x.conj().T)


def bilinear_current_operator(g: float, cutoff: FockCutoff) -> np.ndarray:
    """Current operator 2 i g (a_c^dag a_h - h.c.) of the bilinear model (e * rad/ns)."""
    a_c = destroy(cutoff.n_max_c)
    a_h = destroy(cutoff.n_max_h)
    x = _two_mode(a_c.T, a_h)
    return 2.0j * g * (x - x.conj().T)


@dataclass(frozen=True)
class Liouvillian:
    """Sparse generator acting on row-major vectorized density matrices."""

    matrix: sp.csr_matrix
    cutoff: FockCutoff
    rates: tuple

    @property
    def dim(self) -> int:
        return self.cutoff.dim


def _lindblad_superoperator(h: np.ndarray, jumps) -> sp.csr_matrix:
    """-i[H, .] plus sum of rate * D[op] as a sparse matrix (row-major vec)."""
    d = h.shape[0]
    eye = sp.identity(d, format="csr")
    h_s = sp.csr_matrix(h)
    gen = -1.0j * (sp.kron(h_s, eye) - sp.kron(eye, h_s.T))
    for rate, op in jumps:
        if rate == 0.0:
            continue
        op_s = sp.csr_matrix(op)
        opdop = sp.csr_matrix(op.conj().T @ op)
        gen = gen + rate * (
            sp.kron(op_s, op_s.conj())
            - 0.5 * (sp.kron(opdop, eye) + sp.kron(eye, opdop.T))
        )
    return gen.tocsr()


def _thermal_jumps(params: MachineParams, baths: BathState, cutoff: FockCutoff,
                   literal_printed_rates: bool):
    """Four jump processes; the cold-absorption rate uses kappa_c n_c.

    ``literal_printed_rates=True`` reproduces a variant generator with the
    cold-absorption rate tied to kappa_h instead (detailed balance is then
    broken for the cold bath); kept for diagnostics only.
    """
    a_c = _two_mode(destroy(cutoff.n_max_c), np.eye(cutoff.dim_h))
    a_h = _two_mode(np.eye(cutoff.dim_c), destroy(cutoff.n_max_h))
    cold_up_rate = params.kappa_h if literal_printed_rates else params.kappa_c
    return [
        (params.kappa_h * (baths.n_h + 1.0), a_h),
        (params.kappa_h * baths.n_h, a_h.conj().T),
        (params.kappa_c * (baths.n_c + 1.0), a_c),
        (cold_up_rate * baths.n_c, a_c.conj().T),
    ]


def build_liouvillian(params: MachineParams, baths: BathState,
                      cutoff: FockCutoff, *,
                      literal_printed_rates: bool = False) -> Liouvillian:
    """Full-model generator: exchange Hamiltonian plus four thermal dissipators."""
    h = build_hamiltonian(params, cutoff)
    jumps = _thermal_jumps(params, baths, cutoff, literal_printed_rates)
    gen = _lindblad_superoperator(h, jumps)
    liouv = Liouvillian(matrix=gen, cutoff=cutoff,
                        rates=tuple(rate for rate, _ in jumps))
    _check_trace_preserving(liouv)
    return liouv


def bilinear_liouvillian(g: float, kappa_c: float, kappa_h: float,
                         n_c: float, n_h: float,
                         cutoff: FockCutoff) -> Liouvillian:
    """Generator of the bilinear model with the same dissipators."""
    h = bilinear_hamiltonian(g, cutoff)
    a_c = _two_mode(destroy(cutoff.n_max_c), np.eye(cutoff.dim_h))
    a_h = _two_mode(np.eye(cutoff.dim_c), destroy(cutoff.n_max_h))
    jumps = [
        (kappa_h * (n_h + 1.0), a_h),
        (kappa_h * n_h, a_h.conj().T),
        (kappa_c * (n_c + 1.0), a_c),
        (kappa_c * n_c, a_c.conj().T),
    ]
    gen = _lindblad_superoperator(h, jumps)
    liouv = Liouvillian(matrix=gen, cutoff=cutoff,
                        rates=tuple(rate for rate, _ in jumps))
    _check_trace_preserving(liouv)
    return liouv


def _trace_vector(dim: int) -> np.ndarray:
    """Row functional t with t @ vec(rho) = tr(rho) (row-major vec)."""
    t = np.zeros(dim * dim)
    t[:: dim + 1] = 1.0
    return t


def _equal_totals_sector(cutoff: FockCutoff) -> np.ndarray:
    """Vectorized indices of matrix elements with equal bra/ket photon totals.

    Both the exchange Hamiltonian and the thermal dissipators preserve the
    difference between the row and column total excitation numbers, so the
    steady state (reached from the trace sector) is supported entirely on
    elements |n_c n_h><m_c m_h| with n_c + n_h = m_c + m_h.  Solving inside
    this sector shrinks the linear system by roughly dim/2 while the
    residual is still verified against the full generator.
    """
    totals = (np.arange(cutoff.dim_c)[:, None]
              + np.arange(cutoff.dim_h)[None, :]).reshape(-1)
    d = cutoff.dim
    ti = np.repeat(totals, d)
    tj = np.tile(totals, d)
    return np.flatnonzero(ti == tj)


def _check_trace_preserving(liouv: Liouvillian) -> None:
    t = _trace_vector(liouv.dim)
    residual = np.abs(t @ liouv.matrix).max()
    scale = max(np.abs(liouv.matrix.data).max(), 1.0)
    if residual > RESIDUAL_RTOL * scale:
        raise NumericalError(
            f"generator is not trace preserving: residual {residual:.3e}")


def steady_state(liouv: Liouvillian) -> np.ndarray:
    """Unique steady state of the generator.

    The null-space problem is replaced by a trace-constrained linear solve:
    one redundant row (the columns of L annihilate the trace functional) is
    exchanged for the trace condition.  The solve is restricted to the
    photon-total-conserving sector (see ``_equal_totals_sector``); the
    residual is then verified against the full generator, so an unexpected
    sector leak would be caught.  The solution is Hermitized, normalized,
    and positivity-checked.
    """
    d = liouv.dim
    sector = _equal_totals_sector(liouv.cutoff)
    lcsr = liouv.matrix.tocsr()
    sub = lcsr[sector][:, sector].tolil()
    # positions of the diagonal elements i*d+i inside the sector index list
    diag_positions = np.searchsorted(sector, np.arange(d) * (d + 1))
    weight = max(np.abs(liouv.matrix.data).mean(), 1e-30)
    trace_row = np.zeros(sector.size)
    trace_row[diag_positions] = weight
    sub[0, :] = trace_row
    rhs = np.zeros(sector.size, dtype=complex)
    rhs[0] = weight
    try:
        x_sub = spla.spsolve(sub.tocsc(), rhs)
    except Exception as exc:  # umfpack/superlu signal singularities differently
        raise NumericalError(f"steady-state solve failed: {exc}") from exc
    if not np.all(np.isfinite(x_sub)):
        raise NumericalError("steady-state solve returned non-finite values")

    x = np.zeros(d * d, dtype=complex)
    x[sector] = x_sub
    norm_l = spla.norm(liouv.matrix)
    residual = np.linalg.norm(liouv.matrix @ x)
    if residual > RESIDUAL_RTOL * norm_l:
        raise NumericalError(
            f"steady-state residual {residual:.3e} exceeds "
            f"{RESIDUAL_RTOL:.0e} * ||L|| = {RESIDUAL_RTOL * norm_l:.3e}")

    rho = x.reshape(d, d)
    rho = 0.5 * (rho + rho.conj().T)
    rho /= np.trace(rho).real
    min_eig = np.linalg.eigvalsh(rho).min()
    if min_eig < POSITIVITY_FLOOR:
        raise NumericalError(
            f"steady state has eigenvalue {min_eig:.3e} below "
            f"{POSITIVITY_FLOOR:.0e}; increase the Fock cutoff")
    return rho


@dataclass(frozen=True)
class SteadyObservables:
    """Steady-state transport observables in laboratory units."""

    charge_current_pa: float
    occupation_c: float
    occupation_h: float
    heat_current_c_aw: float
    heat_current_h_aw: float
    power_aw: float


def mode_occupations(rho: np.ndarray, cutoff: FockCutoff) -> tuple[float, float]:
    """Mean photon numbers (<n_c>, <n_h>) of a two-mode state."""
    pops = np.diag(rho).real.reshape(cutoff.dim_c, cutoff.dim_h)
    levels_c = np.arange(cutoff.dim_c)
    levels_h = np.arange(cutoff.dim_h)
    return float(pops.sum(axis=1) @ levels_c), float(pops.sum(axis=0) @ levels_h)


def observables(rho: np.ndarray, params: MachineParams, baths: BathState,
                cutoff: FockCutoff) -> SteadyObservables:
    """Charge current, occupations, heat currents, and power of a state.

    Heat currents are flows into the respective bath,
    J_alpha = omega_alpha kappa_alpha (<n_alpha> - n_B^alpha); the power is
    P = I V with V the resonance bias voltage, so the first law
    P = J_c + J_h holds identically at any steady state.
    """
    current_op = build_current_operator(params, cutoff)
    current_nat = float(np.trace(rho @ current_op).real)
    occ_c, occ_h = mode_occupations(rho, cutoff)
    j_c = params.omega_c * params.kappa_c * (occ_c - baths.n_c)
    j_h = params.omega_h * params.kappa_h * (occ_h - baths.n_h)
    power = 0.5 * current_nat * (params.omega_h - params.omega_c)
    return SteadyObservables(
        charge_current_pa=current_nat * CURRENT_PA,
        occupation_c=occ_c,
        occupation_h=occ_h,
        heat_current_c_aw=j_c * POWER_AW,
        heat_current_h_aw=j_h * POWER_AW,
        power_aw=power * POWER_AW,
    )


def steady_observables(params: MachineParams, baths: BathState,
                       cutoff: FockCutoff) -> SteadyObservables:
    liouv = build_liouvillian(params, baths, cutoff)
    return observables(steady_state(liouv), params, baths, cutoff)


def tail_populations(rho: np.ndarray, cutoff: FockCutoff) -> tuple[float, float]:
    """Population of the top two Fock levels of each mode."""
    pops = np.diag(rho).real.reshape(cutoff.dim_c, cutoff.dim_h)
    return float(pops[-2:, :].sum()), float(pops[:, -2:].sum())


def choose_cutoff(params: MachineParams, baths: BathState,
                  tail_tol: float = 1e-8, hard_cap: int = 40) -> FockCutoff:
    """Smallest doubling-ladder cutoff with steady-state tails below tail_tol.

    Starting from 2 levels per mode, the cutoff of any mode whose top two
    Fock levels hold more than ``tail_tol`` population is doubled (clamping
    the final step to ``hard_cap``) until the tails converge.  A cutoff
    request beyond ``hard_cap`` levels per mode fails.
    """
    if not 0.0 < tail_tol < 1.0:
        raise ValueError("tail_tol must lie in (0, 1)")
    n_c, n_h = 2, 2
    while True:
        cutoff = FockCutoff(n_c, n_h)
        rho = steady_state(build_liouvillian(params, baths, cutoff))
        tail_c, tail_h = tail_populations(rho, cutoff)
        if tail_c < tail_tol and tail_h < tail_tol:
            return cutoff
        grew = False
        if tail_c >= tail_tol and n_c < hard_cap:
            n_c = min(2 * n_c, hard_cap)
            grew = True
        if tail_h >= tail_tol and n_h < hard_cap:
            n_h = min(2 * n_h, hard_cap)
            grew = True
        if not grew:
            raise NumericalError(
                f"steady-state tails ({tail_c:.3e}, {tail_h:.3e}) stay above "
                f"tail_tol={tail_tol:g} at the hard cap of {hard_cap} levels "
                f"per mode; raise the cap or loosen the tolerance")


def steady_current_pa(params: MachineParams, baths: BathState,
                      cutoff: FockCutoff) -> float:
    """Steady-state charge current of the full model, in pA."""
    return steady_observables(params, baths, cutoff).charge_current_pa


def thermal_state(occupation: float, dim: int) -> np.ndarray:
    """Single-mode thermal density matrix truncated (and renormalized) at dim levels."""
    if occupation == 0.0:
        rho = np.zeros((dim, dim))
        rho[0, 0] = 1.0
        return rho
    q = occupation / (occupation + 1.0)
    weights = q ** np.arange(dim)
    return np.diag(weights / weights.sum())


def dump_operators(params: MachineParams, baths: BathState, cutoff: FockCutoff,
                   directory: str) -> list[str]:
    """Write the model operators as plain-text matrices (debug aid)."""
    import os

    os.makedirs(directory, exist_ok=True)
    named = {
        "hamiltonian": build_hamiltonian(params, cutoff),
        "current_operator": build_current_operator(params, cutoff),
        "annihilation_c": _two_mode(destroy(cutoff.n_max_c), np.eye(cutoff.dim_h)),
        "annihilation_h": _two_mode(np.eye(cutoff.dim_c), destroy(cutoff.n_max_h)),
        "dressing_c": build_dressing_operator(params.lambda_c, cutoff.n_max_c),
        "dressing_h": build_dressing_operator(params.lambda_h, cutoff.n_max_h),
    }
    paths = []
    for name, op in named.items():
        path = os.path.join(directory, f"{name}.txt")
        header = (f"{name}  shape={op.shape}  cutoff=({cutoff.n_max_c},"
                  f"{cutoff.n_max_h})  n_c={baths.n_c:.6g} n_h={baths.n_h:.6g}")
        if np.iscomplexobj(op) and np.abs(op.imag).max() > 0.0:
            stacked = np.hstack([op.real, op.imag])
            np.savetxt(path, stacked, header=header + "  [real | imag]")
        else:
            np.savetxt(path, np.asarray(op).real, header=header)
        paths.append(path)
    return paths
