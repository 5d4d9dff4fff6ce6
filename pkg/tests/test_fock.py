import math

import numpy as np
import pytest
import scipy.sparse as sp
from scipy.special import eval_genlaguerre

import qtherm as qt
from qtherm import fock
from qtherm.errors import NumericalError
from qtherm.units import BathState, CURRENT_PA, mk_to_natural


def laguerre_series(n: int, x: float) -> float:
    """Brute-force series L_n^(1)(x) = sum_k (-1)^k C(n+1, n-k) x^k / k!."""
    total = 0.0
    for k in range(n + 1):
        total += (-1.0) ** k * math.comb(n + 1, n - k) * x ** k / math.factorial(k)
    return total


def thermal_product(n_c, n_h, cutoff):
    return np.kron(fock.thermal_state(n_c, cutoff.dim_c),
                   fock.thermal_state(n_h, cutoff.dim_h))


class TestLaguerre:
    def test_order_zero_is_one(self):
        for x in (0.0, 0.36, 5.0, 40.0):
            assert fock.laguerre_assoc(0, x) == 1.0

    def test_order_one_closed_form(self):
        for x in (0.0, 0.36, 2.5):
            assert fock.laguerre_assoc(1, x) == pytest.approx(2.0 - x, rel=1e-15)

    def test_order_two_against_series(self):
        # 3 - 3x + x^2/2 at x = 0.36  ->  1.9848
        assert fock.laguerre_assoc(2, 0.36) == pytest.approx(laguerre_series(2, 0.36), rel=1e-14)
        assert fock.laguerre_assoc(2, 0.36) == pytest.approx(1.9848, abs=1e-12)

    def test_random_orders_against_series_and_scipy(self):
        rng = np.random.default_rng(3)
        for _ in range(200):
            n = int(rng.integers(0, 18))
            x = float(rng.uniform(0.0, 8.0))
            val = fock.laguerre_assoc(n, x)
            assert val == pytest.approx(laguerre_series(n, x), rel=1e-10, abs=1e-10)
            assert val == pytest.approx(float(eval_genlaguerre(n, 1, x)), rel=1e-10, abs=1e-10)

    def test_negative_order_rejected(self):
        with pytest.raises(ValueError):
            fock.laguerre_assoc(-1, 0.5)


class TestDressingOperator:
    def test_ground_level_entry(self):
        lam = 0.42
        op = fock.build_dressing_operator(lam, 6)
        assert op[0, 0] == pytest.approx(2 * lam * math.exp(-2 * lam ** 2), rel=1e-14)

    def test_reference_value(self):
        # 0.6 * exp(-0.18) evaluated: 0.5011621268
        op = fock.build_dressing_operator(0.3, 4)
        assert op[0, 0] == pytest.approx(0.5011621268, abs=1e-9)

    def test_real_diagonal(self):
        op = fock.build_dressing_operator(0.3, 9)
        assert np.isrealobj(op)
        assert np.abs(op - np.diag(np.diag(op))).max() == 0.0

    def test_entries_match_recurrence(self):
        lam, n_max = 0.37, 11
        op = fock.build_dressing_operator(lam, n_max)
        x = 4 * lam * lam
        for n in range(n_max + 1):
            expected = (2 * lam * math.exp(-2 * lam ** 2)
                        * fock.laguerre_assoc(n, x) / (n + 1))
            assert op[n, n] == pytest.approx(expected, rel=1e-12)

    def test_invalid_inputs(self):
        with pytest.raises(ValueError):
            fock.build_dressing_operator(0.0, 4)
        with pytest.raises(ValueError):
            fock.build_dressing_operator(0.3, 0)


class TestHamiltonian:
    def test_zero_junction_energy(self, params):
        p0 = qt.MachineParams(omega_c=params.omega_c, omega_h=params.omega_h,
                              kappa_c=params.kappa_c, kappa_h=params.kappa_h,
                              e_j=0.0, lambda_c=0.3, lambda_h=0.3)
        h = fock.build_hamiltonian(p0, fock.FockCutoff(4, 4))
        assert np.abs(h).max() == 0.0

    def test_single_excitation_element(self, params):
        cutoff = fock.FockCutoff(5, 5)
        h = fock.build_hamiltonian(params, cutoff)
        d_h = cutoff.dim_h
        ground = 0
        c_excited = 1 * d_h + 0      # |1_c, 0_h>
        h_excited = 0 * d_h + 1      # |0_c, 1_h>
        a00 = fock.build_dressing_operator(0.3, 5)[0, 0]
        assert h[ground, ground] == 0.0
        assert h[h_excited, c_excited] == pytest.approx(0.5 * params.e_j * a00 ** 2,
                                                        rel=1e-14)

    def test_hermiticity(self, params):
        h = fock.build_hamiltonian(params, fock.FockCutoff(7, 9))
        assert np.abs(h - h.conj().T).max() < 1e-14

    def test_conserves_total_photon_number(self, params):
        cutoff = fock.FockCutoff(6, 6)
        h = fock.build_hamiltonian(params, cutoff)
        n_tot = (np.kron(fock.number_op(6), np.eye(7))
                 + np.kron(np.eye(7), fock.number_op(6)))
        assert np.abs(h @ n_tot - n_tot @ h).max() < 1e-13


class TestLiouvillian:
    def test_trace_annihilated(self, params):
        baths = BathState.from_mk(params, 15.0, 100.0)
        liouv = fock.build_liouvillian(params, baths, fock.FockCutoff(6, 6))
        d = liouv.dim
        trace_vec = np.zeros(d * d)
        trace_vec[:: d + 1] = 1.0
        assert np.abs(trace_vec @ liouv.matrix).max() < 1e-10

    def test_decoupled_thermal_product_is_stationary(self, params):
        p0 = qt.MachineParams(omega_c=params.omega_c, omega_h=params.omega_h,
                              kappa_c=params.kappa_c, kappa_h=params.kappa_h,
                              e_j=0.0, lambda_c=0.3, lambda_h=0.3)
        baths = BathState.from_mk(params, 15.0, 100.0)
        cutoff = fock.FockCutoff(10, 10)
        liouv = fock.build_liouvillian(p0, baths, cutoff)
        rho = thermal_product(baths.n_c, baths.n_h, cutoff)
        assert np.linalg.norm(liouv.matrix @ rho.reshape(-1)) < 1e-10

    def test_matched_occupation_product_is_stationary_with_coupling(self, params):
        # the exchange conserves total photon number, so the equal-ratio
        # thermal product commutes with it exactly
        baths = BathState.at_carnot(params, mk_to_natural(15.0))
        cutoff = fock.FockCutoff(10, 10)
        liouv = fock.build_liouvillian(params, baths, cutoff)
        rho = thermal_product(baths.n_c, baths.n_h, cutoff)
        assert np.linalg.norm(liouv.matrix @ rho.reshape(-1)) < 1e-8

    def test_literal_printed_rates_breaks_cold_detailed_balance(self, params):
        lopsided = qt.MachineParams(omega_c=params.omega_c, omega_h=params.omega_h,
                                    kappa_c=params.kappa_c, kappa_h=3 * params.kappa_h,
                                    e_j=0.0, lambda_c=0.3, lambda_h=0.3)
        baths = BathState.from_mk(lopsided, 15.0, 100.0)
        cutoff = fock.FockCutoff(8, 8)
        rho = thermal_product(baths.n_c, baths.n_h, cutoff).reshape(-1)
        fixed = fock.build_liouvillian(lopsided, baths, cutoff)
        literal = fock.build_liouvillian(lopsided, baths, cutoff,
                                         literal_printed_rates=True)
        assert np.linalg.norm(fixed.matrix @ rho) < 1e-10
        assert np.linalg.norm(literal.matrix @ rho) > 1e-4
        # with symmetric damping the variant generators coincide
        baths_sym = BathState.from_mk(params, 15.0, 100.0)
        same = fock.build_liouvillian(params, baths_sym, fock.FockCutoff(5, 5))
        same_lit = fock.build_liouvillian(params, baths_sym, fock.FockCutoff(5, 5),
                                          literal_printed_rates=True)
        assert (same.matrix - same_lit.matrix).nnz == 0


class TestSteadyState:
    def test_decoupled_limit(self, params):
        p0 = qt.MachineParams(omega_c=params.omega_c, omega_h=params.omega_h,
                              kappa_c=params.kappa_c, kappa_h=params.kappa_h,
                              e_j=0.0, lambda_c=0.3, lambda_h=0.3)
        baths = BathState.from_mk(params, 15.0, 100.0)
        cutoff = fock.FockCutoff(10, 10)
        rho = fock.steady_state(fock.build_liouvillian(p0, baths, cutoff))
        np.testing.assert_allclose(rho, thermal_product(baths.n_c, baths.n_h, cutoff),
                                   atol=1e-9)

    def test_matched_occupations_kill_the_current(self, params):
        baths = BathState.at_carnot(params, mk_to_natural(15.0))
        cutoff = fock.FockCutoff(8, 8)
        obs = fock.steady_observables(params, baths, cutoff)
        assert abs(obs.charge_current_pa) < 1e-6

    def test_against_bilinear_model(self, params, run):
        baths = BathState.from_mk(params, 15.0, 100.0)
        obs = fock.steady_observables(params, baths, fock.FockCutoff(8, 8))
        gp = qt.GaussianParams.from_machine(params, run.g_fit_ratio)
        bilinear = qt.mean_current(gp, baths)
        assert obs.charge_current_pa == pytest.approx(bilinear, rel=0.1)

    def test_density_matrix_contracts(self, params):
        baths = BathState.from_mk(params, 20.0, 150.0)
        rho = fock.steady_state(fock.build_liouvillian(params, baths,
                                                       fock.FockCutoff(8, 10)))
        assert np.abs(rho - rho.conj().T).max() < 1e-10
        assert np.trace(rho).real == pytest.approx(1.0, abs=1e-10)
        assert np.linalg.eigvalsh(rho).min() > -1e-8


class TestObservables:
    def test_zero_coupling_zeroes_transport(self, params):
        p0 = qt.MachineParams(omega_c=params.omega_c, omega_h=params.omega_h,
                              kappa_c=params.kappa_c, kappa_h=params.kappa_h,
                              e_j=0.0, lambda_c=0.3, lambda_h=0.3)
        baths = BathState.from_mk(params, 15.0, 100.0)
        obs = fock.steady_observables(p0, baths, fock.FockCutoff(8, 8))
        assert abs(obs.charge_current_pa) < 1e-10
        assert abs(obs.heat_current_c_aw) < 1e-8
        assert abs(obs.heat_current_h_aw) < 1e-8
        assert abs(obs.power_aw) < 1e-10

    def test_refrigeration_point(self, params):
        baths = BathState.from_mk(params, 15.0, 100.0)
        obs = fock.steady_observables(params, baths, fock.FockCutoff(8, 8))
        assert obs.charge_current_pa == pytest.approx(0.63, rel=0.1)
        assert obs.charge_current_pa > 0.0
        assert obs.heat_current_c_aw < 0.0     # heat drawn out of the cold bath
        assert obs.heat_current_h_aw > 0.0
        assert obs.power_aw > 0.0              # refrigerator consumes power

    def test_first_law_and_exchange_ratio(self, params):
        # flows per quantum match across the two modes and the drive;
        # points sit away from the vanishing-flow manifold so the relative
        # residuals are meaningful
        floor = 1e-6
        for tc_mk, th_mk in [(10.0, 60.0), (15.0, 100.0), (15.0, 160.0),
                             (25.0, 120.0), (30.0, 200.0)]:
            baths = BathState.from_mk(params, tc_mk, th_mk)
            cutoff = fock.choose_cutoff(params, baths, tail_tol=1e-10)
            obs = fock.steady_observables(params, baths, cutoff)
            scale = max(abs(obs.power_aw), abs(obs.heat_current_c_aw),
                        abs(obs.heat_current_h_aw), floor)
            assert abs(obs.power_aw - obs.heat_current_c_aw
                       - obs.heat_current_h_aw) < 1e-8 * scale
            quanta_c = obs.heat_current_c_aw / params.omega_c
            quanta_h = obs.heat_current_h_aw / params.omega_h
            quanta_drive = obs.power_aw / (params.omega_h - params.omega_c)
            assert abs(quanta_c) == pytest.approx(abs(quanta_h), rel=1e-6)
            assert abs(quanta_drive) == pytest.approx(abs(quanta_h), rel=1e-6)

    def test_current_monotone_with_single_sign_change(self, params):
        cutoff = fock.FockCutoff(8, 12)
        th_grid = np.linspace(100.0, 200.0, 11)
        currents = [fock.steady_observables(
            params, BathState.from_mk(params, 15.0, th), cutoff).charge_current_pa
            for th in th_grid]
        diffs = np.diff(currents)
        assert np.all(diffs < 0.0)
        signs = np.sign(currents)
        assert np.sum(np.abs(np.diff(signs)) > 0) == 1


class TestModeRelabeling:
    def test_steady_state_invariant_under_tensor_slot_exchange(self, params):
        # asymmetric parameters so the exchange is nontrivial
        p = qt.MachineParams(omega_c=params.omega_c, omega_h=params.omega_h,
                             kappa_c=0.8 * params.kappa_c, kappa_h=1.3 * params.kappa_h,
                             e_j=params.e_j, lambda_c=0.25, lambda_h=0.35)
        baths = BathState.from_mk(p, 18.0, 120.0)
        n_c, n_h = 6, 9
        cutoff = fock.FockCutoff(n_c, n_h)
        rho = fock.steady_state(fock.build_liouvillian(p, baths, cutoff))

        # rebuild with the hot mode in the first tensor slot
        dims = (n_c + 1, n_h + 1)
        a_c = fock._two_mode(np.eye(dims[1]), fock.destroy(n_c))  # swapped slots
        a_h = fock._two_mode(fock.destroy(n_h), np.eye(dims[0]))
        dress_c = fock._two_mode(np.eye(dims[1]),
                                 fock.build_dressing_operator(p.lambda_c, n_c))
        dress_h = fock._two_mode(fock.build_dressing_operator(p.lambda_h, n_h),
                                 np.eye(dims[0]))
        x = a_c.conj().T @ dress_c @ dress_h @ a_h
        h_swapped = 0.5 * p.e_j * (x + x.conj().T)
        jumps = [(p.kappa_h * (baths.n_h + 1.0), a_h),
                 (p.kappa_h * baths.n_h, a_h.conj().T),
                 (p.kappa_c * (baths.n_c + 1.0), a_c),
                 (p.kappa_c * baths.n_c, a_c.conj().T)]
        gen = fock._lindblad_superoperator(h_swapped, jumps)
        liouv_swapped = fock.Liouvillian(matrix=gen,
                                         cutoff=fock.FockCutoff(n_h, n_c),
                                         rates=())
        rho_swapped = fock.steady_state(liouv_swapped)

        # permutation |n_c, n_h> -> |n_h, n_c|
        d = dims[0] * dims[1]
        perm = np.zeros((d, d))
        for i in range(dims[0]):
            for j in range(dims[1]):
                perm[j * dims[0] + i, i * dims[1] + j] = 1.0
        np.testing.assert_allclose(perm @ rho @ perm.T, rho_swapped, atol=1e-10)


class TestCutoffChoice:
    def test_default_point_is_compact(self, params):
        baths = BathState.from_mk(params, 15.0, 127.5)
        cutoff = fock.choose_cutoff(params, baths, tail_tol=1e-8)
        assert cutoff.n_max_c <= 10 and cutoff.n_max_h <= 10

    def test_zero_temperature_returns_floor(self, params):
        baths = BathState(t_c=0.0, t_h=0.0, n_c=0.0, n_h=0.0)
        cutoff = fock.choose_cutoff(params, baths)
        assert (cutoff.n_max_c, cutoff.n_max_h) == (2, 2)

    def test_tightening_tolerance_never_shrinks(self, params):
        baths = BathState.from_mk(params, 15.0, 160.0)
        sizes = []
        for tol in (1e-4, 1e-8, 1e-12):
            cutoff = fock.choose_cutoff(params, baths, tail_tol=tol)
            sizes.append((cutoff.n_max_c, cutoff.n_max_h))
        assert sizes[0][0] <= sizes[1][0] <= sizes[2][0]
        assert sizes[0][1] <= sizes[1][1] <= sizes[2][1]

    def test_hard_cap_failure(self, params):
        hot = BathState.from_mk(params, 700.0, 5950.0)
        with pytest.raises(NumericalError, match="hard cap"):
            fock.choose_cutoff(params, hot, hard_cap=8)

    def test_convergence_of_observables(self, params):
        baths = BathState.from_mk(params, 15.0, 100.0)
        cutoff = fock.choose_cutoff(params, baths)
        bigger = fock.FockCutoff(cutoff.n_max_c + 2, cutoff.n_max_h + 2)
        obs = fock.steady_observables(params, baths, cutoff)
        obs_big = fock.steady_observables(params, baths, bigger)
        assert obs.charge_current_pa == pytest.approx(obs_big.charge_current_pa, rel=1e-6)
        assert obs.power_aw == pytest.approx(obs_big.power_aw, rel=1e-6)
        assert obs.occupation_c == pytest.approx(obs_big.occupation_c, rel=1e-6)


class TestBilinearBuilders:
    def test_bilinear_matches_gaussian_occupations(self, params, gp):
        baths = BathState.from_mk(params, 15.0, 100.0)
        cutoff = fock.FockCutoff(10, 10)
        liouv = fock.bilinear_liouvillian(gp.g, gp.kappa_c, gp.kappa_h,
                                          baths.n_c, baths.n_h, cutoff)
        rho = fock.steady_state(liouv)
        occ_c, occ_h = fock.mode_occupations(rho, cutoff)
        gamma = qt.steady_covariance(gp, baths)
        assert occ_c == pytest.approx(0.5 * (gamma[0, 0] + gamma[2, 2]) - 0.5, rel=1e-8)
        assert occ_h == pytest.approx(0.5 * (gamma[1, 1] + gamma[3, 3]) - 0.5, rel=1e-8)

    def test_bilinear_current_matches_closed_form(self, params, gp):
        baths = BathState.from_mk(params, 15.0, 100.0)
        cutoff = fock.FockCutoff(10, 10)
        liouv = fock.bilinear_liouvillian(gp.g, gp.kappa_c, gp.kappa_h,
                                          baths.n_c, baths.n_h, cutoff)
        rho = fock.steady_state(liouv)
        op = fock.bilinear_current_operator(gp.g, cutoff)
        current = np.trace(rho @ op).real * CURRENT_PA
        assert current == pytest.approx(qt.mean_current(gp, baths), rel=1e-9)


class TestDiagnosticDump:
    def test_writes_plaintext_operators(self, params, tmp_path):
        baths = BathState.from_mk(params, 15.0, 100.0)
        paths = fock.dump_operators(params, baths, fock.FockCutoff(3, 3),
                                    str(tmp_path / "ops"))
        assert len(paths) == 6
        for path in paths:
            text = open(path).read()
            assert text.startswith("#")
            assert len(text.splitlines()) > 3
