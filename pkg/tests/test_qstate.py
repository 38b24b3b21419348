import numpy as np
import pytest

import tomokit as tk
from tomokit.errors import ValidationError


def test_density_from_basis_state():
    psi = tk.StateVector(np.array([1.0, 0.0]))
    np.testing.assert_allclose(psi.density().entries, np.diag([1.0, 0.0]), atol=1e-14)


def test_density_from_diagonal_state():
    psi = tk.StateVector(np.array([1.0, 1.0]) / np.sqrt(2.0))
    np.testing.assert_allclose(psi.density().entries, np.full((2, 2), 0.5), atol=1e-14)


def test_density_bell_phi_minus_hand_outer_product():
    rho = tk.bell_phi_minus().density().entries
    expect = np.zeros((4, 4), dtype=complex)
    expect[0, 0] = expect[3, 3] = 0.5
    expect[0, 3] = expect[3, 0] = -0.5
    np.testing.assert_allclose(rho, expect, atol=1e-14)


def test_density_is_projector_onto_input(rng):
    psi = tk.random_state_vector(4, rng)
    rho = psi.density().entries
    np.testing.assert_allclose(rho @ psi.amplitudes, psi.amplitudes, atol=1e-12)
    assert abs(np.trace(rho) - 1.0) < 1e-12


def test_density_rejects_unnormalized():
    with pytest.raises(ValidationError):
        tk.StateVector(np.array([1.0, 1.0]))


class TestFamilyState:
    def test_vv_case(self):
        np.testing.assert_allclose(tk.family_state(0.0, 1.0, 0.0).amplitudes,
                                   [0, 0, 0, 1], atol=1e-14)

    def test_single_term(self):
        np.testing.assert_allclose(tk.family_state(1.0, 0.0, 2.13).amplitudes,
                                   [1, 0, 0, 0], atol=1e-14)

    def test_phase_enters_literally(self):
        s = 1.0 / np.sqrt(2.0)
        amp = tk.family_state(s, s, np.pi / 3).amplitudes
        np.testing.assert_allclose(amp[3], s * np.exp(1j * np.pi / 3), atol=1e-12)

    def test_bell_phi_minus_is_phi_pi(self):
        s = 1.0 / np.sqrt(2.0)
        np.testing.assert_allclose(tk.family_state(s, s, np.pi).amplitudes,
                                   [s, 0, 0, -s], atol=1e-12)

    def test_auto_normalizes_small_drift(self):
        psi = tk.family_state(0.6, 0.8 + 1e-7, 0.0)
        assert abs(np.linalg.norm(psi.amplitudes) - 1.0) < 1e-12

    def test_rejects_large_drift(self):
        with pytest.raises(ValidationError):
            tk.family_state(0.6, 0.9, 0.0)

    def test_rejects_zero(self):
        with pytest.raises(ValidationError):
            tk.family_state(0.0, 0.0, 0.0)

    def test_always_normalized(self, rng):
        for _ in range(50):
            th = rng.uniform(0, 2 * np.pi)
            psi = tk.family_state(np.cos(th), np.sin(th), rng.uniform(0, 2 * np.pi))
            assert abs(np.linalg.norm(psi.amplitudes) - 1.0) < 1e-12


class TestFidelity:
    def test_self_fidelity(self, rng):
        rho = tk.random_density_matrix(4, rng)
        assert tk.fidelity(rho, rho) == pytest.approx(1.0, abs=1e-10)

    def test_orthogonal_pure_states(self):
        hh = tk.family_state(1.0, 0.0, 0.0).density()
        vv = tk.family_state(0.0, 1.0, 0.0).density()
        assert tk.fidelity(hh, vv) == pytest.approx(0.0, abs=1e-12)

    def test_bell_vs_maximally_mixed(self, phi_minus):
        f = tk.fidelity(phi_minus.density(), tk.maximally_mixed(4))
        assert f == pytest.approx(0.25, abs=1e-12)

    def test_symmetry(self, rng):
        a = tk.random_density_matrix(4, rng)
        b = tk.random_density_matrix(4, rng)
        assert tk.fidelity(a, b) == pytest.approx(tk.fidelity(b, a), abs=1e-10)

    def test_pure_reference_reduces_to_expectation(self, rng):
        psi = tk.random_state_vector(4, rng)
        rho = tk.random_density_matrix(4, rng)
        direct = np.real(psi.amplitudes.conj() @ rho.entries @ psi.amplitudes)
        assert tk.fidelity(psi.density(), rho) == pytest.approx(direct, abs=1e-9)

    def test_overlap_rule_for_pure_pairs(self, rng):
        for _ in range(20):
            psi = tk.random_state_vector(4, rng)
            chi = tk.random_state_vector(4, rng)
            overlap = abs(np.vdot(psi.amplitudes, chi.amplitudes)) ** 2
            assert tk.fidelity(psi.density(), chi.density()) == pytest.approx(
                overlap, abs=1e-9)

    def test_unitary_invariance(self, rng):
        from scipy.stats import unitary_group
        a = tk.random_density_matrix(4, rng)
        b = tk.random_density_matrix(4, rng)
        f0 = tk.fidelity(a, b)
        for u in unitary_group.rvs(4, size=5, random_state=7):
            ua = tk.DensityMatrix(u @ a.entries @ u.conj().T)
            ub = tk.DensityMatrix(u @ b.entries @ u.conj().T)
            assert tk.fidelity(ua, ub) == pytest.approx(f0, abs=1e-9)

    def test_dimension_mismatch(self):
        with pytest.raises(ValidationError):
            tk.fidelity(tk.maximally_mixed(2), tk.maximally_mixed(4))


def test_loss_scale_values():
    assert tk.loss_scale(0.9) == pytest.approx(1.0, abs=1e-12)
    assert tk.loss_scale(0.999) == pytest.approx(3.0, abs=1e-12)
    assert tk.loss_scale(0.0) == pytest.approx(0.0, abs=1e-12)


def test_loss_scale_saturates():
    assert tk.loss_scale(1.0) == 12.0
    assert tk.loss_scale(1.0, cap=6.0) == 6.0
    with pytest.raises(ValidationError):
        tk.loss_scale(1.5)


def test_loss_scale_monotone(rng):
    fs = np.sort(rng.uniform(0.0, 0.999999, size=30))
    zs = [tk.loss_scale(f) for f in fs]
    assert np.all(np.diff(zs) >= 0)


def test_density_matrix_invariants_enforced():
    with pytest.raises(ValidationError):
        tk.DensityMatrix(np.array([[0.5, 0.1], [0.3, 0.5]]))  # not Hermitian
    with pytest.raises(ValidationError):
        tk.DensityMatrix(np.diag([0.7, 0.7]))  # trace 1.4
    with pytest.raises(ValidationError):
        tk.DensityMatrix(np.diag([1.5, -0.5]))  # negative eigenvalue


def test_state_file_round_trip_pure(tmp_path, rng):
    psi = tk.random_state_vector(4, rng)
    path = tmp_path / "psi.json"
    tk.save_state(psi, path)
    back = tk.load_state(path)
    assert isinstance(back, tk.StateVector)
    np.testing.assert_allclose(back.amplitudes, psi.amplitudes, atol=1e-15)


def test_state_file_round_trip_mixed(tmp_path, rng):
    rho = tk.random_density_matrix(4, rng)
    path = tmp_path / "rho.json"
    tk.save_state(rho, path)
    back = tk.load_state(path)
    assert isinstance(back, tk.DensityMatrix)
    np.testing.assert_allclose(back.entries, rho.entries, atol=1e-15)


def test_state_file_errors(tmp_path):
    bad = tmp_path / "bad.json"
    bad.write_text("{not json")
    with pytest.raises(ValidationError):
        tk.load_state(bad)
    bad.write_text('{"dim": 4, "kind": "pure", "data": [[1, 0]]}')
    with pytest.raises(ValidationError):
        tk.load_state(bad)
