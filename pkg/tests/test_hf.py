import numpy as np
import pytest
from numpy.testing import assert_allclose

from aimvqe import exact, hf, model
from aimvqe.exact import ground_electron_count
from oracle import kron_pauli, particle_numbers, slater_bruteforce

N_EL = {1: 2, 2: 3, 3: 4, 4: 4}


def _zero_u(n_b):
    p = model.table_params(n_b)
    return model.AimParams(p.n_b, p.eps0, p.eps, p.v, 0.0)


@pytest.mark.parametrize("n_b", [1, 2, 3, 4])
def test_non_interacting_slater_state_is_exact(n_b):
    p = _zero_u(n_b)
    n_el = ground_electron_count(p)
    coeffs = hf.ghf_solve(p, n_el)
    spectrum = exact.ground(model.aim_qubit_hamiltonian(p))
    psi = hf.slater_statevector(coeffs, model.chain_ordering(n_b))
    assert exact.fidelity(psi, spectrum) == pytest.approx(1.0, abs=1e-9)


@pytest.mark.parametrize("n_b", [1, 2, 3, 4])
def test_orbitals_unitary_and_energy_bookkeeping(n_b):
    p = model.table_params(n_b)
    coeffs = hf.ghf_solve(p, N_EL[n_b])
    assert np.abs(coeffs.c.conj().T @ coeffs.c - np.eye(p.n_modes)).max() < 1e-8
    h = model.aim_qubit_hamiltonian(p)
    psi = hf.slater_statevector(coeffs, model.chain_ordering(n_b))
    energy = exact.expectation_exact(h, psi)
    assert energy == pytest.approx(coeffs.energy, abs=1e-8)
    assert energy >= exact.ground(h).e0 - 1e-12
    mean, var = exact.particle_number(psi, h.n_qubits)
    assert mean == pytest.approx(N_EL[n_b], abs=1e-10) and var < 1e-10


def test_fidelity_invariant_under_occupied_rotation():
    p = model.table_params(3)
    coeffs = hf.ghf_solve(p, 4)
    ordering = model.chain_ordering(3)
    spectrum = exact.ground(model.aim_qubit_hamiltonian(p))
    f0 = exact.fidelity(hf.slater_statevector(coeffs, ordering), spectrum)
    rng = np.random.default_rng(0)
    q, _ = np.linalg.qr(rng.normal(size=(4, 4)) + 1j * rng.normal(size=(4, 4)))
    c = coeffs.c.astype(complex)
    c[:, :4] = c[:, :4] @ q
    rotated = hf.OrbitalCoeffs(c, 4, coeffs.orbital_energies, coeffs.energy, coeffs.iterations, coeffs.residual)
    assert exact.fidelity(hf.slater_statevector(rotated, ordering), spectrum) == pytest.approx(f0, abs=1e-10)


def test_identity_orbitals_give_product_state():
    c = np.eye(6)
    coeffs = hf.OrbitalCoeffs(c, 2, np.arange(6.0), 0.0, 0, 0.0)
    psi = hf.slater_statevector(coeffs, model.default_ordering(2))
    expected = np.zeros(64)
    expected[0b11] = 1.0
    assert_allclose(psi, expected)
    assert_allclose(hf.mo_reference_state(6, 2), expected)


def test_slater_matches_bruteforce_determinant():
    p = model.table_params(2)
    coeffs = hf.ghf_solve(p, 3)
    ordering = model.chain_ordering(2)
    got = hf.slater_statevector(coeffs, ordering)
    ref = slater_bruteforce(ordering.matrix() @ coeffs.occupied)
    overlap = abs(np.vdot(ref, got))
    assert overlap == pytest.approx(1.0, abs=1e-12)


def test_slater_dimension_mismatch():
    coeffs = hf.ghf_solve(model.table_params(1), 2)
    with pytest.raises(ValueError):
        hf.slater_statevector(coeffs, model.chain_ordering(2))


def test_hf_state_is_product_state_in_mo_basis():
    p = model.table_params(2)
    coeffs = hf.ghf_solve(p, 3)
    terms = model.rotate_to_mo_basis(model.build_aim_hamiltonian(p), coeffs)
    h_mo = model.jordan_wigner(terms, model.default_ordering(2))
    ref = hf.mo_reference_state(6, 3)
    assert exact.expectation_exact(h_mo, ref) == pytest.approx(coeffs.energy, abs=1e-8)


def test_non_convergence_reports_residual():
    with pytest.raises(hf.SCFNotConverged) as info:
        hf.ghf_solve(model.table_params(4), 4, max_iter=2)
    assert info.value.residual > 0


def test_restarts_never_raise_energy():
    # several self-consistent solutions exist; restarts keep the lowest one
    p = model.table_params(4)
    base = hf.ghf_solve(p, 4)
    more = hf.ghf_solve(p, 4, restarts=5, seed=1)
    assert more.energy <= base.energy + 1e-12
    assert more.energy < base.energy - 1e-3


def test_damping_and_diis_agree_on_unique_solution():
    p = model.table_params(2)
    a = hf.ghf_solve(p, 3, method="diis")
    b = hf.ghf_solve(p, 3, method="damping", damping=0.3)
    assert a.energy == pytest.approx(b.energy, abs=1e-8)


def test_argument_validation():
    with pytest.raises(ValueError):
        hf.ghf_solve(model.table_params(1), 4)
    with pytest.raises(ValueError):
        hf.ghf_solve(model.table_params(1), 2, method="broyden")


def test_oracle_number_helper_agrees():
    psi = hf.mo_reference_state(4, 2)
    assert particle_numbers(psi[:, None]) == pytest.approx([2.0])
    assert kron_pauli("Z")[1, 1] == -1
