import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from numpy.testing import assert_allclose

from aimvqe import exact, model, sim
from aimvqe.noise import apply_kraus, build_noise_model, load_device
from oracle import dense_circuit_unitary


@st.composite
def random_circuits(draw):
    n = draw(st.integers(2, 4))
    ops = []
    for _ in range(draw(st.integers(1, 12))):
        kind = draw(st.sampled_from(["ry", "cz", "cx"]))
        if kind == "ry":
            ops.append(("ry", draw(st.integers(0, n - 1)), draw(st.floats(-7, 7))))
        else:
            a, b = draw(st.lists(st.integers(0, n - 1), min_size=2, max_size=2, unique=True))
            ops.append((kind, a, b))
    return n, ops


def _to_circuit(n, ops):
    c = sim.Circuit(n)
    params = []
    for op in ops:
        if op[0] == "ry":
            c.ry(op[1], param=len(params))
            params.append(op[2])
        elif op[0] == "cz":
            c.cz(op[1], op[2])
        else:
            c.cx(op[1], op[2])
    return c, np.array(params)


@settings(max_examples=60, deadline=None)
@given(random_circuits())
def test_statevector_matches_kron_unitary(case):
    n, ops = case
    c, params = _to_circuit(n, ops)
    u = dense_circuit_unitary(n, ops)
    psi0 = np.random.default_rng(len(ops)).normal(size=1 << n)
    psi0 /= np.linalg.norm(psi0)
    assert_allclose(sim.run_circuit(c, params, psi0), u @ psi0, atol=1e-12)


@settings(max_examples=30, deadline=None)
@given(random_circuits())
def test_noiseless_density_matches_statevector(case):
    n, ops = case
    c, params = _to_circuit(n, ops)
    psi0 = np.zeros(1 << n)
    psi0[1] = 1.0
    psi = sim.run_circuit(c, params, psi0)
    rho = sim.run_circuit_noisy(c, params, psi0, None)
    assert np.abs(rho - np.outer(psi, psi.conj())).max() < 1e-12


def test_run_batch_rows_match_single_runs():
    c = sim.Circuit(3)
    for q in range(3):
        c.ry(q, param=q)
    c.cz(0, 1).cz(1, 2)
    for q in range(3):
        c.ry(q, param=3 + q)
    rng = np.random.default_rng(1)
    xs = rng.uniform(0, 6, size=(4, 6))
    psi0 = sim.basis_state(3, [0])
    batch = sim.run_batch(c, xs, psi0)
    for row, x in zip(batch, xs):
        assert_allclose(row, sim.run_circuit(c, x, psi0), atol=1e-14)


def test_gate_validation():
    with pytest.raises(ValueError):
        sim.Gate("cz", (1, 1))
    with pytest.raises(ValueError):
        sim.Gate("toffoli", (0, 1, 2))
    with pytest.raises(ValueError):
        sim.Circuit(2).ry(2, param=0)
    with pytest.raises(ValueError):
        sim.run_circuit(sim.Circuit(1).ry(0, param=0), [], sim.zero_state(1))


def test_fixed_angle_and_named_gates():
    c = sim.Circuit(1).ry(0, angle=np.pi)
    assert_allclose(sim.run_circuit(c, [], sim.zero_state(1)), [0.0, 1.0], atol=1e-15)
    c = sim.Circuit(1).h(0).sdg(0)
    assert_allclose(sim.run_circuit(c, [], sim.zero_state(1)), [1 / np.sqrt(2), -1j / np.sqrt(2)], atol=1e-15)


def test_stateprep_loads_vector():
    v = np.array([0.0, 3.0, 4.0, 0.0])
    c = sim.Circuit(2).stateprep(v)
    assert_allclose(sim.run_circuit(c, [], sim.zero_state(2)), v / 5)


def test_basis_state_bit_convention():
    psi = sim.basis_state(3, [0, 2])
    assert psi[0b101] == 1.0


def test_basis_probabilities_rotate_correctly():
    plus = np.array([1.0, 1.0]) / np.sqrt(2)
    assert_allclose(sim.basis_probabilities(plus, "X"), [1.0, 0.0], atol=1e-15)
    plus_i = np.array([1.0, 1j]) / np.sqrt(2)
    assert_allclose(sim.basis_probabilities(plus_i, "Y"), [1.0, 0.0], atol=1e-15)


def test_sample_counts_total_and_seed():
    p = np.array([0.1, 0.2, 0.3, 0.4])
    a = sim.sample_counts(p, 1000, np.random.default_rng(5))
    b = sim.sample_counts(p, 1000, np.random.default_rng(5))
    assert a.sum() == 1000 and np.array_equal(a, b)


def test_exact_distributions_reproduce_expectation():
    h = model.aim_qubit_hamiltonian(model.table_params(2))
    groups = model.group_measurement_bases(h)
    psi = np.random.default_rng(2).normal(size=1 << h.n_qubits)
    psi /= np.linalg.norm(psi)
    dists = {b: sim.basis_probabilities(psi, b) for b in groups.bases()}
    assert sim.estimate_from_distributions(h, groups, dists) == pytest.approx(exact.expectation_exact(h, psi), abs=1e-12)


def test_shot_estimate_converges():
    h = model.aim_qubit_hamiltonian(model.table_params(1))
    groups = model.group_measurement_bases(h)
    psi = exact.ground(h).ground_space[:, 0]
    errors = [sim.expectation_shots(h, groups, psi, 20000, s).estimate - exact.expectation_exact(h, psi) for s in range(10)]
    assert abs(np.mean(errors)) < 0.01
    assert np.std(errors) < 0.02


def test_density_probabilities_match_statevector():
    h = model.aim_qubit_hamiltonian(model.table_params(1))
    psi = np.random.default_rng(4).normal(size=16) + 1j * np.random.default_rng(5).normal(size=16)
    psi /= np.linalg.norm(psi)
    rho = sim.density_from_state(psi)
    for b in "XYZ":
        assert_allclose(sim.density_basis_probabilities(rho, b), sim.basis_probabilities(psi, b), atol=1e-12)
    groups = model.group_measurement_bases(h)
    assert sim.expectation_density(h, groups, rho) == pytest.approx(exact.expectation_exact(h, psi), abs=1e-12)


def test_superop_kernels_match_kraus_reference():
    nm = build_noise_model(load_device(), [4, 7, 10])
    rng = np.random.default_rng(0)
    a = rng.normal(size=(8, 8)) + 1j * rng.normal(size=(8, 8))
    rho = a @ a.conj().T
    rho /= np.trace(rho)
    got = sim.apply_superop(rho.copy(), nm.superop_1q(1), (1,))
    assert_allclose(got, apply_kraus(rho, nm.kraus_1q(1), [1], 3), atol=1e-13)
    got = sim.apply_superop(rho.copy(), nm.superop_2q(2, 1), (2, 1))
    assert_allclose(got, apply_kraus(rho, nm.kraus_2q(2, 1), [2, 1], 3), atol=1e-13)


def test_unitary_density_update():
    rho = sim.density_from_state(np.array([1.0, 0.0]))
    out = sim.apply_unitary_1q_density(rho, sim.ry_matrix(np.pi / 2), 0, 1)
    assert_allclose(out, np.full((2, 2), 0.5), atol=1e-15)


def test_density_limit_guard():
    with pytest.raises(ValueError):
        sim.run_circuit_noisy(sim.Circuit(13), None, np.zeros(1 << 13))
