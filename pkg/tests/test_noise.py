import json
import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from numpy.testing import assert_allclose

from aimvqe import noise, sim
from aimvqe.opt import OptimizerConfig
from aimvqe.vqe import DEFAULT_LAYOUTS, RunConfig, run_vqe


def _device_doc(**qubit_overrides):
    q = {"t1_us": 100.0, "t2_us": 150.0, "readout": [[0.99, 0.01], [0.02, 0.98]], "gate_1q": {"error": 0.001, "duration_ns": 35.0}}
    q.update(qubit_overrides)
    return {"qubits": [dict(q), dict(q)], "edges": [{"pair": [0, 1], "gate_2q": {"error": 0.01, "duration_ns": 300.0}}]}


def _write(tmp_path, doc):
    path = tmp_path / "dev.json"
    path.write_text(json.dumps(doc))
    return path


def test_bundled_device_loads_with_target_means():
    d = noise.load_device()
    assert d.n_qubits == 27
    assert np.mean([q.t1_us for q in d.qubits]) == pytest.approx(120.0, abs=0.5)
    assert np.mean([q.t2_us for q in d.qubits]) == pytest.approx(124.0, abs=0.5)
    assert "Approximate" in d.description
    assert all(q.t2_us <= 2 * q.t1_us for q in d.qubits)


def test_device_json_roundtrip(tmp_path):
    d = noise.load_device()
    back = noise.load_device(_write(tmp_path, noise.device_to_json(d)))
    assert back.qubits == d.qubits and back.edges == d.edges


def test_schema_errors_name_the_field(tmp_path):
    doc = _device_doc()
    del doc["qubits"][1]["t1_us"]
    with pytest.raises(noise.DeviceError, match="qubits/1"):
        noise.load_device(_write(tmp_path, doc))
    doc = _device_doc()
    doc["edges"][0]["gate_2q"]["error"] = 1.5
    with pytest.raises(noise.DeviceError, match="edges/0/gate_2q/error"):
        noise.load_device(_write(tmp_path, doc))


def test_unphysical_t2_rejected(tmp_path):
    with pytest.raises(noise.DeviceError, match="T2"):
        noise.load_device(_write(tmp_path, _device_doc(t2_us=250.0)))


def test_readout_rows_must_sum_to_one(tmp_path):
    with pytest.raises(noise.DeviceError, match="readout"):
        noise.load_device(_write(tmp_path, _device_doc(readout=[[0.9, 0.05], [0.0, 1.0]])))


def test_null_times_mean_no_relaxation(tmp_path):
    d = noise.load_device(_write(tmp_path, _device_doc(t1_us=None, t2_us=None)))
    assert math.isinf(d.qubits[0].t1_us)


@pytest.mark.parametrize(
    "layout",
    [[4, 7, 10, 12], [3, 2, 1, 4, 7, 10, 12, 13, 14, 16], *DEFAULT_LAYOUTS.values()],
)
def test_reference_layouts_accepted(layout):
    d = noise.load_device()
    assert noise.embed_layout(d, len(layout), layout) == layout


def test_bad_layouts_rejected():
    d = noise.load_device()
    with pytest.raises(noise.DeviceError, match="coupled"):
        noise.embed_layout(d, 2, [0, 5])
    with pytest.raises(noise.DeviceError, match="injective"):
        noise.embed_layout(d, 3, [1, 2, 1])
    with pytest.raises(noise.DeviceError):
        noise.embed_layout(d, 30)


def test_auto_layout_is_cheapest_path():
    d = noise.load_device()
    auto = noise.embed_layout(d, 4)
    cost = lambda p: sum(d.edge(a, b).error_2q for a, b in zip(p, p[1:]))  # noqa: E731
    assert cost(auto) <= cost([4, 7, 10, 12]) + 1e-15
    assert noise.embed_layout(d, 4, auto) == auto


def test_zero_noise_model_is_identity():
    nm = noise.ideal_noise_model(3)
    assert_allclose(nm.superop_1q(0), np.eye(4), atol=1e-15)
    assert_allclose(nm.superop_2q(0, 1), np.eye(16), atol=1e-15)
    p = np.random.default_rng(0).dirichlet(np.ones(8))
    assert_allclose(nm.apply_measurement(p, 3, gate_noise=True), p, atol=1e-15)


def test_zero_noise_density_matches_statevector():
    c = sim.Circuit(3)
    for q in range(3):
        c.ry(q, param=q)
    c.cz(0, 1).cx(1, 2)
    x = np.array([0.3, 1.1, -0.7])
    psi = sim.run_circuit(c, x, sim.zero_state(3))
    rho = sim.run_circuit_noisy(c, x, sim.zero_state(3), noise.ideal_noise_model(3))
    trace_distance = 0.5 * np.abs(np.linalg.eigvalsh(rho - np.outer(psi, psi.conj()))).sum()
    assert trace_distance < 1e-10


def test_readout_confusion_definition(tmp_path):
    nm = noise.build_noise_model(noise.load_device(_write(tmp_path, _device_doc())), [0, 1])
    p = nm.apply_measurement(np.array([1.0, 0.0, 0.0, 0.0]), 2)
    assert p[0b00] + p[0b10] == pytest.approx(0.99, abs=1e-15)


def test_amplitude_damping_halves_excited_population():
    t1 = 50.0
    kraus = noise.thermal_relaxation_kraus(t1, 2 * t1, t1 * 1e3 * math.log(2))
    rho = np.diag([0.0, 1.0]).astype(complex)
    out = sum(k @ rho @ k.conj().T for k in kraus)
    assert out[1, 1].real == pytest.approx(0.5, abs=1e-12)


def test_dephasing_matches_t2():
    t1, t2, dur = 100.0, 60.0, 500.0
    kraus = noise.thermal_relaxation_kraus(t1, t2, dur)
    plus = np.full((2, 2), 0.5, dtype=complex)
    out = sum(k @ plus @ k.conj().T for k in kraus)
    assert abs(out[0, 1]) == pytest.approx(0.5 * math.exp(-dur * 1e-3 / t2), abs=1e-12)


@given(st.floats(0, 1), st.integers(1, 2))
def test_depolarizing_is_cptp(p, n):
    assert noise.kraus_completeness_error(noise.depolarizing_kraus(p, n)) < 1e-10


@given(st.floats(1.0, 500.0), st.floats(0.01, 1.0), st.floats(1.0, 2000.0))
def test_thermal_relaxation_is_cptp(t1, ratio, dur):
    kraus = noise.thermal_relaxation_kraus(t1, 2 * t1 * ratio, dur)
    assert noise.kraus_completeness_error(kraus) < 1e-10


def test_bundled_channels_are_cptp_and_superops_agree():
    nm = noise.build_noise_model(noise.load_device(), DEFAULT_LAYOUTS[10])
    rng = np.random.default_rng(1)
    for q in range(10):
        k = nm.kraus_1q(q)
        assert noise.kraus_completeness_error(k) < 1e-10
    for a in range(9):
        k = nm.kraus_2q(a, a + 1)
        assert noise.kraus_completeness_error(k) < 1e-10
        m = rng.normal(size=(4, 4)) + 1j * rng.normal(size=(4, 4))
        direct = sum(x @ m @ x.conj().T for x in k)
        via_superop = (nm.superop_2q(a, a + 1) @ m.reshape(-1)).reshape(4, 4)
        assert_allclose(via_superop, direct, atol=1e-13)


def test_measurement_map_is_stochastic():
    nm = noise.build_noise_model(noise.load_device(), DEFAULT_LAYOUTS[4])
    for q in range(4):
        for gate_noise in (False, True):
            assert_allclose(nm.measurement_map(q, gate_noise).sum(axis=0), 1.0, atol=1e-14)


def test_scaled_device():
    d = noise.load_device()
    s = d.scaled(2.0)
    assert s.qubits[0].error_1q == pytest.approx(2 * d.qubits[0].error_1q)
    assert s.qubits[0].t1_us == d.qubits[0].t1_us
    assert sum(s.qubits[3].readout[1]) == pytest.approx(1.0)


def test_more_noise_never_raises_noisy_fidelity(tmp_path):
    base = noise.load_device()
    fidelities = []
    for scale in (0.5, 1.0, 4.0):
        path = tmp_path / f"x{scale}.json"
        path.write_text(json.dumps(noise.device_to_json(base.scaled(scale))))
        row = []
        for seed in range(5):
            cfg = RunConfig.make(
                1, layers=2, seed=seed, eval_mode="noisy", shots=None, device=str(path), layout=[4, 7, 10, 12],
                optimizer=OptimizerConfig.nft(max_evals=256),
            )
            row.append(run_vqe(cfg).noisy_fidelity)
        fidelities.append(row)
    f = np.array(fidelities)
    votes = np.sum(np.all(np.diff(f, axis=0) <= 0, axis=0))
    assert votes >= 3
