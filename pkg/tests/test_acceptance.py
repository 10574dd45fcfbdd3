"""Reproduction criteria A1-A13. Tolerances are pinned in the constants below.

The sweep-based criteria (10-qubit, 50 seeds) take several minutes each on
one core; they carry the ``slow`` marker so ``pytest -m "not slow"`` skips them.
"""

from functools import lru_cache

import numpy as np
import pytest

from aimvqe import exact, hf, model
from aimvqe.ansatz import AnsatzSpec, InitStrategy, build_ansatz, circuit_unitary, init_params
from aimvqe.opt import Objective, OptimizerConfig, fd_gradient, minimize_nft, minimize_qn, parameter_shift_gradient
from aimvqe.vqe import RunConfig, build_problem, initial_gradient, make_objective, run_vqe, seed_sweep

N_SEEDS = 50
HF_F10 = 0.902
CHEM_ACC_EV = 0.0435  # 0.0016 Ha
TABLE_N = {1: 2, 2: 3, 3: 4, 4: 4}
HF_REF = {1: 0.787, 2: 0.798, 3: 0.889, 4: 0.902}


@lru_cache(maxsize=None)
def sweep(n_b, layers, init="onion", initial_state="hf", entangler="cz", n_seeds=N_SEEDS):
    cfg = RunConfig.make(n_b, layers=layers, init=init, initial_state=initial_state, entangler=entangler)
    records = seed_sweep(cfg, range(n_seeds))
    assert all(r.error is None for r in records), [r.error for r in records if r.error]
    return records


def fidelities(records):
    return np.array([r.final_fidelity for r in records])


def test_a1_ground_electron_numbers(verdict):
    counts = [exact.ground_electron_count(model.table_params(n_b)) for n_b in (1, 2, 3, 4)]
    verdict("A1", counts == [2, 3, 4, 4], f"ground electron numbers {counts} (expected [2, 3, 4, 4])")


def test_a2_onion_identity(verdict):
    worst = 0.0
    for n in (4, 6, 8, 10):
        for layers in (2, 4):
            spec = AnsatzSpec(n, layers)
            circuit = build_ansatz(spec)
            for seed in range(20):
                u = circuit_unitary(circuit, init_params(spec, InitStrategy("onion", seed)))
                worst = max(worst, float(np.abs(u - np.eye(1 << n)).max()))
    verdict("A2", worst < 1e-10, f"max |U - I| = {worst:.2e} over n in {{4,6,8,10}}, L in {{2,4}}, 20 seeds (< 1e-10)")


@pytest.mark.slow
def test_a3_seed_independence(verdict):
    f = fidelities(sweep(4, 4))
    centre = 0.5 * (f.max() + f.min())
    spread = f.max() - f.min()
    ok = spread <= 2e-3 and 0.955 <= centre <= 0.985
    verdict(
        "A3",
        ok,
        f"10q onion L=4: F min/median/max {f.min():.4f}/{np.median(f):.4f}/{f.max():.4f}; "
        f"half-spread {spread / 2:.4f} (<= 1e-3), centre {centre:.4f} (in [0.955, 0.985])",
    )


@pytest.mark.slow
def test_a4_layer_scaling(verdict):
    f2 = fidelities(sweep(4, 2)).max()
    f4 = fidelities(sweep(4, 4)).max()
    small = {n_b: max(fidelities(sweep(n_b, 2)).max(), fidelities(sweep(n_b, 4)).max()) for n_b in (1, 2, 3)}
    small[4] = max(f2, f4)
    ok = 0.92 <= f2 <= 0.96 and 0.95 <= f4 <= 0.985 and all(v >= 0.94 for v in small.values())
    sizes = ", ".join(f"{2 * (k + 1)}q {v:.4f}" for k, v in small.items())
    verdict("A4", ok, f"10q best F: L=2 {f2:.4f} (in [0.92, 0.96]), L=4 {f4:.4f} (in [0.95, 0.985]); best at L<=4: {sizes} (>= 0.94)")


def test_a5_mean_field_fidelities(verdict):
    got = {n_b: build_problem(n_b).hf_fidelity for n_b in (1, 2, 3, 4)}
    controls = []
    for n_b in (1, 2, 3, 4):
        p = model.table_params(n_b)
        p0 = model.AimParams(p.n_b, p.eps0, p.eps, p.v, 0.0)
        psi = hf.slater_statevector(hf.ghf_solve(p0, exact.ground_electron_count(p0)), model.chain_ordering(n_b))
        controls.append(exact.fidelity(psi, exact.ground(model.aim_qubit_hamiltonian(p0))))
    ok = all(abs(got[k] - HF_REF[k]) <= 0.02 for k in got) and min(controls) >= 1 - 1e-9
    detail = ", ".join(f"{2 * (k + 1)}q {got[k]:.4f} (ref {HF_REF[k]})" for k in got)
    verdict("A5", ok, f"{detail}, tolerance 0.02; U=0 control min F {min(controls):.12f} (>= 1 - 1e-9)")


@pytest.mark.slow
def test_a6_chemical_accuracy(verdict):
    e4 = min(r.energy_error for r in sweep(1, 2))
    e6 = min(r.energy_error for r in sweep(2, 4))
    ok = e4 < 1e-4 and e6 < CHEM_ACC_EV
    verdict("A6", ok, f"best-of-{N_SEEDS} energy error: 4q L=2 {e4:.2e} eV (< 1e-4), 6q L=4 {e6:.2e} eV (< {CHEM_ACC_EV})")


@pytest.mark.slow
def test_a7_random_init_baseline(verdict):
    frac = float(np.mean(fidelities(sweep(4, 4, init="random")) > HF_F10))
    zero_max = fidelities(sweep(4, 4, initial_state="zero", n_seeds=20)).max()
    ok = 0.05 <= frac <= 0.30 and zero_max < HF_F10
    verdict("A7", ok, f"random init fraction above {HF_F10}: {frac:.2f} (in [0.05, 0.30]); zero-state max F {zero_max:.4f} (< {HF_F10})")


def test_a8_measurement_structure(verdict):
    groups = [len(model.group_measurement_bases(model.aim_qubit_hamiltonian(model.table_params(n_b)))) for n_b in (1, 2, 3, 4)]
    ao = model.count_pauli_strings(build_problem(4).hamiltonian)
    mo = model.count_pauli_strings(build_problem(4, "mo").hamiltonian)
    ok = groups == [3, 3, 3, 3] and mo / ao > 10
    verdict("A8", ok, f"measurement groups {groups} (all 3); 10q MO/AO strings {mo}/{ao} = {mo / ao:.1f} (> 10)")


def test_a9_mo_vanishing_gradient(verdict):
    g_mo = float(np.abs(initial_gradient(RunConfig.make(4, layers=4, basis="mo"))).max())
    g_ao = float(np.abs(initial_gradient(RunConfig.make(4, layers=4))).max())
    verdict("A9", g_mo < 1e-10 and g_ao > 1e-6, f"10q first gradient inf-norm: MO {g_mo:.1e} (< 1e-10), AO {g_ao:.3f} (> 1e-6)")


@pytest.mark.slow
def test_a10_noisy_behaviour(verdict):
    # exact baseline uses the same optimizer and seed, so only the noise differs
    seed = 0
    ratios, drops = {}, {}
    for n_b in (2, 3, 4):
        base = run_vqe(RunConfig.make(n_b, layers=2, seed=seed, optimizer=OptimizerConfig.nft()))
        noisy = run_vqe(RunConfig.make(n_b, layers=2, seed=seed, eval_mode="noisy", shots=10240))
        ratios[n_b] = noisy.noisy_energy_error / base.energy_error
        drops[n_b] = base.final_fidelity - noisy.final_fidelity
        if n_b == 4:
            f_10240 = noisy.final_fidelity
    f_1024 = run_vqe(RunConfig.make(4, layers=2, seed=seed, eval_mode="noisy", shots=1024)).final_fidelity
    ok = all(3 <= r <= 30 for r in ratios.values()) and all(d <= 0.03 for d in drops.values()) and f_10240 - f_1024 >= 0.01
    r = ", ".join(f"{2 * (k + 1)}q {v:.1f}" for k, v in ratios.items())
    d = ", ".join(f"{2 * (k + 1)}q {v:+.4f}" for k, v in drops.items())
    verdict(
        "A10",
        ok,
        f"(a) noisy/exact error ratio {r} (in [3, 30]); (b) fidelity drop {d} (<= 0.03); "
        f"(c) 10q F 10240 shots {f_10240:.4f} vs 1024 shots {f_1024:.4f} (drop >= 0.01)",
    )


@pytest.mark.slow
def test_a11_cx_zero_state_variant(verdict):
    records = sweep(4, 7, init="random", initial_state="zero", entangler="cx")
    best = max(records, key=lambda r: r.final_fidelity)
    e_best = min(r.energy_error for r in records)
    ok = best.final_fidelity >= 0.98 and e_best <= 0.02
    verdict("A11", ok, f"10q zero state, CX, L=7, random init, best of {N_SEEDS}: F {best.final_fidelity:.4f} (>= 0.98), E - E0 {e_best:.4f} eV (<= 0.02)")


def test_a12_optimizer_properties(verdict):
    rng = np.random.default_rng(0)
    amps, phases = rng.uniform(0.2, 2.0, 6), rng.uniform(-np.pi, np.pi, 6)
    f = Objective(lambda x, i: float(np.sum(amps * np.cos(x - phases))))
    _, trace = minimize_nft(f, np.zeros(6), OptimizerConfig.nft(max_iters=1))
    nft_err = abs(trace.energies[-1] + amps.sum())

    cfg = RunConfig.make(2, layers=2, seed=0)
    problem = build_problem(2)
    obj = make_objective(cfg, problem, build_ansatz(cfg.ansatz), problem.hf_state)
    x = init_params(cfg.ansatz, cfg.init) + rng.normal(scale=0.3, size=cfg.ansatz.n_params)
    eps = 0.01
    scale = sum(abs(c) for c, _ in problem.hamiltonian.terms)
    fd_dev = float(np.abs(fd_gradient(obj, x, eps) - parameter_shift_gradient(obj, x)).max())

    _, qn = minimize_qn(obj, init_params(cfg.ansatz, cfg.init), OptimizerConfig.qn(max_evals=3000))
    worst_rise = float(np.max(np.diff(qn.energies)))
    ok = nft_err < 1e-12 and fd_dev < 5 * eps * scale and worst_rise <= 1e-12
    verdict(
        "A12",
        ok,
        f"NFT one-cycle error {nft_err:.1e} (< 1e-12); FD vs parameter shift {fd_dev:.2e} (< {5 * eps * scale:.2f}); "
        f"QN largest energy rise {worst_rise:.1e} (<= 1e-12)",
    )


@pytest.mark.slow
def test_a13_pi_initialization(verdict):
    pi_frac = float(np.mean(fidelities(sweep(4, 4, init="pi")) > HF_F10))
    onion_frac = float(np.mean(fidelities(sweep(4, 4)) > HF_F10))
    ok = pi_frac < onion_frac and pi_frac < 0.60
    verdict("A13", ok, f"fraction above {HF_F10}: pi {pi_frac:.2f} vs onion {onion_frac:.2f} (pi < onion and pi < 0.60)")
