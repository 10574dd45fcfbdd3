"""Variational runs: problem setup, single runs, seed sweeps and their records."""

from __future__ import annotations

import csv
import functools
import json
import os
import time
import traceback
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np

from . import exact
from .ansatz import AnsatzSpec, InitStrategy, build_ansatz, init_params
from .hf import OrbitalCoeffs, ghf_solve, mo_reference_state, slater_statevector
from .model import (
    AimParams,
    PauliSum,
    build_aim_hamiltonian,
    default_ordering,
    group_measurement_bases,
    jordan_wigner,
    make_ordering,
    rotate_to_mo_basis,
    table_params,
)
from .noise import build_noise_model, embed_layout, load_device
from .opt import Objective, OptimizerConfig, OptTrace, parameter_shift_gradient, run_optimizer
from .sim import (
    expectation_density,
    expectation_shots,
    expectation_shots_density,
    run_batch,
    run_circuit,
    run_circuit_noisy,
)

BASES = ("ao", "mo")
INITIAL_STATES = ("hf", "zero", "custom")
EVAL_MODES = ("exact", "shots", "noisy")

# device paths used for each register width when no layout is requested
DEFAULT_LAYOUTS = {
    4: [4, 7, 10, 12],
    6: [4, 7, 10, 12, 13, 14],
    8: [1, 4, 7, 10, 12, 13, 14, 16],
    10: [3, 2, 1, 4, 7, 10, 12, 13, 14, 16],
}

CSV_COLUMNS = [
    "seed",
    "init",
    "layers",
    "n_qubits",
    "eval_mode",
    "final_energy_eV",
    "energy_error_eV",
    "fidelity",
    "evals",
    "termination",
    "initial_state",
    "entangler",
    "basis",
    "shots",
    "noisy_energy_error_eV",
    "noisy_fidelity",
]


# ---------------------------------------------------------------------------
# Problem setup
# ---------------------------------------------------------------------------


@dataclass
class Problem:
    """Everything fixed by the model and the orbital basis.

    Attributes:
        params: Model parameters.
        basis: ``"ao"`` (site orbitals, chain qubit order) or ``"mo"``
            (mean-field orbitals, qubit ``k`` = orbital ``k``).
        hamiltonian: Qubit Hamiltonian.
        matrix: Sparse matrix of ``hamiltonian``.
        spectrum: Exact ground space.
        n_electrons: Ground-state particle number.
        orbitals: Mean-field solution.
        hf_state: Mean-field determinant in this basis.
    """

    params: AimParams
    basis: str
    hamiltonian: PauliSum
    matrix: object
    spectrum: exact.Spectrum
    n_electrons: int
    orbitals: OrbitalCoeffs
    hf_state: np.ndarray
    ordering: str = "chain"

    @property
    def n_qubits(self) -> int:
        return self.hamiltonian.n_qubits

    @property
    def e0(self) -> float:
        return self.spectrum.e0

    @functools.cached_property
    def groups(self):
        try:
            return group_measurement_bases(self.hamiltonian)
        except ValueError as exc:
            raise ValueError(
                f"sampled estimation needs the three-basis grouping, unavailable for this Hamiltonian: {exc}"
            ) from None

    @functools.cached_property
    def hf_fidelity(self) -> float:
        return exact.fidelity(self.hf_state, self.spectrum)


@functools.lru_cache(maxsize=16)
def _cached_problem(params: AimParams, basis: str, ordering: str) -> Problem:
    return _build_problem(params, basis, ordering)


def build_problem(params: AimParams | int, basis: str = "ao", ordering: str = "chain") -> Problem:
    """Hamiltonian, exact ground space, and mean-field state (memoized per process)."""
    if isinstance(params, (int, np.integer)):
        params = table_params(int(params))
    basis = basis.lower()
    if basis not in BASES:
        raise ValueError(f"basis must be one of {BASES}, got {basis!r}")
    return _cached_problem(params, basis, ordering)


def _build_problem(params: AimParams, basis: str, ordering: str) -> Problem:
    n_b = params.n_b
    n_el = exact.ground_electron_count(params)
    orbitals = ghf_solve(params, n_el)
    fermion_terms = build_aim_hamiltonian(params)
    if basis == "ao":
        order = make_ordering(ordering, n_b)
        h = jordan_wigner(fermion_terms, order)
        hf_state = slater_statevector(orbitals, order)
    else:
        h = jordan_wigner(rotate_to_mo_basis(fermion_terms, orbitals), default_ordering(n_b))
        hf_state = mo_reference_state(h.n_qubits, n_el)
    return Problem(
        params=params,
        basis=basis,
        hamiltonian=h,
        matrix=exact.pauli_sum_to_matrix(h, sparse=True),
        spectrum=exact.ground(h),
        n_electrons=n_el,
        orbitals=orbitals,
        hf_state=hf_state,
        ordering=ordering if basis == "ao" else "orbital",
    )


# ---------------------------------------------------------------------------
# Configuration and records
# ---------------------------------------------------------------------------


@dataclass
class RunConfig:
    """One variational run.

    Attributes:
        n_b: Bath size (table row); ignored when ``params`` is given.
        ansatz: Circuit shape; its width must be ``2 (n_b + 1)``.
        init: Parameter initialization.
        optimizer: Optimizer and budget.
        basis: ``"ao"`` or ``"mo"``.
        initial_state: ``"hf"``, ``"zero"`` or ``"custom"``.
        custom_state: Amplitudes for ``"custom"``.
        eval_mode: ``"exact"``, ``"shots"`` or ``"noisy"``.
        shots: Shots per measurement basis (sampled modes); ``None`` in noisy
            mode means the infinite-shot density-matrix value.
        device: Device JSON path (``None`` = bundled approximate device).
        layout: Device qubits for the register (``None`` = default path for
            the width, else the lowest-error path).
        seed: Seeds the initialization and the shot sampling.
        params: Explicit model parameters overriding ``n_b``.
    """

    n_b: int
    ansatz: AnsatzSpec
    init: InitStrategy = field(default_factory=InitStrategy)
    optimizer: OptimizerConfig = field(default_factory=OptimizerConfig)
    basis: str = "ao"
    initial_state: str = "hf"
    custom_state: np.ndarray | None = None
    eval_mode: str = "exact"
    shots: int | None = 10240
    device: str | None = None
    layout: list[int] | None = None
    seed: int = 0
    params: AimParams | None = None
    ordering: str = "chain"

    def __post_init__(self):
        self.basis = self.basis.lower()
        self.initial_state = self.initial_state.lower()
        self.eval_mode = self.eval_mode.lower()
        if self.basis not in BASES:
            raise ValueError(f"basis must be one of {BASES}")
        if self.initial_state not in INITIAL_STATES:
            raise ValueError(f"initial_state must be one of {INITIAL_STATES}")
        if self.eval_mode not in EVAL_MODES:
            raise ValueError(f"eval_mode must be one of {EVAL_MODES}")
        if self.params is not None:
            self.n_b = self.params.n_b
        n = 2 * (self.n_b + 1)
        if self.ansatz.n_qubits != n:
            raise ValueError(f"ansatz has {self.ansatz.n_qubits} qubits but n_b={self.n_b} needs {n}")
        if self.initial_state == "custom":
            if self.custom_state is None:
                raise ValueError("initial_state 'custom' needs custom_state")
            self.custom_state = np.asarray(self.custom_state)
            if self.custom_state.shape != (1 << n,):
                raise ValueError(f"custom_state must have {1 << n} amplitudes")
        if self.eval_mode == "shots" and (self.shots is None or self.shots < 1):
            raise ValueError("shots mode needs a positive shot count")
        if self.layout is not None and len(self.layout) != n:
            raise ValueError(f"layout must list {n} device qubits")

    @property
    def n_qubits(self) -> int:
        return self.ansatz.n_qubits

    @classmethod
    def make(
        cls,
        n_b: int,
        layers: int = 4,
        init: str = "onion",
        seed: int = 0,
        entangler: str = "cz",
        optimizer: OptimizerConfig | None = None,
        **kw,
    ) -> "RunConfig":
        """Shorthand building the nested ansatz/init/optimizer fields."""
        n = 2 * (n_b + 1)
        scale = kw.pop("near_zero_scale", 0.01)
        if optimizer is None:
            optimizer = OptimizerConfig.qn() if kw.get("eval_mode", "exact") == "exact" else OptimizerConfig.nft()
        return cls(
            n_b=n_b,
            ansatz=AnsatzSpec(n, layers, entangler),
            init=InitStrategy(init, seed, scale),
            optimizer=optimizer,
            seed=seed,
            **kw,
        )

    def with_seed(self, seed: int) -> "RunConfig":
        return replace(self, seed=seed, init=replace(self.init, seed=seed))

    def to_dict(self) -> dict:
        return {
            "n_b": self.n_b,
            "ansatz": self.ansatz.to_dict(),
            "init": {"kind": self.init.kind, "seed": self.init.seed, "near_zero_scale": self.init.near_zero_scale},
            "optimizer": self.optimizer.to_dict(),
            "basis": self.basis,
            "initial_state": self.initial_state,
            "custom_state": None if self.custom_state is None else np.real_if_close(self.custom_state).tolist(),
            "eval_mode": self.eval_mode,
            "shots": self.shots,
            "device": self.device,
            "layout": self.layout,
            "seed": self.seed,
            "params": None if self.params is None else self.params.to_dict(),
            "ordering": self.ordering,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "RunConfig":
        d = dict(d)
        n_b = int(d.pop("n_b"))
        params = d.pop("params", None)
        if params is not None:
            params = AimParams.from_dict(params)
            n_b = params.n_b
        a = d.pop("ansatz", {})
        if isinstance(a, dict):
            a = dict(a)
            a.setdefault("n_qubits", 2 * (n_b + 1))
            emap = a.pop("entangling_map", None)
            ansatz = AnsatzSpec(
                int(a["n_qubits"]), int(a.get("n_layers", 4)), a.get("entangler", "cz"), None if emap is None else tuple(map(tuple, emap))
            )
        else:
            ansatz = a
        seed = int(d.pop("seed", 0))
        i = d.pop("init", {})
        init = InitStrategy(**{"seed": seed, **i}) if isinstance(i, dict) else i
        o = d.pop("optimizer", None)
        mode = d.get("eval_mode", "exact")
        if o is None:
            optimizer = OptimizerConfig.qn() if mode == "exact" else OptimizerConfig.nft()
        elif isinstance(o, dict):
            o = dict(o)
            kind = o.pop("kind", "qn")
            optimizer = getattr(OptimizerConfig, kind)(**o)
        else:
            optimizer = o
        return cls(n_b=n_b, ansatz=ansatz, init=init, optimizer=optimizer, seed=seed, params=params, **d)


@dataclass
class VqeRunRecord:
    config: dict
    trace: OptTrace
    final_params: np.ndarray
    final_energy: float
    energy_error: float
    final_fidelity: float
    initial_energy: float
    initial_fidelity: float
    e0: float
    hf_fidelity: float
    wall_time: float
    noisy_energy: float | None = None
    noisy_energy_error: float | None = None
    noisy_fidelity: float | None = None
    layout: list[int] | None = None
    error: str | None = None

    @property
    def seed(self) -> int:
        return self.config["seed"]

    def to_dict(self) -> dict:
        return {
            "config": self.config,
            "trace": self.trace.to_dict(),
            "final_params": np.asarray(self.final_params).tolist(),
            "final_energy": self.final_energy,
            "energy_error": self.energy_error,
            "final_fidelity": self.final_fidelity,
            "initial_energy": self.initial_energy,
            "initial_fidelity": self.initial_fidelity,
            "e0": self.e0,
            "hf_fidelity": self.hf_fidelity,
            "wall_time": self.wall_time,
            "noisy_energy": self.noisy_energy,
            "noisy_energy_error": self.noisy_energy_error,
            "noisy_fidelity": self.noisy_fidelity,
            "layout": self.layout,
            "error": self.error,
        }

    def to_json(self, **kw) -> str:
        return json.dumps(self.to_dict(), **kw)

    @classmethod
    def failed(cls, cfg: RunConfig, message: str) -> "VqeRunRecord":
        nan = float("nan")
        trace = OptTrace(termination="error", message=message)
        return cls(cfg.to_dict(), trace, np.array([]), nan, nan, nan, nan, nan, nan, nan, 0.0, error=message)


# ---------------------------------------------------------------------------
# Runs
# ---------------------------------------------------------------------------


def initial_state(cfg: RunConfig, problem: Problem) -> np.ndarray:
    if cfg.initial_state == "hf":
        return problem.hf_state
    if cfg.initial_state == "zero":
        psi = np.zeros(1 << problem.n_qubits)
        psi[0] = 1.0
        return psi
    psi = np.asarray(cfg.custom_state)
    return psi / np.linalg.norm(psi)


def _resolve_noise(cfg: RunConfig):
    desc = load_device(cfg.device)
    requested = cfg.layout
    if requested is None and cfg.device is None:
        requested = DEFAULT_LAYOUTS.get(cfg.n_qubits)
    layout = embed_layout(desc, cfg.n_qubits, requested)
    return build_noise_model(desc, layout), layout


def _eval_seed(seed: int, index: int) -> int:
    return int(np.random.SeedSequence([seed, index]).generate_state(1)[0])


def make_objective(cfg: RunConfig, problem: Problem, circuit, psi0, noise=None) -> Objective:
    """Energy objective for the configured evaluation mode."""
    if cfg.eval_mode == "exact":
        mat = problem.matrix

        def batch(xs):
            return exact.expectations_batch(mat, run_batch(circuit, xs, psi0))

        return Objective(batch_func=batch, mode="exact")
    h, groups = problem.hamiltonian, problem.groups
    if cfg.eval_mode == "shots":

        def sampled(x, i):
            return expectation_shots(h, groups, run_circuit(circuit, x, psi0), cfg.shots, _eval_seed(cfg.seed, i)).estimate

        return Objective(sampled, mode="shots")

    def noisy(x, i):
        rho = run_circuit_noisy(circuit, x, psi0, noise)
        if cfg.shots is None:
            return expectation_density(h, groups, rho, noise)
        return expectation_shots_density(h, groups, rho, cfg.shots, _eval_seed(cfg.seed, i), noise).estimate

    return Objective(noisy, mode="noisy")


def run_vqe(cfg: RunConfig) -> VqeRunRecord:
    """Optimize, then score the optimized parameters on the noiseless statevector.

    Noisy runs additionally report the infinite-shot noisy energy and the
    ground-space population of the noisy final state.
    """
    t0 = time.perf_counter()
    problem = build_problem(cfg.params if cfg.params is not None else cfg.n_b, cfg.basis, cfg.ordering)
    circuit = build_ansatz(cfg.ansatz)
    psi0 = initial_state(cfg, problem)
    x0 = init_params(cfg.ansatz, cfg.init)
    noise, layout = _resolve_noise(cfg) if cfg.eval_mode == "noisy" else (None, None)
    objective = make_objective(cfg, problem, circuit, psi0, noise)
    optimizer = cfg.optimizer
    if optimizer.kind == "spsa" and optimizer.seed == 0:
        optimizer = replace(optimizer, seed=cfg.seed)
    x, trace = run_optimizer(objective, x0, optimizer)

    def score(params):
        psi = run_circuit(circuit, params, psi0)
        return exact.expectation_exact(problem.matrix, psi), exact.fidelity(psi, problem.spectrum)

    e_init, f_init = score(x0)
    e_final, f_final = score(x)
    record = VqeRunRecord(
        config=cfg.to_dict(),
        trace=trace,
        final_params=x,
        final_energy=e_final,
        energy_error=e_final - problem.e0,
        final_fidelity=f_final,
        initial_energy=e_init,
        initial_fidelity=f_init,
        e0=problem.e0,
        hf_fidelity=problem.hf_fidelity,
        wall_time=0.0,
        layout=layout,
    )
    if noise is not None:
        rho = run_circuit_noisy(circuit, x, psi0, noise)
        record.noisy_energy = expectation_density(problem.hamiltonian, problem.groups, rho, noise)
        record.noisy_energy_error = record.noisy_energy - problem.e0
        record.noisy_fidelity = exact.density_fidelity(rho, problem.spectrum)
    record.wall_time = time.perf_counter() - t0
    return record


def initial_gradient(cfg: RunConfig) -> np.ndarray:
    """Exact parameter-shift gradient of the energy at the initial parameters."""
    problem = build_problem(cfg.params if cfg.params is not None else cfg.n_b, cfg.basis, cfg.ordering)
    circuit = build_ansatz(cfg.ansatz)
    objective = make_objective(replace(cfg, eval_mode="exact"), problem, circuit, initial_state(cfg, problem))
    return parameter_shift_gradient(objective, init_params(cfg.ansatz, cfg.init))


def _safe_run(cfg: RunConfig) -> VqeRunRecord:
    try:
        return run_vqe(cfg)
    except Exception as exc:  # recorded per seed; the sweep goes on
        return VqeRunRecord.failed(cfg, f"{type(exc).__name__}: {exc}\n{traceback.format_exc(limit=3)}")


def worker_count(workers: int | None = None) -> int:
    if workers is None:
        workers = int(os.environ.get("ONIONVQE_WORKERS", "1"))
    return max(1, workers)


def seed_sweep(cfg_template: RunConfig, seeds, workers: int | None = None) -> list[VqeRunRecord]:
    """One run per seed; records come back in seed-list order."""
    seeds = [int(s) for s in seeds]
    if not seeds:
        raise ValueError("seed_sweep needs at least one seed")
    configs = [cfg_template.with_seed(s) for s in seeds]
    workers = min(worker_count(workers), len(configs))
    if workers == 1:
        return [_safe_run(c) for c in configs]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(_safe_run, configs))


@dataclass
class SweepSummary:
    n_runs: int
    n_failed: int
    threshold: float
    fraction_above: float
    min_fidelity: float
    median_fidelity: float
    max_fidelity: float

    def to_dict(self) -> dict:
        return dict(self.__dict__)


def summarize(records: list[VqeRunRecord], threshold: float | None = None) -> SweepSummary:
    """Fidelity statistics; ``threshold`` defaults to the mean-field state's fidelity."""
    ok = [r for r in records if r.error is None]
    if threshold is None:
        threshold = ok[0].hf_fidelity if ok else float("nan")
    f = np.array([r.final_fidelity for r in ok])
    if f.size == 0:
        return SweepSummary(len(records), len(records), threshold, float("nan"), *(3 * [float("nan")]))
    return SweepSummary(
        len(records),
        len(records) - len(ok),
        threshold,
        float(np.mean(f > threshold)),
        float(f.min()),
        float(np.median(f)),
        float(f.max()),
    )


def low_fidelity_state(problem: Problem, seed: int, kind: str = "entangled", max_fidelity: float = 1e-3) -> np.ndarray:
    """Random state with small ground-space overlap.

    ``"entangled"`` draws a Gaussian vector and removes its ground-space
    component; ``"product"`` draws independent single-qubit Ry states, which
    are not orthogonalized.
    """
    rng = np.random.default_rng(seed)
    n = problem.n_qubits
    if kind == "product":
        psi = np.ones(1)
        for theta in rng.uniform(0, np.pi, n):
            psi = np.kron([np.cos(theta / 2), np.sin(theta / 2)], psi)
        return psi
    if kind != "entangled":
        raise ValueError(f"unknown kind {kind!r}")
    g = problem.spectrum.ground_space
    psi = rng.normal(size=1 << n)
    for _ in range(3):
        psi = psi - g @ (g.conj().T @ psi)
        psi = np.real_if_close(psi / np.linalg.norm(psi))
        if exact.fidelity(psi, problem.spectrum) < max_fidelity:
            return psi
    raise RuntimeError("could not suppress the ground-space overlap")


def low_fidelity_control(cfg: RunConfig, kind: str = "entangled") -> VqeRunRecord:
    """Run ``cfg`` from a random low-fidelity custom state seeded by ``cfg.seed``."""
    problem = build_problem(cfg.params if cfg.params is not None else cfg.n_b, cfg.basis, cfg.ordering)
    psi = low_fidelity_state(problem, cfg.seed, kind)
    return run_vqe(replace(cfg, initial_state="custom", custom_state=psi))


def csv_row(r: VqeRunRecord) -> dict:
    c = r.config

    def fmt(v):
        return "" if v is None else repr(float(v))

    return {
        "seed": c["seed"],
        "init": c["init"]["kind"],
        "layers": c["ansatz"]["n_layers"],
        "n_qubits": c["ansatz"]["n_qubits"],
        "eval_mode": c["eval_mode"],
        "final_energy_eV": fmt(r.final_energy),
        "energy_error_eV": fmt(r.energy_error),
        "fidelity": fmt(r.final_fidelity),
        "evals": r.trace.n_evals,
        "termination": r.trace.termination,
        "initial_state": c["initial_state"],
        "entangler": c["ansatz"]["entangler"],
        "basis": c["basis"],
        "shots": "" if c["eval_mode"] == "exact" or c["shots"] is None else c["shots"],
        "noisy_energy_error_eV": fmt(r.noisy_energy_error),
        "noisy_fidelity": fmt(r.noisy_fidelity),
    }


def write_sweep_csv(records: list[VqeRunRecord], path) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=CSV_COLUMNS, lineterminator="\n")
        writer.writeheader()
        for r in records:
            writer.writerow(csv_row(r))
