"""Statevector and density-matrix circuit execution.

Basis index bit ``k`` encodes qubit ``k`` everywhere, including sampling.
States are plain numpy arrays; density matrices are ``(2**n, 2**n)`` arrays.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property
from typing import Sequence

import numpy as np
from numba import njit

from .model import MeasurementGroups, PauliSum

MAX_DENSITY_QUBITS = 12

_H = np.array([[1.0, 1.0], [1.0, -1.0]]) / np.sqrt(2.0)
_X = np.array([[0.0, 1.0], [1.0, 0.0]])
_SDG = np.array([[1.0, 0.0], [0.0, -1.0j]])
FIXED_1Q = {"x": _X, "h": _H, "sdg": _SDG}

# rotation applied before a Z-basis readout
BASIS_ROTATION = {"Z": np.eye(2), "X": _H, "Y": _H @ _SDG}


def ry_matrix(theta: float) -> np.ndarray:
    c, s = np.cos(theta / 2), np.sin(theta / 2)
    return np.array([[c, -s], [s, c]])


@dataclass(frozen=True)
class Gate:
    """One circuit instruction.

    ``param`` is the index of a parameter slot (``ry`` only); ``angle`` is a
    fixed rotation used when no slot is bound.  ``vector`` carries the
    amplitudes of a ``stateprep`` instruction.
    """

    name: str
    qubits: tuple[int, ...]
    param: int | None = None
    angle: float | None = None
    vector: np.ndarray | None = field(default=None, compare=False, repr=False)

    def __post_init__(self):
        arity = {"ry": 1, "x": 1, "h": 1, "sdg": 1, "cz": 2, "cx": 2}
        if self.name == "stateprep":
            return
        if self.name not in arity:
            raise ValueError(f"unknown gate {self.name!r}")
        if len(self.qubits) != arity[self.name]:
            raise ValueError(f"{self.name} acts on {arity[self.name]} qubit(s), got {self.qubits}")
        if len(set(self.qubits)) != len(self.qubits):
            raise ValueError(f"gate targets must be distinct: {self.qubits}")


@dataclass
class Circuit:
    n_qubits: int
    gates: list[Gate] = field(default_factory=list)

    @property
    def n_params(self) -> int:
        slots = [g.param for g in self.gates if g.param is not None]
        return max(slots) + 1 if slots else 0

    def append(self, gate: Gate) -> "Circuit":
        for q in gate.qubits:
            if not 0 <= q < self.n_qubits:
                raise ValueError(f"qubit {q} out of range for {self.n_qubits}-qubit circuit")
        self.gates.append(gate)
        return self

    def ry(self, q: int, param: int | None = None, angle: float | None = None) -> "Circuit":
        return self.append(Gate("ry", (q,), param=param, angle=angle))

    def cz(self, a: int, b: int) -> "Circuit":
        return self.append(Gate("cz", (a, b)))

    def cx(self, control: int, target: int) -> "Circuit":
        return self.append(Gate("cx", (control, target)))

    def x(self, q: int) -> "Circuit":
        return self.append(Gate("x", (q,)))

    def h(self, q: int) -> "Circuit":
        return self.append(Gate("h", (q,)))

    def sdg(self, q: int) -> "Circuit":
        return self.append(Gate("sdg", (q,)))

    def stateprep(self, vector: np.ndarray) -> "Circuit":
        vector = np.asarray(vector)
        if vector.shape != (1 << self.n_qubits,):
            raise ValueError("stateprep vector has the wrong dimension")
        return self.append(Gate("stateprep", tuple(range(self.n_qubits)), vector=vector))

    def count(self, name: str) -> int:
        return sum(1 for g in self.gates if g.name == name)

    @cached_property
    def _indices(self) -> np.ndarray:
        return np.arange(1 << self.n_qubits, dtype=np.int64)

    def cz_signs(self, a: int, b: int) -> np.ndarray:
        idx = self._indices
        return np.where(((idx >> a) & 1) & ((idx >> b) & 1), -1.0, 1.0)

    def cx_permutation(self, control: int, target: int) -> np.ndarray:
        idx = self._indices
        return np.where((idx >> control) & 1, idx ^ (1 << target), idx)


def _check_qubits(gate: Gate, n: int):
    for q in gate.qubits:
        if not 0 <= q < n:
            raise ValueError(f"gate {gate.name} targets qubit {q} outside 0..{n - 1}")


def _n_qubits_of(dim: int) -> int:
    n = dim.bit_length() - 1
    if 1 << n != dim:
        raise ValueError(f"state dimension {dim} is not a power of two")
    return n


def _apply_1q_batch(states: np.ndarray, mat: np.ndarray, q: int) -> np.ndarray:
    """Apply ``mat`` (2x2, or Bx2x2 per row) to qubit ``q`` of ``states`` (B, dim)."""
    b, dim = states.shape
    v = states.reshape(b, dim >> (q + 1), 2, 1 << q)
    a0, a1 = v[:, :, 0, :], v[:, :, 1, :]
    if mat.ndim == 2:
        m00, m01, m10, m11 = mat[0, 0], mat[0, 1], mat[1, 0], mat[1, 1]
    else:
        m00, m01 = mat[:, 0, 0, None, None], mat[:, 0, 1, None, None]
        m10, m11 = mat[:, 1, 0, None, None], mat[:, 1, 1, None, None]
    out = np.empty(v.shape, dtype=np.result_type(states, mat))
    out[:, :, 0, :] = m00 * a0 + m01 * a1
    out[:, :, 1, :] = m10 * a0 + m11 * a1
    return out.reshape(b, dim)


def _gate_value(gate: Gate, params) -> float:
    if gate.param is not None:
        if params is None:
            raise ValueError("circuit has parameter slots but no parameters were given")
        return params[gate.param]
    return 0.0 if gate.angle is None else gate.angle


def apply_gate(state: np.ndarray, gate: Gate, params=None, circuit: Circuit | None = None) -> np.ndarray:
    """Return ``G|state>`` as a new array."""
    state = np.asarray(state)
    n = _n_qubits_of(state.shape[0])
    _check_qubits(gate, n)
    return _apply_batch(state[None, :], gate, None if params is None else np.atleast_2d(params), circuit, n)[0]


def _apply_batch(states, gate, params, circuit, n):
    if gate.name == "ry":
        if gate.param is not None:
            if params is None:
                raise ValueError("circuit has parameter slots but no parameters were given")
            theta = params[:, gate.param]
            c, s = np.cos(theta / 2), np.sin(theta / 2)
            mat = np.stack([np.stack([c, -s], -1), np.stack([s, c], -1)], -2)
        else:
            mat = ry_matrix(0.0 if gate.angle is None else gate.angle)
        return _apply_1q_batch(states, mat, gate.qubits[0])
    if gate.name in FIXED_1Q:
        return _apply_1q_batch(states, FIXED_1Q[gate.name], gate.qubits[0])
    circ = circuit if circuit is not None else Circuit(n)
    if gate.name == "cz":
        return states * circ.cz_signs(*gate.qubits)
    if gate.name == "cx":
        return states[:, circ.cx_permutation(*gate.qubits)]
    if gate.name == "stateprep":
        vec = gate.vector / np.linalg.norm(gate.vector)
        return np.broadcast_to(vec, states.shape).astype(np.result_type(states, vec))
    raise ValueError(f"unknown gate {gate.name!r}")


def run_batch(circuit: Circuit, params: np.ndarray, init: np.ndarray) -> np.ndarray:
    """Run the circuit once per row of ``params``; returns ``(B, 2**n)`` states."""
    params = np.atleast_2d(np.asarray(params, dtype=float))
    if params.shape[1] != circuit.n_params:
        raise ValueError(f"expected {circuit.n_params} parameters, got {params.shape[1]}")
    init = np.asarray(init)
    if init.shape != (1 << circuit.n_qubits,):
        raise ValueError("initial state has the wrong dimension")
    states = np.tile(init, (params.shape[0], 1))
    for gate in circuit.gates:
        states = _apply_batch(states, gate, params, circuit, circuit.n_qubits)
    return states


def run_circuit(circuit: Circuit, params: Sequence[float], init: np.ndarray) -> np.ndarray:
    params = np.asarray(params, dtype=float)
    if params.shape != (circuit.n_params,):
        raise ValueError(f"expected {circuit.n_params} parameters, got {params.shape}")
    return run_batch(circuit, params[None, :], init)[0]


def zero_state(n_qubits: int, dtype=float) -> np.ndarray:
    psi = np.zeros(1 << n_qubits, dtype=dtype)
    psi[0] = 1.0
    return psi


def basis_state(n_qubits: int, occupied: Sequence[int], dtype=float) -> np.ndarray:
    psi = np.zeros(1 << n_qubits, dtype=dtype)
    psi[sum(1 << q for q in occupied)] = 1.0
    return psi


# ---------------------------------------------------------------------------
# Shot-based estimation
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ShotResult:
    estimate: float
    shots_per_basis: int
    rng_seed: int


def basis_probabilities(state: np.ndarray, basis: str) -> np.ndarray:
    n = _n_qubits_of(state.shape[0])
    rotated = state[None, :]
    if basis != "Z":
        for q in range(n):
            rotated = _apply_1q_batch(rotated, BASIS_ROTATION[basis], q)
    p = np.abs(rotated[0]) ** 2
    return p / p.sum()


def sample_counts(probs: np.ndarray, shots: int, rng: np.random.Generator) -> np.ndarray:
    """Inverse-CDF sampling of ``shots`` outcomes; returns counts per basis index."""
    cdf = np.cumsum(probs)
    cdf /= cdf[-1]
    outcomes = np.searchsorted(cdf, rng.random(shots), side="right")
    outcomes = np.minimum(outcomes, probs.size - 1)
    return np.bincount(outcomes, minlength=probs.size)


def _string_mask(string: str) -> int:
    return sum(1 << q for q, ch in enumerate(string) if ch != "I")


def _parity_signs(n: int, mask: int) -> np.ndarray:
    idx = np.arange(1 << n, dtype=np.int64) & mask
    par = np.zeros_like(idx)
    while mask:
        par ^= idx & 1
        idx >>= 1
        mask >>= 1
    return 1.0 - 2.0 * par


def estimate_from_distributions(h: PauliSum, groups: MeasurementGroups, dists: dict[str, np.ndarray]) -> float:
    """Recombine term expectations from per-basis outcome distributions.

    ``dists`` maps a basis letter to either normalized probabilities or raw
    counts; each term's value is the parity-weighted mean of its basis.
    """
    terms = h.terms
    total = 0.0
    for coeff, string in terms:
        if set(string) == {"I"}:
            total += coeff.real
    for basis, indices in groups.groups:
        d = np.asarray(dists[basis], dtype=float)
        d = d / d.sum()
        for i in indices:
            coeff, string = terms[i]
            total += coeff.real * float(d @ _parity_signs(h.n_qubits, _string_mask(string)))
    return total


def expectation_shots(
    h: PauliSum, groups: MeasurementGroups, state: np.ndarray, shots: int, seed: int
) -> ShotResult:
    """Estimate ``<H>`` by sampling ``shots`` bitstrings in each measurement basis."""
    if shots < 1:
        raise ValueError("shots must be >= 1")
    rng = np.random.default_rng(seed)
    counts = {b: sample_counts(basis_probabilities(state, b), shots, rng) for b in groups.bases()}
    return ShotResult(estimate_from_distributions(h, groups, counts), shots, seed)


# ---------------------------------------------------------------------------
# Density matrices
# ---------------------------------------------------------------------------


def density_from_state(psi: np.ndarray) -> np.ndarray:
    return np.outer(psi, psi.conj())


@njit(cache=True)
def _superop_1q_kernel(rho, q, sup):
    # in place: each 2x2 block on qubit q, flattened as r * 2 + c, is replaced by sup @ block
    dim = rho.shape[0]
    bit = 1 << q
    for i in range(dim):
        if i & bit:
            continue
        rows = (i, i | bit)
        for j in range(dim):
            if j & bit:
                continue
            cols = (j, j | bit)
            v0 = rho[rows[0], cols[0]]
            v1 = rho[rows[0], cols[1]]
            v2 = rho[rows[1], cols[0]]
            v3 = rho[rows[1], cols[1]]
            for r in range(2):
                for c in range(2):
                    k = 2 * r + c
                    rho[rows[r], cols[c]] = sup[k, 0] * v0 + sup[k, 1] * v1 + sup[k, 2] * v2 + sup[k, 3] * v3


@njit(cache=True)
def _superop_2q_kernel(rho, qa, qb, out_idx, in_idx, vals):
    # sparse 16x16 superoperator given as (out_idx, in_idx, vals); qa is the more significant factor
    dim = rho.shape[0]
    ba, bb = 1 << qa, 1 << qb
    rows = np.empty(4, np.int64)
    cols = np.empty(4, np.int64)
    block = np.empty(16, rho.dtype)
    acc = np.empty(16, rho.dtype)
    for i in range(dim):
        if i & ba or i & bb:
            continue
        rows[0], rows[1], rows[2], rows[3] = i, i | bb, i | ba, i | ba | bb
        for j in range(dim):
            if j & ba or j & bb:
                continue
            cols[0], cols[1], cols[2], cols[3] = j, j | bb, j | ba, j | ba | bb
            for r in range(4):
                for c in range(4):
                    block[4 * r + c] = rho[rows[r], cols[c]]
                    acc[4 * r + c] = 0.0
            for t in range(vals.shape[0]):
                acc[out_idx[t]] += vals[t] * block[in_idx[t]]
            for r in range(4):
                for c in range(4):
                    rho[rows[r], cols[c]] = acc[4 * r + c]


CZ_MATRIX = np.diag([1.0, 1.0, 1.0, -1.0])
CX_MATRIX = np.array([[1.0, 0, 0, 0], [0, 1.0, 0, 0], [0, 0, 0, 1.0], [0, 0, 1.0, 0]])


def unitary_superop(mat: np.ndarray) -> np.ndarray:
    """``rho -> U rho U^dag`` on the row-major flattened block."""
    return np.kron(mat, mat.conj())


def gate_matrix(gate: Gate, params=None) -> np.ndarray:
    """2x2 or 4x4 matrix; for two-qubit gates ``qubits[0]`` is the more significant factor."""
    if gate.name == "ry":
        return ry_matrix(_gate_value(gate, params))
    if gate.name in FIXED_1Q:
        return FIXED_1Q[gate.name]
    if gate.name == "cz":
        return CZ_MATRIX
    if gate.name == "cx":
        return CX_MATRIX
    raise ValueError(f"gate {gate.name!r} has no fixed matrix")


def apply_superop(rho: np.ndarray, sup: np.ndarray, qubits: Sequence[int]) -> np.ndarray:
    """Apply a 4x4 (one qubit) or 16x16 (two qubits) superoperator in place when dtypes allow."""
    if np.iscomplexobj(sup) and np.abs(sup.imag).max() == 0.0:
        sup = sup.real
    if np.iscomplexobj(sup) and not np.iscomplexobj(rho):
        rho = rho.astype(complex)
    sup = np.ascontiguousarray(sup, dtype=rho.dtype)
    if len(qubits) == 1:
        _superop_1q_kernel(rho, qubits[0], sup)
    else:
        out_idx, in_idx = np.nonzero(sup)
        _superop_2q_kernel(rho, qubits[0], qubits[1], out_idx.astype(np.int64), in_idx.astype(np.int64), sup[out_idx, in_idx])
    return rho


def apply_unitary_1q_density(rho: np.ndarray, mat: np.ndarray, q: int, n: int) -> np.ndarray:
    """``U rho U^dag`` for a single-qubit ``U`` on qubit ``q`` (returns a new array)."""
    return apply_superop(np.array(rho, copy=True), unitary_superop(np.asarray(mat)), (q,))


def run_circuit_noisy(circuit: Circuit, params, init: np.ndarray, noise=None) -> np.ndarray:
    """Evolve a density matrix, applying the noise model's channel after each gate.

    ``noise`` is a :class:`aimvqe.noise.NoiseModel` (or ``None`` for an
    ideal run). Gate and channel are fused into one superoperator per gate.
    State preparation is loaded without noise.
    """
    n = circuit.n_qubits
    if n > MAX_DENSITY_QUBITS:
        raise ValueError(f"{n} qubits exceeds the density-matrix limit of {MAX_DENSITY_QUBITS}")
    params = None if params is None else np.asarray(params, dtype=float)
    if circuit.n_params and (params is None or params.shape != (circuit.n_params,)):
        raise ValueError(f"expected {circuit.n_params} parameters")
    rho = np.array(init, copy=True)
    if rho.ndim == 1:
        rho = density_from_state(rho)
    if rho.shape != (1 << n, 1 << n):
        raise ValueError("initial density matrix has the wrong dimension")
    for gate in circuit.gates:
        _check_qubits(gate, n)
        if gate.name == "stateprep":
            rho = density_from_state(gate.vector / np.linalg.norm(gate.vector))
            continue
        sup = unitary_superop(gate_matrix(gate, params))
        if noise is not None:
            if len(gate.qubits) == 1:
                sup = noise.superop_1q(gate.qubits[0]) @ sup
            else:
                sup = noise.superop_2q(*gate.qubits) @ sup
        rho = apply_superop(rho, sup, gate.qubits)
    return rho


def density_basis_probabilities(rho: np.ndarray, basis: str, noise=None) -> np.ndarray:
    """Outcome distribution of an all-qubit readout in ``basis``.

    Only the diagonal of the rotated state is formed: qubits are rotated and
    reduced to their diagonal one at a time.  With a noise model the
    rotation gates' channels and the readout confusion act on the resulting
    distribution qubit by qubit; both maps take diagonals to diagonals.
    """
    n = _n_qubits_of(rho.shape[0])
    if basis == "Z":
        p = np.real(np.diagonal(rho)).copy()
    else:
        v = BASIS_ROTATION[basis]
        vc = v.conj()
        d = rho.reshape(1, 1 << n, 1 << n)
        for _ in range(n):
            k, dr = d.shape[0], d.shape[1]
            t = d.reshape(k, 2, dr // 2, 2, dr // 2)
            nxt = np.empty((k, 2, dr // 2, dr // 2), dtype=np.result_type(rho, v))
            for a in (0, 1):
                acc = 0
                for c in (0, 1):
                    for e in (0, 1):
                        w = v[a, c] * vc[a, e]
                        if w != 0:
                            acc = acc + w * t[:, c, :, e, :]
                nxt[:, a] = acc
            d = nxt.reshape(2 * k, dr // 2, dr // 2)
        p = np.real(d.reshape(-1))
    if noise is not None:
        p = noise.apply_measurement(p, n, gate_noise=(basis != "Z"))
    p = np.clip(p, 0.0, None)
    return p / p.sum()


def expectation_density(h: PauliSum, groups: MeasurementGroups, rho: np.ndarray, noise=None) -> float:
    """Infinite-shot value of the three-basis estimator on a (noisy) density matrix."""
    dists = {b: density_basis_probabilities(rho, b, noise) for b in groups.bases()}
    return estimate_from_distributions(h, groups, dists)


def expectation_shots_density(
    h: PauliSum, groups: MeasurementGroups, rho: np.ndarray, shots: int, seed: int, noise=None
) -> ShotResult:
    if shots < 1:
        raise ValueError("shots must be >= 1")
    rng = np.random.default_rng(seed)
    counts = {b: sample_counts(density_basis_probabilities(rho, b, noise), shots, rng) for b in groups.bases()}
    return ShotResult(estimate_from_distributions(h, groups, counts), shots, seed)
