"""Dense exact diagonalization used as the verification oracle."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from .model import AimParams, PauliSum, aim_qubit_hamiltonian, number_operator

MAX_DENSE_QUBITS = 14


def _string_masks(string: str) -> tuple[int, int, int]:
    flip = phase = n_y = 0
    for q, ch in enumerate(string):
        if ch in "XY":
            flip |= 1 << q
        if ch in "YZ":
            phase |= 1 << q
        if ch == "Y":
            n_y += 1
    return flip, phase, n_y


def _parity(values: np.ndarray) -> np.ndarray:
    # popcount parity of non-negative int64 values
    v = values.copy()
    for shift in (32, 16, 8, 4, 2, 1):
        v ^= v >> shift
    return v & 1


def pauli_sum_to_matrix(h: PauliSum, sparse: bool = False):
    """Matrix of ``h`` with qubit ``k`` on bit ``k`` of the basis index.

    Each string is placed column by column: its X/Y letters flip bits and its
    Y/Z letters contribute a sign from the bit values, which is the same
    operator as the Kronecker product of the single-qubit factors.
    """
    n = h.n_qubits
    if n > MAX_DENSE_QUBITS:
        raise ValueError(f"{n} qubits exceeds the dense limit of {MAX_DENSE_QUBITS}")
    dim = 1 << n
    cols = np.arange(dim, dtype=np.int64)
    rows_all, cols_all, vals_all = [], [], []
    for coeff, string in h.terms:
        flip, phase, n_y = _string_masks(string)
        signs = 1 - 2 * _parity(cols & phase)
        vals_all.append(coeff * (1j ** n_y) * signs)
        rows_all.append(cols ^ flip)
        cols_all.append(cols)
    if not vals_all:
        m = sp.csr_matrix((dim, dim), dtype=complex)
    else:
        m = sp.csr_matrix(
            (np.concatenate(vals_all), (np.concatenate(rows_all), np.concatenate(cols_all))),
            shape=(dim, dim),
        )
        m.sum_duplicates()
    if np.all(np.abs(m.data.imag) < 1e-14):
        m = m.real
    return m if sparse else m.toarray()


@dataclass
class Spectrum:
    energies: np.ndarray
    ground_space: np.ndarray  # columns, orthonormal
    eigenvectors: np.ndarray

    @property
    def e0(self) -> float:
        return float(self.energies[0])

    @property
    def degeneracy(self) -> int:
        return self.ground_space.shape[1]

    def projector_weight(self, psi: np.ndarray) -> float:
        return float(np.linalg.norm(self.ground_space.conj().T @ psi) ** 2)


def ground(h: PauliSum, degeneracy_tol: float = 1e-8) -> Spectrum:
    """Full dense eigensolve; the ground space keeps every level within tolerance."""
    mat = pauli_sum_to_matrix(h)
    energies, vecs = np.linalg.eigh(mat)
    k = int(np.sum(energies <= energies[0] + degeneracy_tol))
    return Spectrum(energies, vecs[:, :k], vecs)


def _check_normalized(psi: np.ndarray, tol: float = 1e-8):
    norm = np.linalg.norm(psi)
    if abs(norm - 1.0) > tol:
        raise ValueError(f"state is not normalized (norm={norm:.12g})")


def fidelity(psi: np.ndarray, spectrum: Spectrum) -> float:
    """Squared norm of the projection of ``psi`` onto the ground space."""
    psi = np.asarray(psi)
    _check_normalized(psi)
    return min(1.0, spectrum.projector_weight(psi))


def density_fidelity(rho: np.ndarray, spectrum: Spectrum) -> float:
    """``Tr(P0 rho)`` for a density matrix and the ground-space projector."""
    g = spectrum.ground_space
    return float(np.real(np.einsum("ik,ij,jk->", g.conj(), rho, g)))


def expectation_exact(h, psi: np.ndarray) -> float:
    """``<psi|H|psi>`` for a PauliSum or an already-assembled matrix."""
    psi = np.asarray(psi)
    mat = pauli_sum_to_matrix(h, sparse=True) if isinstance(h, PauliSum) else h
    if mat.shape[0] != psi.shape[0]:
        raise ValueError(f"dimension mismatch: operator {mat.shape[0]}, state {psi.shape[0]}")
    _check_normalized(psi)
    value = np.vdot(psi, mat @ psi)
    if abs(value.imag) > 1e-10:
        raise ValueError(f"expectation has imaginary part {value.imag:.3g}; operator not Hermitian?")
    return float(value.real)


def expectations_batch(mat, states: np.ndarray) -> np.ndarray:
    """Row-wise ``<psi_b|M|psi_b>`` for a stack of states (no normalization check)."""
    hs = (mat @ states.T).T
    return np.real(np.einsum("bi,bi->b", states.conj(), hs))


def particle_number(psi: np.ndarray, n_qubits: int) -> tuple[float, float]:
    """Mean and variance of the total particle number."""
    counts = np.array([bin(i).count("1") for i in range(1 << n_qubits)], dtype=float)
    probs = np.abs(psi) ** 2
    mean = float(probs @ counts)
    return mean, float(probs @ counts**2 - mean**2)


def ground_particle_numbers(spectrum: Spectrum, n_qubits: int) -> list[float]:
    return [particle_number(spectrum.ground_space[:, k], n_qubits)[0] for k in range(spectrum.degeneracy)]


def ground_electron_count(params: AimParams) -> int:
    """Particle number shared by every ground state; raises if the ground space mixes sectors."""
    h = aim_qubit_hamiltonian(params, "chain")
    counts = ground_particle_numbers(ground(h), h.n_qubits)
    rounded = {int(round(c)) for c in counts}
    if len(rounded) != 1 or max(abs(c - round(c)) for c in counts) > 1e-6:
        raise ValueError(f"ground space has no definite particle number: {counts}")
    return rounded.pop()


__all__ = [
    "ground_electron_count",
    "Spectrum",
    "density_fidelity",
    "expectation_exact",
    "expectations_batch",
    "fidelity",
    "ground",
    "ground_particle_numbers",
    "number_operator",
    "particle_number",
    "pauli_sum_to_matrix",
]
