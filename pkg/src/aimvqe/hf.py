"""Generalized (spin-mixing) Hartree-Fock for the impurity chain and Slater-state preparation."""

from __future__ import annotations

import itertools
from dataclasses import dataclass

import numpy as np

from .model import AimParams, QubitOrdering, one_body_matrix, site_mode

IMP_UP = site_mode(0, 0)
IMP_DN = site_mode(0, 1)


class SCFNotConverged(RuntimeError):
    """Raised when the SCF loop exhausts its iterations; ``residual`` holds the last density change."""

    def __init__(self, message: str, residual: float):
        super().__init__(message)
        self.residual = residual


@dataclass
class OrbitalCoeffs:
    """Converged orbitals.

    Attributes:
        c: Unitary ``(M, M)`` matrix; ``c[p, k]`` is the weight of mode ``p`` in
            orbital ``k``. Columns are sorted by orbital energy.
        n_electrons: Number of occupied orbitals (the first ``n_electrons`` columns).
        orbital_energies: Fock eigenvalues, ascending.
        energy: Mean-field total energy in eV.
        iterations: SCF iterations used.
        residual: Final max-abs density-matrix change.
    """

    c: np.ndarray
    n_electrons: int
    orbital_energies: np.ndarray
    energy: float
    iterations: int = 0
    residual: float = 0.0

    @property
    def occupied(self) -> np.ndarray:
        return self.c[:, : self.n_electrons]

    @property
    def density(self) -> np.ndarray:
        return density_matrix(self.occupied)


def density_matrix(occupied: np.ndarray) -> np.ndarray:
    """``rho[p, q] = <c_p^dag c_q>`` for the determinant of the given orbital columns."""
    return occupied.conj() @ occupied.T


def fock_matrix(h: np.ndarray, rho: np.ndarray, u: float) -> np.ndarray:
    """One-body matrix plus direct and exchange mean fields of ``U n_up n_dn`` on the impurity."""
    f = h.astype(np.result_type(h, rho)).copy()
    f[IMP_UP, IMP_UP] += u * rho[IMP_DN, IMP_DN]
    f[IMP_DN, IMP_DN] += u * rho[IMP_UP, IMP_UP]
    f[IMP_UP, IMP_DN] -= u * rho[IMP_DN, IMP_UP]
    f[IMP_DN, IMP_UP] -= u * rho[IMP_UP, IMP_DN]
    return f


def scf_energy(h: np.ndarray, rho: np.ndarray, u: float) -> float:
    one = np.sum(h * rho)
    two = u * (rho[IMP_UP, IMP_UP] * rho[IMP_DN, IMP_DN] - rho[IMP_UP, IMP_DN] * rho[IMP_DN, IMP_UP])
    return float(np.real(one + two))


def _eigh(f: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    if np.iscomplexobj(f) and np.abs(f.imag).max() < 1e-14:
        f = f.real
    return np.linalg.eigh(f)


def _diis_extrapolate(focks: list[np.ndarray], errors: list[np.ndarray]) -> np.ndarray:
    k = len(focks)
    b = -np.ones((k + 1, k + 1))
    b[k, k] = 0.0
    for i in range(k):
        for j in range(k):
            b[i, j] = np.real(np.vdot(errors[i], errors[j]))
    rhs = np.zeros(k + 1)
    rhs[k] = -1.0
    w = np.linalg.lstsq(b, rhs, rcond=None)[0][:k]
    return sum(wi * fi for wi, fi in zip(w, focks))


def _scf(h, u, n_el, rho, method, damping, max_iter, tol, diis_size):
    focks, errors = [], []
    residual = np.inf
    for it in range(1, max_iter + 1):
        f = fock_matrix(h, rho, u)
        if method == "diis":
            # commutator [F, D] with D = rho^T vanishes at self-consistency
            focks.append(f)
            errors.append(f @ rho.T - rho.T @ f)
            focks, errors = focks[-diis_size:], errors[-diis_size:]
            if len(focks) > 1:
                f = _diis_extrapolate(focks, errors)
        _, c = _eigh(f)
        new = density_matrix(c[:, :n_el])
        residual = float(np.abs(new - rho).max())
        rho = new if method == "diis" else (1.0 - damping) * new + damping * rho
        if residual < tol:
            return rho, it, residual
    raise SCFNotConverged(f"SCF did not converge in {max_iter} iterations (residual {residual:.3e})", residual)


def _random_density(rng: np.random.Generator, m: int, n_el: int) -> np.ndarray:
    a = rng.normal(size=(m, m)) + 1j * rng.normal(size=(m, m))
    q, _ = np.linalg.qr(a)
    return density_matrix(q[:, :n_el])


def ghf_solve(
    params: AimParams,
    n_electrons: int,
    method: str = "diis",
    damping: float = 0.3,
    max_iter: int = 5000,
    tol: float = 1e-10,
    restarts: int = 0,
    seed: int = 0,
    diis_size: int = 8,
) -> OrbitalCoeffs:
    """Self-consistent spin-mixing mean-field solution.

    The first guess fills the lowest eigenvectors of the one-body matrix.
    ``restarts`` adds that many seeded random starting densities; the lowest
    converged energy wins.

    Args:
        params: Model parameters.
        n_electrons: Number of occupied spin orbitals.
        method: ``"diis"`` (Pulay extrapolation of the Fock matrix) or
            ``"damping"`` (linear density mixing with weight ``damping`` on
            the previous density).
        damping: Mixing weight for ``"damping"``.
        max_iter: Iteration limit per start.
        tol: Convergence threshold on the max-abs density change.
        restarts: Extra random starts.
        seed: Seed for the random starts.
        diis_size: Number of stored Fock/error pairs.

    Raises:
        SCFNotConverged: When no start converges.
    """
    h = one_body_matrix(params)
    m = h.shape[0]
    if not 0 < n_electrons < m:
        raise ValueError(f"n_electrons must be in 1..{m - 1}, got {n_electrons}")
    if method not in ("diis", "damping"):
        raise ValueError(f"unknown SCF method {method!r}")
    _, c0 = np.linalg.eigh(h)
    starts = [density_matrix(c0[:, :n_electrons]).astype(complex)]
    rng = np.random.default_rng(seed)
    starts += [_random_density(rng, m, n_electrons) for _ in range(restarts)]

    best, last_error = None, None
    for rho0 in starts:
        try:
            rho, it, residual = _scf(h, params.u, n_electrons, rho0, method, damping, max_iter, tol, diis_size)
        except SCFNotConverged as exc:
            last_error = exc
            continue
        e = scf_energy(h, rho, params.u)
        if best is None or e < best[0] - 1e-12:
            best = (e, rho, it, residual)
    if best is None:
        raise last_error
    e, rho, it, residual = best
    eps, c = _eigh(fock_matrix(h, rho, params.u))
    return OrbitalCoeffs(c, n_electrons, eps, e, it, residual)


def slater_statevector(coeffs: OrbitalCoeffs, ordering: QubitOrdering) -> np.ndarray:
    """Determinant of the occupied orbitals as a qubit statevector.

    The amplitude of the basis state with occupied qubits ``s1 < s2 < ...`` is
    ``det`` of the occupied columns restricted to those qubits' modes, which
    matches ``c_s1^dag c_s2^dag ... |0>`` under the Jordan-Wigner convention
    used by :mod:`aimvqe.model`. The global phase is fixed so that the
    largest amplitude is real and positive; the vector is real when possible.
    """
    occ = np.asarray(coeffs.occupied)
    m = occ.shape[0]
    if len(ordering) != m:
        raise ValueError(f"ordering has {len(ordering)} modes, orbitals have {m}")
    rows = ordering.matrix() @ occ  # row = qubit
    n_el = occ.shape[1]
    psi = np.zeros(1 << m, dtype=complex)
    for subset in itertools.combinations(range(m), n_el):
        index = sum(1 << q for q in subset)
        psi[index] = np.linalg.det(rows[list(subset), :])
    psi /= np.linalg.norm(psi)
    k = int(np.argmax(np.abs(psi)))
    psi *= np.abs(psi[k]) / psi[k]
    if np.abs(psi.imag).max() < 1e-12:
        return psi.real.copy()
    return psi


def mo_reference_state(n_qubits: int, n_electrons: int) -> np.ndarray:
    """Basis state with the lowest ``n_electrons`` orbitals (qubits) occupied."""
    psi = np.zeros(1 << n_qubits)
    psi[(1 << n_electrons) - 1] = 1.0
    return psi
