"""Anderson impurity model Hamiltonian and its qubit representation.

Spin-orbital convention: mode ``2*i`` is site ``i`` spin-up and mode ``2*i + 1``
is site ``i`` spin-down, with site 0 the impurity and sites ``1..n_b`` the bath
chain.  Pauli strings are stored as plain strings where character ``k`` acts on
qubit ``k``.
"""

from __future__ import annotations

import itertools
import json
import math
from dataclasses import dataclass
from importlib import resources
from typing import Iterable, Sequence

import numpy as np

DROP_TOL = 1e-12


@dataclass(frozen=True)
class AimParams:
    """One row of impurity-model parameters (all energies in eV)."""

    n_b: int
    eps0: float
    eps: tuple[float, ...]
    v: tuple[float, ...]
    u: float

    def __post_init__(self):
        object.__setattr__(self, "eps", tuple(float(e) for e in self.eps))
        object.__setattr__(self, "v", tuple(float(x) for x in self.v))
        if self.n_b < 1:
            raise ValueError(f"n_b must be >= 1, got {self.n_b}")
        if len(self.eps) != self.n_b:
            raise ValueError(f"expected {self.n_b} bath energies, got {len(self.eps)}")
        if len(self.v) != self.n_b:
            raise ValueError(f"expected {self.n_b} hoppings, got {len(self.v)}")
        values = (self.eps0, self.u, *self.eps, *self.v)
        if not all(math.isfinite(x) for x in values):
            raise ValueError("all AIM parameters must be finite")

    @property
    def n_modes(self) -> int:
        return 2 * (self.n_b + 1)

    @classmethod
    def from_dict(cls, d: dict) -> "AimParams":
        return cls(int(d["n_b"]), float(d["eps0"]), tuple(d["eps"]), tuple(d["v"]), float(d["u"]))

    def to_dict(self) -> dict:
        return {"n_b": self.n_b, "eps0": self.eps0, "eps": list(self.eps), "v": list(self.v), "u": self.u}

    def with_u(self, u: float) -> "AimParams":
        return AimParams(self.n_b, self.eps0, self.eps, self.v, u)


def load_params_table(path=None) -> dict[int, AimParams]:
    """Load parameter rows keyed by bath-site count.

    Without a path the bundled ``aim_params.json`` table is used.
    """
    if path is None:
        text = resources.files("aimvqe.data").joinpath("aim_params.json").read_text()
    else:
        with open(path) as fh:
            text = fh.read()
    rows = json.loads(text)
    table = {}
    for row in rows:
        p = AimParams.from_dict(row)
        table[p.n_b] = p
    return table


def table_params(n_b: int) -> AimParams:
    table = load_params_table()
    if n_b not in table:
        raise ValueError(f"no bundled parameters for n_b={n_b}; available: {sorted(table)}")
    return table[n_b]


# ---------------------------------------------------------------------------
# Fermionic terms
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class FermionTerm:
    """``coefficient * prod(ops)`` with ops as ``(mode, is_creation)`` pairs."""

    coefficient: complex
    ops: tuple[tuple[int, bool], ...]

    def modes(self) -> set[int]:
        return {m for m, _ in self.ops}


def site_mode(site: int, spin: int) -> int:
    return 2 * site + spin


def one_body_matrix(params: AimParams) -> np.ndarray:
    """Matrix ``h`` with ``H_1 = sum_pq h[p, q] c_p^dagger c_q``."""
    m = params.n_modes
    h = np.zeros((m, m))
    for s in (0, 1):
        h[site_mode(0, s), site_mode(0, s)] = params.eps0
        for i in range(1, params.n_b + 1):
            a, b = site_mode(i, s), site_mode(i - 1, s)
            h[a, a] = params.eps[i - 1]
            h[a, b] = h[b, a] = params.v[i - 1]
    return h


def _number(mode: int, coeff: float) -> FermionTerm:
    return FermionTerm(coeff, ((mode, True), (mode, False)))


def build_aim_hamiltonian(params: AimParams, drop_tol: float = DROP_TOL) -> list[FermionTerm]:
    """Fermionic terms of the chain-topology impurity Hamiltonian.

    Number terms come first (impurity then bath, up before down), then the
    hoppings in both directions, then the normal-ordered Hubbard term
    ``U c0u^dag c0d^dag c0d c0u``.
    """
    terms: list[FermionTerm] = []
    for s in (0, 1):
        terms.append(_number(site_mode(0, s), params.eps0))
    for i in range(1, params.n_b + 1):
        for s in (0, 1):
            terms.append(_number(site_mode(i, s), params.eps[i - 1]))
    for i in range(1, params.n_b + 1):
        for s in (0, 1):
            a, b = site_mode(i, s), site_mode(i - 1, s)
            terms.append(FermionTerm(params.v[i - 1], ((a, True), (b, False))))
            terms.append(FermionTerm(params.v[i - 1], ((b, True), (a, False))))
    up, dn = site_mode(0, 0), site_mode(0, 1)
    terms.append(FermionTerm(params.u, ((up, True), (dn, True), (dn, False), (up, False))))
    return [t for t in terms if abs(t.coefficient) > drop_tol]


# ---------------------------------------------------------------------------
# Qubit orderings
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class QubitOrdering:
    """``permutation[mode] = qubit``."""

    permutation: tuple[int, ...]

    def __post_init__(self):
        perm = tuple(int(p) for p in self.permutation)
        object.__setattr__(self, "permutation", perm)
        if sorted(perm) != list(range(len(perm))):
            raise ValueError(f"ordering is not a bijection: {perm}")

    def __len__(self):
        return len(self.permutation)

    def qubit(self, mode: int) -> int:
        return self.permutation[mode]

    def modes_by_qubit(self) -> list[int]:
        inv = [0] * len(self.permutation)
        for m, q in enumerate(self.permutation):
            inv[q] = m
        return inv

    def matrix(self) -> np.ndarray:
        """Permutation matrix ``P`` with ``P[qubit, mode] = 1``."""
        n = len(self.permutation)
        p = np.zeros((n, n))
        p[list(self.permutation), list(range(n))] = 1.0
        return p


def default_ordering(n_b: int) -> QubitOrdering:
    if n_b < 1:
        raise ValueError("n_b must be >= 1")
    return QubitOrdering(tuple(range(2 * (n_b + 1))))


def chain_ordering(n_b: int) -> QubitOrdering:
    """Up-spin bath reversed, impurity up, impurity down, down-spin bath.

    Every hopping and the Hubbard term then act on neighbouring qubits.
    """
    if n_b < 1:
        raise ValueError("n_b must be >= 1")
    sequence = (
        [site_mode(i, 0) for i in range(n_b, 0, -1)]
        + [site_mode(0, 0), site_mode(0, 1)]
        + [site_mode(i, 1) for i in range(1, n_b + 1)]
    )
    perm = [0] * len(sequence)
    for q, m in enumerate(sequence):
        perm[m] = q
    return QubitOrdering(tuple(perm))


def make_ordering(kind: str, n_b: int) -> QubitOrdering:
    if kind == "chain":
        return chain_ordering(n_b)
    if kind == "default":
        return default_ordering(n_b)
    raise ValueError(f"unknown ordering {kind!r} (expected 'chain' or 'default')")


# ---------------------------------------------------------------------------
# Pauli algebra
# ---------------------------------------------------------------------------

# (a, b) -> (phase, a*b)
_PAULI_PRODUCT = {
    ("I", "I"): (1, "I"), ("I", "X"): (1, "X"), ("I", "Y"): (1, "Y"), ("I", "Z"): (1, "Z"),
    ("X", "I"): (1, "X"), ("X", "X"): (1, "I"), ("X", "Y"): (1j, "Z"), ("X", "Z"): (-1j, "Y"),
    ("Y", "I"): (1, "Y"), ("Y", "X"): (-1j, "Z"), ("Y", "Y"): (1, "I"), ("Y", "Z"): (1j, "X"),
    ("Z", "I"): (1, "Z"), ("Z", "X"): (1j, "Y"), ("Z", "Y"): (-1j, "X"), ("Z", "Z"): (1, "I"),
}


def multiply_strings(a: str, b: str) -> tuple[complex, str]:
    phase: complex = 1
    out = []
    for x, y in zip(a, b):
        ph, z = _PAULI_PRODUCT[(x, y)]
        phase *= ph
        out.append(z)
    return phase, "".join(out)


class PauliSum:
    """Canonical sum of Pauli strings with complex coefficients.

    Terms are merged on construction and anything below ``drop_tol`` in
    magnitude is discarded.  Term order is insertion order of first
    appearance, which keeps JSON output and term indices stable.
    """

    def __init__(self, n_qubits: int, terms: Iterable[tuple[complex, str]] = (), drop_tol: float = DROP_TOL):
        self.n_qubits = int(n_qubits)
        self.drop_tol = drop_tol
        merged: dict[str, complex] = {}
        for coeff, string in terms:
            if len(string) != self.n_qubits or set(string) - set("IXYZ"):
                raise ValueError(f"invalid Pauli string {string!r} for {self.n_qubits} qubits")
            merged[string] = merged.get(string, 0.0) + complex(coeff)
        self._terms = {s: c for s, c in merged.items() if abs(c) > drop_tol}

    @classmethod
    def identity(cls, n_qubits: int, coeff: complex = 1.0) -> "PauliSum":
        return cls(n_qubits, [(coeff, "I" * n_qubits)])

    @property
    def terms(self) -> list[tuple[complex, str]]:
        return [(c, s) for s, c in self._terms.items()]

    def coefficient(self, string: str) -> complex:
        return self._terms.get(string, 0.0)

    def __len__(self):
        return len(self._terms)

    def __iter__(self):
        return iter(self.terms)

    def __add__(self, other: "PauliSum") -> "PauliSum":
        self._check(other)
        return PauliSum(self.n_qubits, self.terms + other.terms, self.drop_tol)

    def __mul__(self, other):
        if isinstance(other, PauliSum):
            self._check(other)
            out = []
            for ca, sa in self.terms:
                for cb, sb in other.terms:
                    ph, s = multiply_strings(sa, sb)
                    out.append((ca * cb * ph, s))
            return PauliSum(self.n_qubits, out, self.drop_tol)
        return PauliSum(self.n_qubits, [(c * other, s) for c, s in self.terms], self.drop_tol)

    __rmul__ = __mul__

    def _check(self, other: "PauliSum"):
        if other.n_qubits != self.n_qubits:
            raise ValueError("qubit count mismatch")

    def is_hermitian(self, tol: float = 1e-12) -> bool:
        return all(abs(c.imag) < tol for c, _ in self.terms)

    def real(self) -> "PauliSum":
        return PauliSum(self.n_qubits, [(c.real, s) for c, s in self.terms], self.drop_tol)

    def __repr__(self):
        return f"PauliSum(n_qubits={self.n_qubits}, n_terms={len(self)})"

    def to_json(self) -> dict:
        return {
            "n_qubits": self.n_qubits,
            "terms": [{"coeff_re": c.real, "coeff_im": c.imag, "string": s} for c, s in self.terms],
        }

    @classmethod
    def from_json(cls, d: dict) -> "PauliSum":
        terms = [(complex(t["coeff_re"], t["coeff_im"]), t["string"]) for t in d["terms"]]
        return cls(int(d["n_qubits"]), terms)


def count_pauli_strings(h: PauliSum) -> int:
    return len(h)


# ---------------------------------------------------------------------------
# Jordan-Wigner
# ---------------------------------------------------------------------------


def _ladder(qubit: int, creation: bool, n: int) -> PauliSum:
    # c = Z..Z (X + iY)/2, c^dag = Z..Z (X - iY)/2; occupied = |1>
    prefix = "Z" * qubit
    suffix = "I" * (n - qubit - 1)
    sign = -1 if creation else 1
    return PauliSum(n, [(0.5, prefix + "X" + suffix), (0.5j * sign, prefix + "Y" + suffix)])


def jordan_wigner(terms: Sequence[FermionTerm], ordering: QubitOrdering, drop_tol: float = DROP_TOL) -> PauliSum:
    """Map fermionic terms to a merged qubit Hamiltonian.

    Modes are first relabelled through ``ordering``; the parity string then
    runs over all qubits with a lower index than the target.
    """
    n = len(ordering)
    out: list[tuple[complex, str]] = []
    for term in terms:
        for mode, _ in term.ops:
            if not 0 <= mode < n:
                raise ValueError(f"mode {mode} outside ordering of {n} modes")
        product = PauliSum.identity(n, term.coefficient)
        for mode, creation in term.ops:
            product = product * _ladder(ordering.qubit(mode), creation, n)
        out.extend(product.terms)
    return PauliSum(n, out, drop_tol)


def number_operator(n_qubits: int) -> PauliSum:
    """Total particle number ``sum_q (I - Z_q)/2``."""
    terms = [(n_qubits / 2, "I" * n_qubits)]
    for q in range(n_qubits):
        terms.append((-0.5, "I" * q + "Z" + "I" * (n_qubits - q - 1)))
    return PauliSum(n_qubits, terms)


def aim_qubit_hamiltonian(params: AimParams, ordering: QubitOrdering | str = "chain") -> PauliSum:
    if isinstance(ordering, str):
        ordering = make_ordering(ordering, params.n_b)
    return jordan_wigner(build_aim_hamiltonian(params), ordering)


# ---------------------------------------------------------------------------
# Measurement grouping
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class MeasurementGroups:
    """``groups[k] = (basis letter, indices into h.terms)``."""

    groups: tuple[tuple[str, tuple[int, ...]], ...]

    def __len__(self):
        return len(self.groups)

    def bases(self) -> list[str]:
        return [b for b, _ in self.groups]


def group_measurement_bases(h: PauliSum) -> MeasurementGroups:
    """Partition non-identity terms into X, Y and Z all-qubit bases.

    Raises ``ValueError`` if a string mixes letters, since such a term cannot
    be read out by rotating every qubit into one basis.
    """
    buckets: dict[str, list[int]] = {"X": [], "Y": [], "Z": []}
    for idx, (_, string) in enumerate(h.terms):
        letters = set(string) - {"I"}
        if not letters:
            continue
        if len(letters) > 1:
            raise ValueError(f"term {string} mixes Pauli letters {sorted(letters)}; not single-basis measurable")
        buckets[letters.pop()].append(idx)
    return MeasurementGroups(tuple((b, tuple(ix)) for b, ix in buckets.items() if ix))


# ---------------------------------------------------------------------------
# Molecular-orbital basis
# ---------------------------------------------------------------------------


def rotate_to_mo_basis(terms: Sequence[FermionTerm], coeffs, drop_tol: float = DROP_TOL) -> list[FermionTerm]:
    """Express terms in the orbital basis ``a_k`` with ``c_p = sum_k C[p, k] a_k``.

    ``coeffs`` is either an ``OrbitalCoeffs`` or a bare unitary matrix.
    Terms whose creation (or annihilation) part repeats a mode vanish and are
    dropped; remaining terms with identical operator strings are merged.
    """
    c = np.asarray(getattr(coeffs, "c", coeffs))
    m = c.shape[0]
    if c.shape != (m, m) or np.abs(c.conj().T @ c - np.eye(m)).max() > 1e-8:
        raise ValueError("orbital coefficients must form a unitary square matrix")
    merged: dict[tuple, complex] = {}
    for term in terms:
        factors = []
        for mode, creation in term.ops:
            row = c[mode].conj() if creation else c[mode]
            factors.append([(k, creation, row[k]) for k in range(m) if abs(row[k]) > 0.0])
        for combo in itertools.product(*factors):
            ops = tuple((k, cr) for k, cr, _ in combo)
            created = [k for k, cr in ops if cr]
            annihilated = [k for k, cr in ops if not cr]
            if len(set(created)) < len(created) or len(set(annihilated)) < len(annihilated):
                continue
            value = term.coefficient
            for _, _, amp in combo:
                value *= amp
            merged[ops] = merged.get(ops, 0.0) + value
    out = []
    for ops, value in merged.items():
        if abs(value) > drop_tol:
            if abs(np.imag(value)) < drop_tol:
                value = float(np.real(value))
            out.append(FermionTerm(value, ops))
    return out
