"""Layered Ry + entangler circuits and their parameter initializations."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .sim import Circuit, run_batch

ENTANGLERS = ("cz", "cx")
INIT_KINDS = ("onion", "random", "near_zero", "pi")
MAX_UNITARY_QUBITS = 10


def linear_map(n_qubits: int) -> list[tuple[int, int]]:
    return [(q, q + 1) for q in range(n_qubits - 1)]


@dataclass(frozen=True)
class AnsatzSpec:
    """Shape of the circuit: a leading Ry column, then ``n_layers`` x (entangler column, Ry column).

    Attributes:
        n_qubits: Register width.
        n_layers: Number of entangler + Ry repetitions.
        entangler: ``"cz"`` or ``"cx"`` (first pair element is the CX control).
        entangling_map: Pairs applied in order in every entangler column.
            Defaults to nearest neighbours along the register.
    """

    n_qubits: int
    n_layers: int
    entangler: str = "cz"
    entangling_map: tuple[tuple[int, int], ...] | None = None

    def __post_init__(self):
        if self.n_qubits < 1:
            raise ValueError("n_qubits must be positive")
        if self.n_layers < 1:
            raise ValueError("n_layers must be at least 1")
        if self.entangler.lower() not in ENTANGLERS:
            raise ValueError(f"entangler must be one of {ENTANGLERS}, got {self.entangler!r}")
        object.__setattr__(self, "entangler", self.entangler.lower())
        pairs = self.entangling_map
        pairs = tuple(linear_map(self.n_qubits)) if pairs is None else tuple((int(a), int(b)) for a, b in pairs)
        seen = set()
        for a, b in pairs:
            if a == b or not (0 <= a < self.n_qubits and 0 <= b < self.n_qubits):
                raise ValueError(f"invalid entangling pair ({a}, {b}) for {self.n_qubits} qubits")
            key = (min(a, b), max(a, b))
            if key in seen:
                raise ValueError(f"entangling pair ({a}, {b}) repeated within a column")
            seen.add(key)
        object.__setattr__(self, "entangling_map", pairs)

    @property
    def n_params(self) -> int:
        return self.n_qubits * (self.n_layers + 1)

    def to_dict(self) -> dict:
        return {
            "n_qubits": self.n_qubits,
            "n_layers": self.n_layers,
            "entangler": self.entangler,
            "entangling_map": [list(p) for p in self.entangling_map],
        }


@dataclass(frozen=True)
class InitStrategy:
    kind: str = "onion"
    seed: int = 0
    near_zero_scale: float = 0.01

    def __post_init__(self):
        kind = self.kind.lower().replace("-", "_")
        if kind not in INIT_KINDS:
            raise ValueError(f"unknown init kind {self.kind!r}; expected one of {INIT_KINDS}")
        object.__setattr__(self, "kind", kind)
        if self.near_zero_scale <= 0:
            raise ValueError("near_zero_scale must be positive")


def build_ansatz(spec: AnsatzSpec) -> Circuit:
    """Circuit whose parameter ``l * n + q`` drives the Ry on qubit ``q`` in column ``l``."""
    n = spec.n_qubits
    circ = Circuit(n)
    for q in range(n):
        circ.ry(q, param=q)
    for layer in range(1, spec.n_layers + 1):
        for a, b in spec.entangling_map:
            if spec.entangler == "cz":
                circ.cz(a, b)
            else:
                circ.cx(a, b)
        for q in range(n):
            circ.ry(q, param=layer * n + q)
    return circ


def init_params(spec: AnsatzSpec, strategy: InitStrategy) -> np.ndarray:
    """Initial parameter vector; identical output for identical (spec, strategy).

    Onion places random angles in the first Ry column, their negatives in the
    last, and zeros in between, so an even number of self-inverse entangler
    columns collapses to the identity.
    """
    n, total = spec.n_qubits, spec.n_params
    rng = np.random.default_rng(strategy.seed)
    kind = strategy.kind
    if kind == "onion":
        if spec.n_layers % 2:
            raise ValueError(
                f"onion initialization needs an even number of layers (got {spec.n_layers}): "
                "the entangler columns only cancel in pairs"
            )
        first = rng.uniform(0.0, 2 * np.pi, n)
        x = np.zeros(total)
        x[:n] = first
        x[-n:] = -first
        return x
    if kind == "random":
        return rng.uniform(0.0, 2 * np.pi, total)
    if kind == "near_zero":
        s = strategy.near_zero_scale
        return rng.uniform(-s, s, total)
    return np.full(total, np.pi)


def circuit_unitary(circuit: Circuit, params=None) -> np.ndarray:
    """Dense unitary, column ``j`` being the circuit applied to basis state ``j``."""
    n = circuit.n_qubits
    if n > MAX_UNITARY_QUBITS:
        raise ValueError(f"unitary of {n} qubits exceeds the {MAX_UNITARY_QUBITS}-qubit limit")
    if any(g.name == "stateprep" for g in circuit.gates):
        raise ValueError("state preparation has no unitary")
    dim = 1 << n
    params = np.zeros(circuit.n_params) if params is None else np.asarray(params, dtype=float)
    cols = np.eye(dim)
    out = np.empty((dim, dim), dtype=complex)
    for j in range(dim):
        out[:, j] = run_batch(circuit, params[None, :], cols[j])[0]
    return out
