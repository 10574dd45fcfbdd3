"""Device description files and the gate-level noise model built from them.

Channels per gate site:

* single-qubit gate: depolarizing ``p1`` then thermal relaxation for the gate
  duration,
* two-qubit gate: two-qubit depolarizing ``p2`` then thermal relaxation of
  both qubits for the gate duration,
* measurement: the basis-rotation gate's channel (X/Y bases only) followed by
  the qubit's readout confusion matrix.

Depolarizing convention: ``rho -> (1 - p) rho + p Tr_S(rho) (x) I/d_S``.
"""

from __future__ import annotations

import itertools
import json
import math
from dataclasses import dataclass, field
from importlib import resources
from typing import Sequence

import jsonschema
import numpy as np

DEVICE_SCHEMA = {
    "type": "object",
    "required": ["qubits", "edges"],
    "properties": {
        "name": {"type": "string"},
        "description": {"type": "string"},
        "qubits": {
            "type": "array",
            "minItems": 1,
            "items": {
                "type": "object",
                "required": ["t1_us", "t2_us", "readout", "gate_1q"],
                "properties": {
                    "t1_us": {"type": ["number", "null"], "exclusiveMinimum": 0},
                    "t2_us": {"type": ["number", "null"], "exclusiveMinimum": 0},
                    "readout": {
                        "type": "array",
                        "minItems": 2,
                        "maxItems": 2,
                        "items": {
                            "type": "array",
                            "minItems": 2,
                            "maxItems": 2,
                            "items": {"type": "number", "minimum": 0, "maximum": 1},
                        },
                    },
                    "gate_1q": {"$ref": "#/definitions/gate"},
                },
            },
        },
        "edges": {
            "type": "array",
            "items": {
                "type": "object",
                "required": ["pair", "gate_2q"],
                "properties": {
                    "pair": {
                        "type": "array",
                        "minItems": 2,
                        "maxItems": 2,
                        "items": {"type": "integer", "minimum": 0},
                    },
                    "gate_2q": {"$ref": "#/definitions/gate"},
                },
            },
        },
    },
    "definitions": {
        "gate": {
            "type": "object",
            "required": ["error", "duration_ns"],
            "properties": {
                "error": {"type": "number", "minimum": 0, "maximum": 1},
                "duration_ns": {"type": "number", "minimum": 0},
            },
        }
    },
}


class DeviceError(ValueError):
    pass


@dataclass(frozen=True)
class QubitProps:
    t1_us: float
    t2_us: float
    readout: tuple[tuple[float, float], tuple[float, float]]
    error_1q: float
    duration_1q_ns: float


@dataclass(frozen=True)
class EdgeProps:
    error_2q: float
    duration_2q_ns: float


def _edge_key(a: int, b: int) -> tuple[int, int]:
    return (a, b) if a < b else (b, a)


@dataclass
class DeviceDescription:
    qubits: list[QubitProps]
    edges: dict[tuple[int, int], EdgeProps]
    name: str = "device"
    description: str = ""

    @property
    def n_qubits(self) -> int:
        return len(self.qubits)

    @property
    def coupling_map(self) -> list[tuple[int, int]]:
        return sorted(self.edges)

    def coupled(self, a: int, b: int) -> bool:
        return _edge_key(a, b) in self.edges

    def neighbours(self, q: int) -> list[int]:
        return sorted({b if a == q else a for a, b in self.edges if q in (a, b)})

    def edge(self, a: int, b: int) -> EdgeProps:
        try:
            return self.edges[_edge_key(a, b)]
        except KeyError:
            raise DeviceError(f"device qubits {a} and {b} are not coupled") from None

    def scaled(self, factor: float) -> "DeviceDescription":
        """Copy with every gate and readout error probability multiplied by ``factor``."""
        qubits = []
        for q in self.qubits:
            e01 = min(1.0, q.readout[0][1] * factor)
            e10 = min(1.0, q.readout[1][0] * factor)
            qubits.append(
                QubitProps(q.t1_us, q.t2_us, ((1 - e01, e01), (e10, 1 - e10)), min(1.0, q.error_1q * factor), q.duration_1q_ns)
            )
        edges = {k: EdgeProps(min(1.0, e.error_2q * factor), e.duration_2q_ns) for k, e in self.edges.items()}
        return DeviceDescription(qubits, edges, f"{self.name}x{factor:g}", self.description)


def _parse_device(doc: dict) -> DeviceDescription:
    validator = jsonschema.Draft7Validator(DEVICE_SCHEMA)
    errors = sorted(validator.iter_errors(doc), key=lambda e: list(e.absolute_path))
    if errors:
        lines = ["/".join(str(p) for p in e.absolute_path) + f": {e.message}" for e in errors]
        raise DeviceError("invalid device description:\n  " + "\n  ".join(lines))
    qubits = []
    for i, q in enumerate(doc["qubits"]):
        t1 = math.inf if q["t1_us"] is None else float(q["t1_us"])
        t2 = math.inf if q["t2_us"] is None else float(q["t2_us"])
        if t2 > 2 * t1 * (1 + 1e-12):
            raise DeviceError(f"qubits/{i}: T2={t2} us exceeds 2*T1={2 * t1} us")
        ro = q["readout"]
        for r, row in enumerate(ro):
            if abs(sum(row) - 1.0) > 1e-12:
                raise DeviceError(f"qubits/{i}/readout/{r}: row sums to {sum(row)}, not 1")
        qubits.append(
            QubitProps(t1, t2, (tuple(ro[0]), tuple(ro[1])), float(q["gate_1q"]["error"]), float(q["gate_1q"]["duration_ns"]))
        )
    edges = {}
    for i, e in enumerate(doc["edges"]):
        a, b = e["pair"]
        if a == b or a >= len(qubits) or b >= len(qubits):
            raise DeviceError(f"edges/{i}/pair: invalid pair {e['pair']} for {len(qubits)} qubits")
        edges[_edge_key(a, b)] = EdgeProps(float(e["gate_2q"]["error"]), float(e["gate_2q"]["duration_ns"]))
    return DeviceDescription(qubits, edges, doc.get("name", "device"), doc.get("description", ""))


def load_device(path=None) -> DeviceDescription:
    """Read and validate a device JSON file (bundled approximate device if ``path`` is None)."""
    if path is None:
        text = resources.files("aimvqe.data").joinpath("fakemumbai_approx.json").read_text()
    else:
        with open(path) as fh:
            text = fh.read()
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise DeviceError(f"device file is not valid JSON: {exc}") from None
    return _parse_device(doc)


def device_to_json(desc: DeviceDescription) -> dict:
    def num(x):
        return None if math.isinf(x) else x

    return {
        "name": desc.name,
        "description": desc.description,
        "qubits": [
            {
                "t1_us": num(q.t1_us),
                "t2_us": num(q.t2_us),
                "readout": [list(q.readout[0]), list(q.readout[1])],
                "gate_1q": {"error": q.error_1q, "duration_ns": q.duration_1q_ns},
            }
            for q in desc.qubits
        ],
        "edges": [
            {"pair": list(k), "gate_2q": {"error": e.error_2q, "duration_ns": e.duration_2q_ns}}
            for k, e in sorted(desc.edges.items())
        ],
    }


def ideal_device(n_qubits: int) -> DeviceDescription:
    """Noise-free linear device (infinite T1/T2, zero errors, perfect readout)."""
    q = QubitProps(math.inf, math.inf, ((1.0, 0.0), (0.0, 1.0)), 0.0, 0.0)
    edges = {(i, i + 1): EdgeProps(0.0, 0.0) for i in range(n_qubits - 1)}
    return DeviceDescription([q] * n_qubits, edges, "ideal")


# ---------------------------------------------------------------------------
# Layouts
# ---------------------------------------------------------------------------


def _validate_layout(desc: DeviceDescription, layout: Sequence[int], n_logical: int) -> list[int]:
    layout = [int(q) for q in layout]
    if len(layout) != n_logical:
        raise DeviceError(f"layout has {len(layout)} entries for {n_logical} logical qubits")
    if len(set(layout)) != len(layout):
        raise DeviceError(f"layout {layout} is not injective")
    for q in layout:
        if not 0 <= q < desc.n_qubits:
            raise DeviceError(f"layout qubit {q} not on the {desc.n_qubits}-qubit device")
    for a, b in zip(layout, layout[1:]):
        if not desc.coupled(a, b):
            raise DeviceError(f"layout {layout} is not a coupled path: no edge between {a} and {b}")
    return layout


def embed_layout(desc: DeviceDescription, n_logical: int, requested: Sequence[int] | None = None) -> list[int]:
    """Validate a requested path layout, or pick the coupled path with least summed 2q error."""
    if n_logical > desc.n_qubits:
        raise DeviceError(f"{n_logical} logical qubits do not fit on {desc.n_qubits} device qubits")
    if requested is not None:
        return _validate_layout(desc, requested, n_logical)
    if n_logical == 1:
        best = min(range(desc.n_qubits), key=lambda q: (desc.qubits[q].error_1q, q))
        return [best]
    best_cost, best_path = math.inf, None

    def extend(path: list[int], cost: float):
        nonlocal best_cost, best_path
        if cost >= best_cost:
            return
        if len(path) == n_logical:
            best_cost, best_path = cost, list(path)
            return
        for nxt in desc.neighbours(path[-1]):
            if nxt not in path:
                path.append(nxt)
                extend(path, cost + desc.edge(path[-2], nxt).error_2q)
                path.pop()

    for start in range(desc.n_qubits):
        extend([start], 0.0)
    if best_path is None:
        raise DeviceError(f"no coupled path of length {n_logical} on device")
    return best_path


# ---------------------------------------------------------------------------
# Channels
# ---------------------------------------------------------------------------

_PAULIS = {
    "I": np.eye(2),
    "X": np.array([[0.0, 1.0], [1.0, 0.0]]),
    "Y": np.array([[0.0, -1.0j], [1.0j, 0.0]]),
    "Z": np.array([[1.0, 0.0], [0.0, -1.0]]),
}


def depolarizing_kraus(p: float, n_qubits: int = 1) -> list[np.ndarray]:
    d2 = 4**n_qubits
    out = []
    for labels in itertools.product("IXYZ", repeat=n_qubits):
        op = np.array([[1.0]])
        for lab in labels:
            op = np.kron(op, _PAULIS[lab])
        weight = 1 - p * (d2 - 1) / d2 if set(labels) == {"I"} else p / d2
        if weight > 0:
            out.append(np.sqrt(weight) * op)
    return out


def relaxation_factors(t1_us: float, t2_us: float, duration_ns: float) -> tuple[float, float]:
    """Amplitude-damping probability and total coherence factor for one gate duration."""
    t = duration_ns * 1e-3
    gamma = 0.0 if math.isinf(t1_us) else 1.0 - math.exp(-t / t1_us)
    coherence = 1.0 if math.isinf(t2_us) else math.exp(-t / t2_us)
    return gamma, coherence


def thermal_relaxation_kraus(t1_us: float, t2_us: float, duration_ns: float) -> list[np.ndarray]:
    """Amplitude damping composed with pure dephasing (requires ``T2 <= 2 T1``)."""
    gamma, coherence = relaxation_factors(t1_us, t2_us, duration_ns)
    # remaining dephasing beyond what amplitude damping already gives
    keep = coherence**2 / (1.0 - gamma) if gamma < 1 else 0.0
    lam = min(1.0, max(0.0, 1.0 - keep))
    amp = [np.array([[1.0, 0.0], [0.0, math.sqrt(1 - gamma)]]), np.array([[0.0, math.sqrt(gamma)], [0.0, 0.0]])]
    deph = [np.array([[1.0, 0.0], [0.0, math.sqrt(1 - lam)]]), np.array([[0.0, 0.0], [0.0, math.sqrt(lam)]])]
    return [b @ a for a in amp for b in deph]


def compose_kraus(first: list[np.ndarray], second: list[np.ndarray]) -> list[np.ndarray]:
    return [b @ a for a in first for b in second]


def kraus_to_superop(kraus: list[np.ndarray]) -> np.ndarray:
    """``sum_K K (x) conj(K)``: acts on a block flattened row-major; real when every ``K`` is."""
    sup = sum(np.kron(k, k.conj()) for k in kraus)
    if np.abs(sup.imag).max() < 1e-15:
        sup = sup.real
    return np.ascontiguousarray(sup)


def kraus_completeness_error(kraus: list[np.ndarray]) -> float:
    d = kraus[0].shape[0]
    total = sum(k.conj().T @ k for k in kraus)
    return float(np.abs(total - np.eye(d)).max())


def apply_kraus(rho: np.ndarray, kraus: list[np.ndarray], qubits: Sequence[int], n: int) -> np.ndarray:
    """Generic Kraus application by full-space embedding (reference path, small n only)."""
    out = np.zeros_like(rho, dtype=complex)
    for k in kraus:
        full = embed_operator(k, qubits, n)
        out += full @ rho @ full.conj().T
    return out


def embed_operator(op: np.ndarray, qubits: Sequence[int], n: int) -> np.ndarray:
    """Lift an operator on ``qubits`` (first listed = most significant of ``op``) to n qubits."""
    k = len(qubits)
    dim = 1 << n
    idx = np.arange(dim)
    sub = np.zeros(dim, dtype=np.int64)
    for j, q in enumerate(qubits):
        sub |= ((idx >> q) & 1) << (k - 1 - j)
    rest_mask = ~sum(1 << q for q in qubits)
    full = np.zeros((dim, dim), dtype=complex)
    for col in range(dim):
        for r_sub in range(1 << k):
            amp = op[r_sub, sub[col]]
            if amp == 0:
                continue
            row = col & rest_mask
            for j, q in enumerate(qubits):
                row |= ((r_sub >> (k - 1 - j)) & 1) << q
            full[row, col] += amp
    return full


def _bit_stochastic(p: np.ndarray, q: int, n: int, m: np.ndarray) -> np.ndarray:
    """Apply a 2x2 column-stochastic ``m`` (new = m @ old) to bit ``q`` of a distribution."""
    v = p.reshape(1 << (n - q - 1), 2, 1 << q)
    out = np.empty_like(v)
    out[:, 0] = m[0, 0] * v[:, 0] + m[0, 1] * v[:, 1]
    out[:, 1] = m[1, 0] * v[:, 0] + m[1, 1] * v[:, 1]
    return out.reshape(-1)


@dataclass
class NoiseModel:
    """Noise channels for logical qubits placed on device qubits via ``layout``."""

    qubits: list[QubitProps]
    edges: dict[tuple[int, int], EdgeProps]
    layout: list[int] = field(default_factory=list)
    _superops: dict = field(default_factory=dict, init=False, repr=False, compare=False)

    @property
    def n_qubits(self) -> int:
        return len(self.qubits)

    def edge(self, a: int, b: int) -> EdgeProps:
        try:
            return self.edges[_edge_key(a, b)]
        except KeyError:
            raise DeviceError(f"logical qubits {a} and {b} are not adjacent in the layout") from None

    def kraus_1q(self, q: int) -> list[np.ndarray]:
        props = self.qubits[q]
        return compose_kraus(
            depolarizing_kraus(props.error_1q, 1),
            thermal_relaxation_kraus(props.t1_us, props.t2_us, props.duration_1q_ns),
        )

    def kraus_2q(self, a: int, b: int) -> list[np.ndarray]:
        """Kraus set on (a, b) with ``a`` as the most significant factor."""
        e = self.edge(a, b)
        ra = thermal_relaxation_kraus(self.qubits[a].t1_us, self.qubits[a].t2_us, e.duration_2q_ns)
        rb = thermal_relaxation_kraus(self.qubits[b].t1_us, self.qubits[b].t2_us, e.duration_2q_ns)
        relax = [np.kron(x, y) for x in ra for y in rb]
        return compose_kraus(depolarizing_kraus(e.error_2q, 2), relax)

    def superop_1q(self, q: int) -> np.ndarray:
        """4x4 superoperator of the single-qubit gate channel (row-major block flattening)."""
        key = ("1q", q)
        if key not in self._superops:
            self._superops[key] = kraus_to_superop(self.kraus_1q(q))
        return self._superops[key]

    def superop_2q(self, a: int, b: int) -> np.ndarray:
        """16x16 superoperator of the two-qubit gate channel, ``a`` most significant."""
        key = ("2q", a, b)
        if key not in self._superops:
            self._superops[key] = kraus_to_superop(self.kraus_2q(a, b))
        return self._superops[key]

    def readout_matrix(self, q: int) -> np.ndarray:
        """Column-stochastic ``m[measured, prepared]``."""
        return np.array(self.qubits[q].readout, dtype=float).T

    def measurement_map(self, q: int, gate_noise: bool) -> np.ndarray:
        m = self.readout_matrix(q)
        if gate_noise:
            props = self.qubits[q]
            p = props.error_1q
            gamma, _ = relaxation_factors(props.t1_us, props.t2_us, props.duration_1q_ns)
            depol = np.array([[1 - p / 2, p / 2], [p / 2, 1 - p / 2]])
            relax = np.array([[1.0, gamma], [0.0, 1 - gamma]])
            m = m @ relax @ depol
        return m

    def apply_measurement(self, p: np.ndarray, n: int, gate_noise: bool = False) -> np.ndarray:
        for q in range(n):
            p = _bit_stochastic(p, q, n, self.measurement_map(q, gate_noise))
        return p


def build_noise_model(desc: DeviceDescription, layout: Sequence[int]) -> NoiseModel:
    """Restrict the device to the laid-out qubits; logical edges are consecutive layout pairs."""
    layout = _validate_layout(desc, layout, len(layout))
    qubits = [desc.qubits[q] for q in layout]
    edges = {(i, i + 1): desc.edge(layout[i], layout[i + 1]) for i in range(len(layout) - 1)}
    return NoiseModel(qubits, edges, list(layout))


def ideal_noise_model(n_qubits: int) -> NoiseModel:
    return build_noise_model(ideal_device(n_qubits), list(range(n_qubits)))
