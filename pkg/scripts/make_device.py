"""Regenerate the bundled approximate 27-qubit heavy-hex device file.

Per-qubit values are seeded draws around typical calibration figures
(T1 120 +/- 28 us, T2 124 +/- 50 us); they are not a real calibration.

    python3 scripts/make_device.py [--seed 7] [--out src/aimvqe/data/fakemumbai_approx.json]
"""

import argparse
import json

import numpy as np

EDGES = [
    (0, 1), (1, 2), (1, 4), (2, 3), (3, 5), (4, 7), (5, 8), (6, 7), (7, 10), (8, 9), (8, 11),
    (10, 12), (11, 14), (12, 13), (12, 15), (13, 14), (14, 16), (15, 18), (16, 19), (17, 18),
    (18, 21), (19, 20), (19, 22), (21, 23), (22, 25), (23, 24), (24, 25), (25, 26),
]
N_QUBITS = 27
DESCRIPTION = (
    "Approximate 27-qubit heavy-hex device. T1/T2 are seeded draws matching a mean of "
    "120 +/- 28 us and 124 +/- 50 us; gate and readout errors are illustrative values "
    "chosen so that noisy runs show roughly an order-of-magnitude energy-error increase "
    "over noiseless ones. Not a real calibration snapshot."
)


def make(seed: int, e1: float, e2: float, ro: float) -> dict:
    rng = np.random.default_rng(seed)
    # shift the draws so the sample means sit on the targets
    t1s = rng.normal(120.0, 28.0, N_QUBITS)
    t1s = np.clip(t1s - t1s.mean() + 120.0, 50.0, 250.0)
    t2s = rng.normal(124.0, 50.0, N_QUBITS)
    for _ in range(50):  # the T2 <= 2 T1 clip moves the mean, so recentre until it settles
        t2s = np.clip(t2s - t2s.mean() + 124.0, 20.0, 2.0 * t1s)
    qubits = []
    for t1, t2 in zip(t1s, t2s):
        t1, t2 = float(t1), float(t2)
        p01 = float(np.clip(rng.normal(ro, ro / 3), ro / 4, 4 * ro))
        p10 = float(np.clip(rng.normal(1.5 * ro, ro / 2), ro / 4, 6 * ro))
        qubits.append(
            {
                "t1_us": round(t1, 2),
                "t2_us": round(t2, 2),
                "readout": [[1 - round(p01, 5), round(p01, 5)], [round(p10, 5), 1 - round(p10, 5)]],
                "gate_1q": {"error": round(float(np.clip(rng.normal(e1, e1 / 3), e1 / 4, 4 * e1)), 6), "duration_ns": 35.56},
            }
        )
    edges = []
    for a, b in EDGES:
        err = float(np.clip(rng.normal(e2, e2 / 3), e2 / 4, 4 * e2))
        dur = float(rng.choice([320.0, 355.56, 391.11, 426.67, 462.22]))
        edges.append({"pair": [a, b], "gate_2q": {"error": round(err, 6), "duration_ns": dur}})
    return {"name": "fakemumbai_approx", "description": DESCRIPTION, "qubits": qubits, "edges": edges}


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--seed", type=int, default=7)
    ap.add_argument("--e1", type=float, default=3e-4, help="mean single-qubit gate error")
    ap.add_argument("--e2", type=float, default=1e-2, help="mean two-qubit gate error")
    ap.add_argument("--ro", type=float, default=1.5e-2, help="mean readout flip probability")
    ap.add_argument("--out", default="src/aimvqe/data/fakemumbai_approx.json")
    args = ap.parse_args()
    with open(args.out, "w") as fh:
        json.dump(make(args.seed, args.e1, args.e2, args.ro), fh, indent=1)
        fh.write("\n")


if __name__ == "__main__":
    main()
