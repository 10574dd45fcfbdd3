"""PNG figures drawn from the report CSVs."""

from __future__ import annotations

import csv
from collections import defaultdict
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402


def _read(path: Path) -> list[dict]:
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


def _num(v: str) -> float:
    return float(v) if v not in ("", None) else float("nan")


def _empty(ax, title: str):
    ax.text(0.5, 0.5, "no data", ha="center", va="center", transform=ax.transAxes)
    ax.set_title(title)


def plot_best_fidelities(rows: list[dict], out: Path):
    fig, ax = plt.subplots(figsize=(6, 4))
    best: dict[tuple[int, int], float] = defaultdict(lambda: -np.inf)
    hf: dict[int, float] = {}
    for r in rows:
        key = (int(r["n_qubits"]), int(r["layers"]))
        best[key] = max(best[key], _num(r["fidelity"]))
        hf[key[0]] = _num(r["hf_fidelity"])
    if not best:
        _empty(ax, "best fidelity")
    else:
        sizes = sorted({k[0] for k in best})
        layers = sorted({k[1] for k in best})
        width = 0.8 / (len(layers) + 1)
        x = np.arange(len(sizes))
        ax.bar(x, [hf[s] for s in sizes], width, label="mean-field", color="0.7")
        for i, layer in enumerate(layers):
            ax.bar(x + (i + 1) * width, [best.get((s, layer), np.nan) for s in sizes], width, label=f"{layer} layers")
        ax.set_xticks(x + 0.4 - width / 2, [str(s) for s in sizes])
        ax.set_xlabel("qubits")
        ax.set_ylabel("best fidelity")
        ax.set_ylim(0.5, 1.0)
        ax.legend(fontsize=8)
    fig.tight_layout()
    fig.savefig(out, dpi=120)
    plt.close(fig)


def plot_seed_fidelities(rows: list[dict], out: Path, hf_key: str | None = None):
    fig, ax = plt.subplots(figsize=(6, 4))
    groups: dict[str, list[tuple[int, float]]] = defaultdict(list)
    for r in rows:
        label = f"{r['experiment']} ({r['init']}, {r['initial_state']}, L={r['layers']})"
        groups[label].append((int(r["seed"]), _num(r["fidelity"])))
    if not groups:
        _empty(ax, "fidelity per seed")
    for label, pts in groups.items():
        pts.sort()
        ax.plot([p[0] for p in pts], [p[1] for p in pts], "o", ms=3, label=label)
    if groups:
        ax.set_xlabel("seed")
        ax.set_ylabel("fidelity")
        ax.legend(fontsize=7)
    fig.tight_layout()
    fig.savefig(out, dpi=120)
    plt.close(fig)


def plot_onion_vs_random(rows: list[dict], out: Path):
    fig, ax = plt.subplots(figsize=(6, 4))
    by_init: dict[str, list[float]] = defaultdict(list)
    hf = None
    for r in rows:
        by_init[r["init"]].append(_num(r["fidelity"]))
        hf = _num(r["hf_fidelity"])
    if not by_init:
        _empty(ax, "initialization comparison")
    else:
        names = sorted(by_init)
        for i, name in enumerate(names):
            f = np.sort(by_init[name])
            ax.plot(np.full(f.size, i) + np.linspace(-0.2, 0.2, f.size), f, "o", ms=3)
        ax.axhline(hf, color="k", ls="--", lw=1, label="mean-field fidelity")
        ax.set_xticks(range(len(names)), names)
        ax.set_ylabel("fidelity")
        ax.legend(fontsize=8)
    fig.tight_layout()
    fig.savefig(out, dpi=120)
    plt.close(fig)


def _mode_label(r: dict) -> str:
    return r["eval_mode"] if not r["shots"] else f"{r['eval_mode']} {r['shots']} shots"


def plot_by_mode(rows: list[dict], out: Path, column: str, ylabel: str, log: bool = False):
    fig, ax = plt.subplots(figsize=(6, 4))
    best: dict[tuple[str, int], float] = {}
    for r in rows:
        value = _num(r[column]) if r.get(column) else _num(r["energy_error_eV" if "energy" in column else "fidelity"])
        key = (_mode_label(r), int(r["n_qubits"]))
        better = min if "energy" in column else max
        best[key] = better(best.get(key, value), value)
    if not best:
        _empty(ax, ylabel)
    else:
        modes = sorted({k[0] for k in best})
        sizes = sorted({k[1] for k in best})
        width = 0.8 / len(modes)
        x = np.arange(len(sizes))
        for i, mode in enumerate(modes):
            vals = [abs(best.get((mode, s), np.nan)) for s in sizes]
            ax.bar(x + i * width, vals, width, label=mode)
        ax.set_xticks(x + 0.4 - width / 2, [str(s) for s in sizes])
        ax.set_xlabel("qubits")
        ax.set_ylabel(ylabel)
        if log:
            ax.set_yscale("log")
        ax.legend(fontsize=8)
    fig.tight_layout()
    fig.savefig(out, dpi=120)
    plt.close(fig)


def render_report_figures(directory) -> list[Path]:
    """Draw one PNG next to each report CSV that exists in ``directory``."""
    d = Path(directory)
    made = []
    jobs = {
        "fig2_fidelities": lambda rows, out: plot_best_fidelities(rows, out),
        "fig3_seeds": lambda rows, out: plot_seed_fidelities(rows, out),
        "fig5_onion_vs_random": lambda rows, out: plot_onion_vs_random(rows, out),
        "fig6_energy_error": lambda rows, out: plot_by_mode(rows, out, "noisy_energy_error_eV", "best energy error (eV)", log=True),
        "fig7_fidelity_noisy": lambda rows, out: plot_by_mode(rows, out, "fidelity", "best fidelity"),
    }
    for stem, draw in jobs.items():
        src = d / f"{stem}.csv"
        if src.exists():
            out = d / f"{stem}.png"
            draw(_read(src), out)
            made.append(out)
    return made
