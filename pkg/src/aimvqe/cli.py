"""Command-line entry point: ``aimvqe <command> ...``.

Exit codes: 0 success, 1 runtime failure (a JSON error record goes to
stderr), 2 usage error.
"""

from __future__ import annotations

import argparse
import csv
import itertools
import json
import sys
from importlib import resources
from pathlib import Path

import jsonschema
import numpy as np

from . import exact
from .hf import ghf_solve, slater_statevector
from .model import (
    AimParams,
    aim_qubit_hamiltonian,
    build_aim_hamiltonian,
    chain_ordering,
    count_pauli_strings,
    default_ordering,
    group_measurement_bases,
    jordan_wigner,
    make_ordering,
    rotate_to_mo_basis,
    table_params,
)

REPORT_FILES = {
    "fig2": (
        "fig2_fidelities.csv",
        ["experiment", "n_qubits", "layers", "init", "initial_state", "seed", "fidelity", "hf_fidelity"],
    ),
    "fig3": (
        "fig3_seeds.csv",
        ["experiment", "n_qubits", "layers", "init", "initial_state", "seed", "fidelity", "energy_error_eV"],
    ),
    "fig5": (
        "fig5_onion_vs_random.csv",
        ["experiment", "n_qubits", "layers", "init", "seed", "fidelity", "hf_fidelity", "above_hf"],
    ),
    "fig6": (
        "fig6_energy_error.csv",
        ["experiment", "n_qubits", "layers", "eval_mode", "shots", "seed", "energy_error_eV", "noisy_energy_error_eV"],
    ),
    "fig7": (
        "fig7_fidelity_noisy.csv",
        ["experiment", "n_qubits", "layers", "eval_mode", "shots", "seed", "fidelity", "noisy_fidelity"],
    ),
}

EXPERIMENT_SCHEMA = {
    "type": "object",
    "required": ["experiments"],
    "properties": {
        "output_dir": {"type": "string"},
        "workers": {"type": "integer", "minimum": 1},
        "experiments": {
            "type": "array",
            "minItems": 1,
            "items": {
                "type": "object",
                "required": ["name", "base", "seeds"],
                "properties": {
                    "name": {"type": "string", "pattern": "^[A-Za-z0-9_.-]+$"},
                    "figure": {"enum": sorted(REPORT_FILES)},
                    "base": {"type": "object"},
                    "seeds": {
                        "oneOf": [
                            {"type": "array", "minItems": 1, "items": {"type": "integer"}},
                            {
                                "type": "object",
                                "required": ["count"],
                                "properties": {
                                    "start": {"type": "integer"},
                                    "count": {"type": "integer", "minimum": 1},
                                },
                            },
                        ]
                    },
                    "n_b": {"type": "array", "minItems": 1, "items": {"type": "integer", "minimum": 1}},
                    "layers": {"type": "array", "minItems": 1, "items": {"type": "integer", "minimum": 1}},
                    "inits": {"type": "array", "minItems": 1, "items": {"type": "string"}},
                    "initial_states": {"type": "array", "minItems": 1, "items": {"type": "string"}},
                    "eval_modes": {"type": "array", "minItems": 1, "items": {"type": "string"}},
                    "shots": {"type": "array", "minItems": 1, "items": {"type": "integer", "minimum": 1}},
                },
            },
        },
    },
}


class UsageError(Exception):
    pass


def _load_json(path: str) -> dict:
    p = Path(path)
    if not p.is_file():
        raise UsageError(f"file not found: {path}")
    try:
        return json.loads(p.read_text())
    except json.JSONDecodeError as exc:
        raise UsageError(f"{path} is not valid JSON: {exc}") from None


def _params_from_args(args) -> AimParams:
    if getattr(args, "params", None):
        doc = _load_json(args.params)
        try:
            return AimParams.from_dict(doc)
        except (KeyError, TypeError, ValueError) as exc:
            raise UsageError(f"invalid parameter file {args.params}: {exc}") from None
    if args.nb is None:
        raise UsageError("give --nb or --params")
    try:
        return table_params(args.nb)
    except (KeyError, ValueError) as exc:
        raise UsageError(str(exc)) from None


# ---------------------------------------------------------------------------
# Commands
# ---------------------------------------------------------------------------


def cmd_build_ham(args) -> int:
    params = _params_from_args(args)
    terms = build_aim_hamiltonian(params)
    if args.basis == "ao":
        h = jordan_wigner(terms, make_ordering(args.ordering, params.n_b))
    else:
        n_el = exact.ground_electron_count(params)
        h = jordan_wigner(rotate_to_mo_basis(terms, ghf_solve(params, n_el)), default_ordering(params.n_b))
    try:
        groups = len(group_measurement_bases(h))
    except ValueError:
        groups = None
    if args.out:
        Path(args.out).write_text(json.dumps(h.to_json(), indent=1) + "\n")
    print(f"qubits: {h.n_qubits}")
    print(f"pauli_strings: {count_pauli_strings(h)}")
    print(f"measurement_groups: {groups if groups is not None else 'n/a (terms mix X and Y on one string)'}")
    return 0


def cmd_exact(args) -> int:
    params = _params_from_args(args)
    h = aim_qubit_hamiltonian(params, "chain")
    spectrum = exact.ground(h)
    counts = exact.ground_particle_numbers(spectrum, h.n_qubits)
    n_el = exact.ground_electron_count(params)
    psi = slater_statevector(ghf_solve(params, n_el), chain_ordering(params.n_b))
    out = {
        "n_b": params.n_b,
        "n_qubits": h.n_qubits,
        "e0_eV": spectrum.e0,
        "degeneracy": spectrum.degeneracy,
        "particle_number": counts[0] if len(set(np.round(counts, 8))) == 1 else counts,
        "hf_fidelity": exact.fidelity(psi, spectrum),
    }
    print(json.dumps(out, indent=1))
    return 0


def _run_config(doc: dict):
    from .vqe import RunConfig

    try:
        return RunConfig.from_dict(doc)
    except (KeyError, TypeError, ValueError) as exc:
        raise UsageError(f"invalid run configuration: {exc}") from None


def cmd_vqe(args) -> int:
    from .vqe import run_vqe

    cfg = _run_config(_load_json(args.config))
    record = run_vqe(cfg)
    text = record.to_json(indent=1)
    if args.out:
        Path(args.out).write_text(text + "\n")
    else:
        print(text)
    print(
        f"energy_error_eV={record.energy_error:.6g} fidelity={record.final_fidelity:.6f} "
        f"evals={record.trace.n_evals} termination={record.trace.termination}",
        file=sys.stderr,
    )
    return 0


def _seed_list(spec) -> list[int]:
    if isinstance(spec, list):
        return [int(s) for s in spec]
    start = int(spec.get("start", 0))
    return list(range(start, start + int(spec["count"])))


def expand_experiment(exp: dict):
    """Yield ``(RunConfig template, seeds)`` for every combination of the sweep axes."""
    base = exp["base"]
    seeds = _seed_list(exp["seeds"])
    axes = {
        "n_b": exp.get("n_b", [base.get("n_b")]),
        "layers": exp.get("layers", [base.get("ansatz", {}).get("n_layers", 4)]),
        "init": exp.get("inits", [base.get("init", {}).get("kind", "onion")]),
        "initial_state": exp.get("initial_states", [base.get("initial_state", "hf")]),
        "eval_mode": exp.get("eval_modes", [base.get("eval_mode", "exact")]),
        "shots": exp.get("shots", [base.get("shots", 10240)]),
    }
    if axes["n_b"] == [None]:
        raise UsageError(f"experiment {exp['name']!r} needs n_b in base or as an axis")
    for n_b, layers, init, state, mode, shots in itertools.product(*axes.values()):
        doc = json.loads(json.dumps(base))
        doc["n_b"] = n_b
        doc.setdefault("ansatz", {})
        doc["ansatz"].pop("n_qubits", None)
        doc["ansatz"]["n_layers"] = layers
        doc.setdefault("init", {})["kind"] = init
        doc["initial_state"] = state
        doc["eval_mode"] = mode
        doc["shots"] = shots
        yield _run_config(doc), seeds


def cmd_sweep(args) -> int:
    from .vqe import seed_sweep, summarize, write_sweep_csv

    doc = _load_json(args.config)
    try:
        jsonschema.validate(doc, EXPERIMENT_SCHEMA)
    except jsonschema.ValidationError as exc:
        where = "/".join(str(p) for p in exc.absolute_path) or "<root>"
        raise UsageError(f"invalid experiment config at {where}: {exc.message}") from None
    out_dir = Path(args.out_dir or doc.get("output_dir", "aimvqe_out"))
    out_dir.mkdir(parents=True, exist_ok=True)
    workers = args.workers or doc.get("workers")
    manifest = []
    for exp in doc["experiments"]:
        plans = list(expand_experiment(exp))
        records = []
        for template, seeds in plans:
            records += seed_sweep(template, seeds, workers)
        csv_path = out_dir / f"{exp['name']}.csv"
        write_sweep_csv(records, csv_path)
        with open(out_dir / f"{exp['name']}.jsonl", "w") as fh:
            for r in records:
                fh.write(json.dumps(r.to_dict()) + "\n")
        summary = summarize(records)
        manifest.append(
            {"name": exp["name"], "figure": exp.get("figure"), "csv": csv_path.name, "runs": len(records), "summary": summary.to_dict()}
        )
        print(
            f"{exp['name']}: {len(records)} runs, {summary.n_failed} failed, "
            f"fraction above {summary.threshold:.4f}: {summary.fraction_above:.2f}, "
            f"F min/median/max {summary.min_fidelity:.4f}/{summary.median_fidelity:.4f}/{summary.max_fidelity:.4f}"
        )
    (out_dir / "manifest.json").write_text(json.dumps(manifest, indent=1) + "\n")
    return 0


def build_report(directory) -> dict[str, int]:
    """Write the per-figure CSVs from a sweep directory; returns row counts per file."""
    d = Path(directory)
    manifest_path = d / "manifest.json"
    if not manifest_path.is_file():
        raise UsageError(f"{d} has no manifest.json (run 'aimvqe sweep' first)")
    manifest = json.loads(manifest_path.read_text())
    hf_cache: dict[int, float] = {}
    rows: dict[str, list[dict]] = {k: [] for k in REPORT_FILES}
    for entry in manifest:
        fig = entry.get("figure")
        if fig is None:
            continue
        with open(d / entry["csv"], newline="") as fh:
            runs = list(csv.DictReader(fh))
        records = {}
        jsonl = d / entry["csv"].replace(".csv", ".jsonl")
        if jsonl.is_file():
            for line in jsonl.read_text().splitlines():
                rec = json.loads(line)
                records[(rec["config"]["seed"], rec["config"]["ansatz"]["n_qubits"])] = rec
        for run in runs:
            n = int(run["n_qubits"])
            if n not in hf_cache:
                rec = records.get((int(run["seed"]), n))
                hf_cache[n] = rec["hf_fidelity"] if rec else float("nan")
            row = dict(run, experiment=entry["name"], hf_fidelity=repr(hf_cache[n]))
            if fig == "fig5":
                row["above_hf"] = int(float(run["fidelity"]) > hf_cache[n]) if run["fidelity"] else ""
            rows[fig].append(row)
    counts = {}
    for fig, (name, columns) in REPORT_FILES.items():
        with open(d / name, "w", newline="") as fh:
            writer = csv.DictWriter(fh, fieldnames=columns, extrasaction="ignore", lineterminator="\n")
            writer.writeheader()
            for row in rows[fig]:
                writer.writerow(row)
        counts[name] = len(rows[fig])
    return counts


def cmd_report(args) -> int:
    counts = build_report(args.dir)
    for name, n in counts.items():
        print(f"{name}: {n} rows")
    if not args.no_plots:
        from .plotting import render_report_figures

        for path in render_report_figures(args.dir):
            print(f"figure: {path.name}")
    return 0


def demo_config_path() -> str:
    return str(resources.files("aimvqe.data").joinpath("demo_sweep.json"))


def cmd_demo_config(args) -> int:
    text = resources.files("aimvqe.data").joinpath("demo_sweep.json").read_text()
    if args.out:
        Path(args.out).write_text(text)
    else:
        print(text, end="")
    return 0


# ---------------------------------------------------------------------------
# Parser
# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="aimvqe", description="Impurity-model VQE experiments.")
    sub = p.add_subparsers(dest="command", required=True)

    def model_args(sp):
        sp.add_argument("--nb", type=int, choices=[1, 2, 3, 4], help="bath size (bundled parameter table)")
        sp.add_argument("--params", help="JSON file with n_b, eps0, eps, v, u")

    b = sub.add_parser("build-ham", help="write the qubit Hamiltonian as JSON")
    model_args(b)
    b.add_argument("--basis", choices=["ao", "mo"], default="ao")
    b.add_argument("--ordering", choices=["chain", "default"], default="chain")
    b.add_argument("--out", help="output JSON path")
    b.set_defaults(func=cmd_build_ham)

    e = sub.add_parser("exact", help="ground-state energy, particle number and mean-field fidelity")
    model_args(e)
    e.set_defaults(func=cmd_exact)

    v = sub.add_parser("vqe", help="run one configuration (JSON) and print its record")
    v.add_argument("config")
    v.add_argument("--out", help="write the record here instead of stdout")
    v.set_defaults(func=cmd_vqe)

    s = sub.add_parser("sweep", help="run an experiment file (seed sweeps over axes)")
    s.add_argument("config")
    s.add_argument("--out-dir", help="override the config's output_dir")
    s.add_argument("--workers", type=int, help="parallel runs (default: ONIONVQE_WORKERS or 1)")
    s.set_defaults(func=cmd_sweep)

    r = sub.add_parser("report", help="per-figure CSVs and PNGs from a sweep directory")
    r.add_argument("dir")
    r.add_argument("--no-plots", action="store_true")
    r.set_defaults(func=cmd_report)

    d = sub.add_parser("demo-config", help="print the bundled small demo experiment file")
    d.add_argument("--out")
    d.set_defaults(func=cmd_demo_config)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"aimvqe {args.command}: error: {exc}", file=sys.stderr)
        return 2
    except Exception as exc:
        print(json.dumps({"error": type(exc).__name__, "message": str(exc), "command": args.command}), file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
