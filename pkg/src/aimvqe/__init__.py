"""Variational ground-state search for Anderson impurity models with identity-initialized ansatze."""

from .model import AimParams, PauliSum, aim_qubit_hamiltonian, table_params
from .vqe import RunConfig, VqeRunRecord, build_problem, run_vqe, seed_sweep

__all__ = [
    "AimParams",
    "PauliSum",
    "RunConfig",
    "VqeRunRecord",
    "aim_qubit_hamiltonian",
    "build_problem",
    "run_vqe",
    "seed_sweep",
    "table_params",
]
__version__ = "0.1.0"
