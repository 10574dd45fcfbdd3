"""Optimizers for the variational loop.

All optimizers talk to an :class:`Objective`, which counts every energy
evaluation, so budgets and traces are exact regardless of batching.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy.optimize import minimize

OPTIMIZER_KINDS = ("qn", "nft", "spsa")
TERMINATIONS = ("tol", "max_evals", "max_iters", "stalled")


class Objective:
    """Energy function with an evaluation counter.

    Args:
        func: ``func(x, eval_index) -> float``. The index lets stochastic
            objectives derive a distinct, reproducible seed per evaluation.
        batch_func: Optional ``batch_func(X) -> energies`` for deterministic
            objectives that can evaluate many parameter rows at once.
        mode: Free-form label (``"exact"``, ``"shots"``, ``"noisy"``).
    """

    def __init__(self, func: Callable[[np.ndarray, int], float] | None = None, batch_func=None, mode: str = "exact"):
        if func is None and batch_func is None:
            raise ValueError("need func or batch_func")
        self.func = func
        self.batch_func = batch_func
        self.mode = mode
        self.n_evals = 0

    def __call__(self, x) -> float:
        x = np.asarray(x, dtype=float)
        if self.func is None:
            value = float(self.batch_func(x[None, :])[0])
        else:
            value = float(self.func(x, self.n_evals))
        self.n_evals += 1
        return value

    def batch(self, xs) -> np.ndarray:
        xs = np.atleast_2d(np.asarray(xs, dtype=float))
        if self.batch_func is not None:
            values = np.asarray(self.batch_func(xs), dtype=float)
            self.n_evals += len(xs)
            return values
        return np.array([self(x) for x in xs])


@dataclass
class OptimizerConfig:
    """Optimizer choice and budget.

    ``max_iters`` counts accepted quasi-Newton steps, full NFT sweeps over
    all parameters, or SPSA steps.
    """

    kind: str = "qn"
    fd_step: float = 0.01
    rel_tol: float = 2.22e-15
    max_evals: int = 15000
    max_iters: int = 15000
    gtol: float = 1e-10
    memory: int = 10
    reset_interval: int = 32
    spsa_a: float = 0.2
    spsa_c: float = 0.1
    spsa_alpha: float = 0.602
    spsa_gamma: float = 0.101
    seed: int = 0

    def __post_init__(self):
        self.kind = self.kind.lower()
        if self.kind not in OPTIMIZER_KINDS:
            raise ValueError(f"unknown optimizer {self.kind!r}; expected one of {OPTIMIZER_KINDS}")
        if self.fd_step <= 0:
            raise ValueError("fd_step must be positive")
        if self.max_evals < 1 or self.max_iters < 1:
            raise ValueError("budgets must be positive")

    @classmethod
    def qn(cls, **kw) -> "OptimizerConfig":
        return cls(kind="qn", **kw)

    @classmethod
    def nft(cls, **kw) -> "OptimizerConfig":
        kw.setdefault("max_evals", 1024)
        kw.setdefault("max_iters", 1024)
        return cls(kind="nft", **kw)

    @classmethod
    def spsa(cls, **kw) -> "OptimizerConfig":
        kw.setdefault("max_evals", 2048)
        kw.setdefault("max_iters", 1024)
        return cls(kind="spsa", **kw)

    def to_dict(self) -> dict:
        return dict(self.__dict__)


@dataclass
class OptTrace:
    params: list[np.ndarray] = field(default_factory=list)
    energies: list[float] = field(default_factory=list)
    termination: str = ""
    n_evals: int = 0
    message: str = ""

    @property
    def n_iters(self) -> int:
        return max(0, len(self.energies) - 1)

    def record(self, x, energy: float):
        self.params.append(np.array(x, dtype=float))
        self.energies.append(float(energy))

    def to_dict(self, with_params: bool = False) -> dict:
        d = {
            "energies": self.energies,
            "termination": self.termination,
            "n_evals": self.n_evals,
            "n_iters": self.n_iters,
            "message": self.message,
        }
        if with_params:
            d["params"] = [p.tolist() for p in self.params]
        return d


def fd_value_and_gradient(f: Objective, x, eps: float = 0.01) -> tuple[float, np.ndarray]:
    """Forward differences from one batch of ``dim + 1`` evaluations."""
    if eps <= 0:
        raise ValueError("eps must be positive")
    x = np.asarray(x, dtype=float)
    values = f.batch(np.vstack([x, x + eps * np.eye(x.size)]))
    return float(values[0]), (values[1:] - values[0]) / eps


def fd_gradient(f: Objective, x, eps: float = 0.01) -> np.ndarray:
    return fd_value_and_gradient(f, x, eps)[1]


def parameter_shift_gradient(f: Objective, x) -> np.ndarray:
    """Exact gradient of a sum of single-angle sinusoids, ``(f(x+pi/2 e_i) - f(x-pi/2 e_i)) / 2``."""
    x = np.asarray(x, dtype=float)
    shift = 0.5 * np.pi * np.eye(x.size)
    values = f.batch(np.vstack([x + shift, x - shift]))
    return 0.5 * (values[: x.size] - values[x.size :])


def _stalled(trace: OptTrace) -> bool:
    e = trace.energies
    return trace.n_iters <= 1 and abs(e[-1] - e[0]) <= 1e-12 * max(1.0, abs(e[0]))


_QN_MESSAGES = {
    "RELATIVE REDUCTION": "tol",
    "PROJECTED GRADIENT": "tol",
    "EVALUATIONS EXCEEDS": "max_evals",
    "ITERATIONS REACHED": "max_iters",
    "ABNORMAL": "stalled",
}


class _BudgetExhausted(Exception):
    pass


def minimize_qn(f: Objective, x0, cfg: OptimizerConfig) -> tuple[np.ndarray, OptTrace]:
    """Bounded limited-memory quasi-Newton with forward-difference gradients.

    Bounds are ``x0 +/- 2 pi``. Each value-and-gradient request costs one
    batch of ``dim + 1`` evaluations; a request that would overrun
    ``max_evals`` ends the run at the last accepted iterate.
    """
    x0 = np.asarray(x0, dtype=float)
    start = f.n_evals
    trace = OptTrace()
    cache: dict[bytes, float] = {}

    def fg(x):
        if f.n_evals - start + x.size + 1 > cfg.max_evals:
            raise _BudgetExhausted
        value, grad = fd_value_and_gradient(f, x, cfg.fd_step)
        cache[x.tobytes()] = value
        if not trace.energies:
            trace.record(x, value)
        return value, grad

    def callback(xk):
        trace.record(xk, cache[np.asarray(xk).tobytes()])

    try:
        res = minimize(
            fg,
            x0,
            jac=True,
            method="L-BFGS-B",
            bounds=list(zip(x0 - 2 * np.pi, x0 + 2 * np.pi)),
            callback=callback,
            options={
                "ftol": cfg.rel_tol,
                "gtol": cfg.gtol,
                "maxcor": cfg.memory,
                "maxfun": cfg.max_evals,
                "maxiter": cfg.max_iters,
            },
        )
    except _BudgetExhausted:
        if not trace.energies:
            raise ValueError(f"max_evals={cfg.max_evals} cannot afford one gradient ({x0.size + 1} evaluations)")
        trace.termination = "max_evals"
        trace.message = "evaluation budget exhausted"
        trace.n_evals = f.n_evals - start
        return trace.params[-1].copy(), trace
    x = np.asarray(res.x, dtype=float)
    if not np.array_equal(trace.params[-1], x):
        trace.record(x, float(res.fun))
    message = res.message if isinstance(res.message, str) else res.message.decode()
    trace.message = message
    trace.termination = next((v for k, v in _QN_MESSAGES.items() if k in message), "stalled")
    if trace.termination == "tol" and _stalled(trace):
        trace.termination = "stalled"
    trace.n_evals = f.n_evals - start
    return x, trace


def nft_update(theta: float, z0: float, z_plus: float, z_minus: float) -> tuple[float, float, float]:
    """Fit ``a cos(phi - b) + c`` through three samples and return ``(new_theta, new_value, a)``.

    ``z_plus`` and ``z_minus`` are the values at ``theta +/- pi/2``. The new angle
    is the analytic minimizer ``b + pi`` where the fitted value is ``c - a``.
    """
    c = 0.5 * (z_plus + z_minus)
    s = 0.5 * (z_minus - z_plus)  # a sin(theta - b)
    k = z0 - c  # a cos(theta - b)
    a = float(np.hypot(s, k))
    if a < 1e-12:
        return theta, z0, a
    b = theta - np.arctan2(s, k)
    return float(b + np.pi), float(c - a), a


def minimize_nft(f: Objective, x0, cfg: OptimizerConfig) -> tuple[np.ndarray, OptTrace]:
    """Sequential single-parameter minimization of a sinusoidal landscape.

    Two evaluations per coordinate; the current value is carried over from
    the previous update's fit and re-measured every ``reset_interval`` updates
    so shot noise does not accumulate.
    """
    x = np.array(x0, dtype=float)
    start = f.n_evals
    trace = OptTrace()
    z0 = f(x)
    trace.record(x, z0)
    updates = 0
    termination = "max_iters"
    for _ in range(cfg.max_iters):
        sweep_start = z0
        done = False
        for i in range(x.size):
            reset = cfg.reset_interval > 0 and updates > 0 and updates % cfg.reset_interval == 0
            if f.n_evals - start + 2 + reset > cfg.max_evals:
                done, termination = True, "max_evals"
                break
            if reset:
                z0 = f(x)
            shifted = np.tile(x, (2, 1))
            shifted[0, i] += 0.5 * np.pi
            shifted[1, i] -= 0.5 * np.pi
            z_plus, z_minus = f.batch(shifted)
            x[i], z0, _ = nft_update(x[i], z0, z_plus, z_minus)
            updates += 1
        if done:
            if updates and (not trace.params or not np.array_equal(trace.params[-1], x)):
                trace.record(x, z0)
            break
        trace.record(x, z0)
        if abs(sweep_start - z0) <= cfg.rel_tol * max(1.0, abs(z0)):
            termination = "tol"
            break
    trace.termination = termination
    if termination == "tol" and _stalled(trace):
        trace.termination = "stalled"
    trace.n_evals = f.n_evals - start
    return x, trace


def minimize_spsa(f: Objective, x0, cfg: OptimizerConfig) -> tuple[np.ndarray, OptTrace]:
    """Simultaneous-perturbation stochastic approximation.

    Gains ``a_k = a / (k + 1 + A)**alpha`` and ``c_k = c / (k + 1)**gamma`` with
    ``A = 0.1 * max_iters``; Rademacher perturbations from ``cfg.seed``.
    """
    x = np.array(x0, dtype=float)
    start = f.n_evals
    rng = np.random.default_rng(cfg.seed)
    stability = 0.1 * cfg.max_iters
    trace = OptTrace()
    trace.record(x, f(x))
    termination = "max_iters"
    for k in range(cfg.max_iters):
        if f.n_evals - start + 2 > cfg.max_evals:
            termination = "max_evals"
            break
        ak = cfg.spsa_a / (k + 1 + stability) ** cfg.spsa_alpha
        ck = cfg.spsa_c / (k + 1) ** cfg.spsa_gamma
        delta = rng.choice([-1.0, 1.0], size=x.size)
        y_plus, y_minus = f.batch(np.vstack([x + ck * delta, x - ck * delta]))
        x = x - ak * (y_plus - y_minus) / (2 * ck) * delta
        trace.record(x, 0.5 * (y_plus + y_minus))
    trace.termination = termination
    trace.n_evals = f.n_evals - start
    return x, trace


def run_optimizer(f: Objective, x0, cfg: OptimizerConfig) -> tuple[np.ndarray, OptTrace]:
    return {"qn": minimize_qn, "nft": minimize_nft, "spsa": minimize_spsa}[cfg.kind](f, x0, cfg)
