"""Discrete-time protocol: one scrambled exchange at k=0, then the normal rule."""
from __future__ import annotations

import csv
import io
import json
from dataclasses import dataclass

import numpy as np

from . import kernels
from .graph import Digraph, epsilon_bound, laplacian, require_valid
from .perturb import DiscretePerturbation


class ConfigError(ValueError):
    """A protocol parameter violates its admissible range."""


@dataclass(frozen=True)
class DtConfig:
    eps1: float
    eps2: float
    iterations: int = 500
    convergence_tol: float = 1e-9
    early_stop: bool = False

    def check(self, g: Digraph) -> None:
        errors = []
        if self.eps1 == 0:
            errors.append("eps1 must be nonzero")
        bound = epsilon_bound(g)
        if not 0 < self.eps2 < bound:
            errors.append(f"eps2={self.eps2} outside (0, 1/max degree) = (0, {bound:g})")
        if self.iterations < 1:
            errors.append("iterations must be >= 1")
        if not self.convergence_tol > 0:
            errors.append("convergence_tol must be positive")
        if errors:
            raise ConfigError("; ".join(errors))


def default_eps2(g: Digraph) -> float:
    return 0.9 * epsilon_bound(g)


@dataclass(frozen=True, eq=False)
class DtTrajectory:
    states: np.ndarray  # (K+1, n)

    @property
    def steps(self) -> np.ndarray:
        return np.arange(self.states.shape[0])

    def spread(self) -> np.ndarray:
        return self.states.max(axis=1) - self.states.min(axis=1)

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        n = self.states.shape[1]
        w.writerow(["k"] + [f"x_{i}" for i in range(1, n + 1)])
        for k, row in enumerate(self.states):
            w.writerow([k] + [repr(float(v)) for v in row])
        return buf.getvalue()


@dataclass(frozen=True, eq=False)
class DtTranscript:
    """values[k, e] is the message on edge ``edges[e]`` sent at step k."""

    edges: tuple[tuple[int, int], ...]
    values: np.ndarray  # (steps, |E|)

    @property
    def steps(self) -> np.ndarray:
        return np.arange(self.values.shape[0])

    def message(self, k: int, sender: int, receiver: int) -> float:
        return float(self.values[k, self.edges.index((sender, receiver))])

    def records(self):
        for k, row in enumerate(self.values):
            for (i, j), v in zip(self.edges, row):
                yield {"k": k, "from": i, "to": j, "value": float(v)}

    def to_jsonl(self) -> str:
        return "".join(json.dumps(r) + "\n" for r in self.records())

    def __len__(self):
        return self.values.size


def _check_dims(g: Digraph, x, P: DiscretePerturbation | None = None) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    if x.shape != (g.n,):
        raise ValueError(f"state vector has shape {x.shape}, expected ({g.n},)")
    if P is not None and P.matrix.shape != (g.n, g.n):
        raise ValueError(f"perturbation is {P.matrix.shape}, expected ({g.n}, {g.n})")
    return x


def scramble_step(x0, P: DiscretePerturbation, eps1: float, g: Digraph):
    """First iteration. Returns the new states and the k=0 edge messages.

    Each agent only uses what it receives: x_i[1] = x_i[0]
    + eps1 * sum_j a_ij (y_j^(i)[0] - x_i[0]) + eps1 * p_i^(i).
    """
    if eps1 == 0:
        raise ConfigError("eps1 must be nonzero")
    x0 = _check_dims(g, x0, P)
    senders, receivers = g.edge_index
    messages = x0[senders] + P.matrix[senders, receivers]
    inbox = np.zeros(g.n)
    np.add.at(inbox, receivers, messages - x0[receivers])
    x1 = x0 + eps1 * inbox + eps1 * np.diag(P.matrix)
    return x1, dict(zip(g.edges, messages.tolist()))


def normal_step(xk, eps2: float, g: Digraph) -> np.ndarray:
    xk = _check_dims(g, xk)
    return xk - eps2 * (laplacian(g) @ xk)


def run(g: Digraph, x0, P: DiscretePerturbation, cfg: DtConfig):
    """Run the protocol for ``cfg.iterations`` steps.

    Returns ``(trajectory, transcript, converged_at)``; the transcript holds
    the messages of every executed step k = 0..K-1.
    """
    require_valid(g)
    cfg.check(g)
    x0 = _check_dims(g, x0, P)
    K = cfg.iterations
    x1, msg0 = scramble_step(x0, P, cfg.eps1, g)
    W = np.eye(g.n) - cfg.eps2 * laplacian(g)
    tail = kernels.iterate_linear(W, x1, K - 1)
    states = np.vstack([x0[None, :], tail])

    spread = states.max(axis=1) - states.min(axis=1)
    hits = np.flatnonzero(spread < cfg.convergence_tol)
    converged_at = int(hits[0]) if hits.size else None
    if cfg.early_stop and converged_at is not None:
        states = states[: converged_at + 1]

    senders, _ = g.edge_index
    steps = states.shape[0] - 1
    values = np.empty((max(steps, 1), len(g.edges)))
    values[0] = [msg0[e] for e in g.edges]
    if steps > 1:
        values[1:] = states[1:steps, senders]
    if steps == 0:
        values = values[:0]
    return DtTrajectory(states), DtTranscript(g.edges, values), converged_at
