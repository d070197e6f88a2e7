"""Continuous-time protocol integrated with fixed-step classical RK4.

Both phases are affine ODEs z' = M z + g(t), so the integrator only ever sees
a constant matrix and a forcing table on the half-step grid; the hard switch
from the scrambling rule to the normal rule happens exactly at grid point t0.
"""
from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass

import numpy as np

from . import kernels
from .dt_engine import ConfigError
from .graph import Digraph, laplacian, require_valid
from .perturb import ContinuousPerturbation, PerturbationError

_GRID_RTOL = 1e-9


@dataclass(frozen=True)
class CtConfig:
    c1: float
    c2: float = 1.0
    t0: float = 1.0
    h: float = 1e-3
    t_end: float = 10.0
    sample_stride: int = 10

    def check(self) -> None:
        errors = []
        if self.c1 == 0:
            errors.append("c1 must be nonzero")
        if not self.c2 > 0:
            errors.append("c2 must be positive")
        if not self.t0 > 0:
            errors.append("t0 must be positive")
        if not self.h > 0:
            errors.append("h must be positive")
        if not self.t_end > self.t0:
            errors.append("t_end must exceed t0")
        if self.sample_stride < 1:
            errors.append("sample_stride must be >= 1")
        if not errors:
            for name, span in (("t0", self.t0), ("t_end - t0", self.t_end - self.t0)):
                if _steps(span, self.h) is None:
                    errors.append(f"h={self.h} does not divide {name}={span}")
        if errors:
            raise ConfigError("; ".join(errors))

    @property
    def scramble_steps(self) -> int:
        return _steps(self.t0, self.h)

    @property
    def normal_steps(self) -> int:
        return _steps(self.t_end - self.t0, self.h)


def _steps(span: float, h: float) -> int | None:
    ratio = span / h
    n = round(ratio)
    if n < 1 or abs(ratio - n) > _GRID_RTOL * max(1.0, n):
        return None
    return n


@dataclass(frozen=True, eq=False)
class CtTrajectory:
    times: np.ndarray
    states: np.ndarray  # (samples, n)
    t0_index: int  # sample row holding x(t0)

    def spread(self) -> np.ndarray:
        return self.states.max(axis=1) - self.states.min(axis=1)

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["t"] + [f"x_{i}" for i in range(1, self.states.shape[1] + 1)])
        for t, row in zip(self.times, self.states):
            w.writerow([repr(float(t))] + [repr(float(v)) for v in row])
        return buf.getvalue()


@dataclass(frozen=True, eq=False)
class CtTranscript:
    """Sampled edge messages.

    ``obfuscated[l]`` is True for samples at t <= t0. The instant t0 appears
    twice: once obfuscated and once as the hand-over to true states, which is
    what any listener learns from the right limit t -> t0+.
    """

    edges: tuple[tuple[int, int], ...]
    times: np.ndarray
    obfuscated: np.ndarray
    values: np.ndarray  # (rows, |E|)

    def column(self, sender: int, receiver: int) -> np.ndarray:
        return self.values[:, self.edges.index((sender, receiver))]

    def records(self):
        for t, obf, row in zip(self.times, self.obfuscated, self.values):
            phase = "scramble" if obf else "normal"
            for (i, j), v in zip(self.edges, row):
                yield {"t": float(t), "from": i, "to": j, "value": float(v), "phase": phase}

    def to_jsonl(self) -> str:
        return "".join(json.dumps(r) + "\n" for r in self.records())

    def __len__(self):
        return self.values.size


def _check_state(g: Digraph, x) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    if x.shape != (g.n,):
        raise ValueError(f"state vector has shape {x.shape}, expected ({g.n},)")
    return x


def rhs_scramble(x, t: float, p: ContinuousPerturbation, c1: float, L: np.ndarray, ref_state=None) -> np.ndarray:
    """-c1 L x + c1 P(t)^T 1 on [0, t0]."""
    if t > p.horizon or t < 0:
        raise PerturbationError(f"t={t} outside the scrambling window [0, {p.horizon}]")
    P = p.eval_matrix(t, ref_state)
    return -c1 * (L @ x) + c1 * P.sum(axis=0)


def rhs_normal(x, c2: float, L: np.ndarray) -> np.ndarray:
    return -c2 * (L @ np.asarray(x, dtype=float))


def _scramble_phase(g, x0, p, c1, t0, n1):
    """Integrate [0, t0]. Returns (states, reference states or None)."""
    L = laplacian(g)
    grid = np.linspace(0.0, t0, 2 * n1 + 1)
    h = t0 / n1
    fb = p.feedback
    if fb is None:
        states = kernels.rk4_affine(-c1 * L, c1 * p.column_sums(grid), x0, h, n1)
        return states, None
    # reference run and corrected run share one affine system
    n = g.n
    cr = fb.reference_c1
    M = np.zeros((2 * n, 2 * n))
    M[:n, :n] = -cr * L
    M[n:, :n] = c1 * fb.gain * L
    M[n:, n:] = -c1 * L
    G = np.empty((grid.size, 2 * n))
    G[:, :n] = cr * fb.reference.column_sums(grid)
    G[:, n:] = c1 * (p.column_sums(grid) - fb.gain * (L @ fb.anchor))
    z0 = np.concatenate([fb.reference_x0, x0])
    Z = kernels.rk4_affine(M, G, z0, h, n1)
    return Z[:, n:], Z[:, :n]


def integrate(g: Digraph, x0, p: ContinuousPerturbation, cfg: CtConfig):
    """Run the protocol on [0, t_end]; returns ``(trajectory, transcript)``."""
    require_valid(g)
    cfg.check()
    x0 = _check_state(g, x0)
    if not math.isclose(p.horizon, cfg.t0, rel_tol=1e-12):
        raise ConfigError(f"perturbation horizon {p.horizon} differs from t0={cfg.t0}")
    if p.graph != g:
        raise ConfigError("perturbation was generated for a different graph")
    n1, n2 = cfg.scramble_steps, cfg.normal_steps
    S1, ref = _scramble_phase(g, x0, p, cfg.c1, cfg.t0, n1)

    L = laplacian(g)
    h2 = (cfg.t_end - cfg.t0) / n2
    S2 = kernels.rk4_affine(-cfg.c2 * L, np.zeros((2 * n2 + 1, g.n)), S1[-1], h2, n2)

    stride = cfg.sample_stride
    idx = np.union1d(np.arange(0, n1 + n2 + 1, stride), [n1, n1 + n2])
    scr = idx[idx <= n1]
    nrm = idx[idx > n1]
    t_scr = scr * (cfg.t0 / n1)
    t_scr[-1] = cfg.t0
    t_nrm = cfg.t0 + (nrm - n1) * h2
    times = np.concatenate([t_scr, t_nrm])
    states = np.vstack([S1[scr], S2[nrm - n1]])
    traj = CtTrajectory(times, states, t0_index=len(scr) - 1)

    senders, _ = g.edge_index
    ref_at = None if ref is None else ref[scr]
    obf_vals = S1[scr][:, senders] + p.edge_values(t_scr, ref_at)
    handover = S1[-1][senders][None, :]
    true_vals = S2[nrm - n1][:, senders]
    transcript = CtTranscript(
        g.edges,
        np.concatenate([t_scr, [cfg.t0], t_nrm]),
        np.concatenate([np.ones(len(scr), bool), np.zeros(1 + len(nrm), bool)]),
        np.vstack([obf_vals, handover, true_vals]),
    )
    return traj, transcript


def scramble_endpoint(g: Digraph, x0, p: ContinuousPerturbation, cfg: CtConfig) -> np.ndarray:
    """x(t0) computed on exactly the grid that :func:`integrate` uses."""
    cfg.check()
    S1, _ = _scramble_phase(g, _check_state(g, x0), p, cfg.c1, cfg.t0, cfg.scramble_steps)
    return S1[-1]
