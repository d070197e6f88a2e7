"""Edge-based perturbations.

A perturbation row belongs to its sending agent: entry (i, j) is what agent i
adds to the message it sends to j, and the diagonal entry is always derived so
that every row sums to zero.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .graph import Digraph


class PerturbationError(ValueError):
    pass


# ---------------------------------------------------------------- discrete


@dataclass(frozen=True, eq=False)
class DiscretePerturbation:
    matrix: np.ndarray

    def __post_init__(self):
        self.matrix.setflags(write=False)

    @property
    def n(self) -> int:
        return self.matrix.shape[0]

    def entry(self, sender: int, receiver: int) -> float:
        return float(self.matrix[sender - 1, receiver - 1])

    def column_sums(self) -> np.ndarray:
        """P^T 1, the net perturbation each agent absorbs in the scrambled step."""
        return self.matrix.sum(axis=0)

    def to_dict(self) -> dict:
        return {"n": self.n, "matrix": self.matrix.tolist()}

    @classmethod
    def from_dict(cls, data: dict, g: Digraph) -> "DiscretePerturbation":
        m = np.asarray(data["matrix"], dtype=float)
        if m.shape != (int(data["n"]), int(data["n"])) or m.shape[0] != g.n:
            raise PerturbationError("perturbation matrix shape does not match the graph")
        given = np.diag(m).copy()
        off = {e: m[e[0] - 1, e[1] - 1] for e in g.edges}
        mask = np.ones_like(m, dtype=bool)
        np.fill_diagonal(mask, False)
        mask[g.adjacency.T.astype(bool)] = False
        if np.any(m[mask] != 0):
            raise PerturbationError("nonzero perturbation on a pair that is not an edge")
        p = from_edge_values(g, off)
        if not np.allclose(np.diag(p.matrix), given, rtol=0, atol=1e-9):
            raise PerturbationError("diagonal entries are not the negated row sums")
        return p


def from_edge_values(g: Digraph, values) -> DiscretePerturbation:
    """Assemble P from a {(sender, receiver): value} map; diagonal derived."""
    m = np.zeros((g.n, g.n))
    for (i, j), v in values.items():
        if not g.has_edge(i, j):
            raise PerturbationError(f"({i},{j}) is not an edge")
        m[i - 1, j - 1] = v
    np.fill_diagonal(m, 0.0)
    np.fill_diagonal(m, -m.sum(axis=1))
    return DiscretePerturbation(m)


def zero_discrete(g: Digraph) -> DiscretePerturbation:
    return DiscretePerturbation(np.zeros((g.n, g.n)))


def random_discrete(g: Digraph, seed: int, amplitude: float = 10.0) -> DiscretePerturbation:
    if amplitude < 0:
        raise PerturbationError("amplitude must be non-negative")
    rng = np.random.default_rng(seed)
    draws = rng.uniform(-amplitude, amplitude, size=len(g.edges))
    return from_edge_values(g, dict(zip(g.edges, draws)))


# ---------------------------------------------------------------- signals


class Signal:
    """Real-valued signal on [0, t0], evaluated elementwise on arrays."""

    tag = ""

    def __call__(self, t):
        raise NotImplementedError

    def bound(self) -> float:
        raise NotImplementedError

    def to_dict(self) -> dict:
        raise NotImplementedError

    def __add__(self, other: "Signal") -> "Signal":
        return SumSignal((self, other))

    def __neg__(self) -> "Signal":
        return ScaledSignal(-1.0, self)

    def __sub__(self, other: "Signal") -> "Signal":
        return SumSignal((self, ScaledSignal(-1.0, other)))


@dataclass(frozen=True)
class ConstantSignal(Signal):
    value: float
    tag = "constant"

    def __call__(self, t):
        return np.full(np.shape(t), float(self.value))[()]

    def bound(self):
        return abs(self.value)

    def to_dict(self):
        return {"type": self.tag, "value": self.value}


@dataclass(frozen=True)
class FourierSignal(Signal):
    """a0 + sum_k a_k cos(2 pi k t / period) + b_k sin(2 pi k t / period)."""

    a0: float
    a: tuple[float, ...]
    b: tuple[float, ...]
    period: float
    tag = "fourier"

    def __post_init__(self):
        if len(self.a) != len(self.b) or not self.a:
            raise PerturbationError("Fourier signal needs K >= 1 matching cosine/sine terms")
        if self.period <= 0:
            raise PerturbationError("Fourier period must be positive")

    def __call__(self, t):
        t = np.asarray(t, dtype=float)
        k = np.arange(1, len(self.a) + 1)
        phase = np.multiply.outer(t, 2.0 * math.pi * k / self.period)
        return self.a0 + np.cos(phase) @ np.asarray(self.a) + np.sin(phase) @ np.asarray(self.b)

    def bound(self):
        return abs(self.a0) + float(np.sum(np.abs(self.a)) + np.sum(np.abs(self.b)))

    def to_dict(self):
        return {"type": self.tag, "a0": self.a0, "a": list(self.a), "b": list(self.b), "period": self.period}


@dataclass(frozen=True)
class ExpDecaySignal(Signal):
    """amplitude * (exp(-rate t) - exp(-rate t0)) / (1 - exp(-rate t0)).

    Equals ``amplitude`` at t = 0 and vanishes at t = t0.
    """

    rate: float
    horizon: float
    amplitude: float
    tag = "expdecay"

    def __post_init__(self):
        if abs(-math.expm1(-self.rate * self.horizon)) < 1e-8:
            raise PerturbationError("ill-conditioned decay: |1 - exp(-rate*t0)| < 1e-8")

    def __call__(self, t):
        t = np.asarray(t, dtype=float)
        denom = -math.expm1(-self.rate * self.horizon)
        # exp(-r t) - exp(-r t0) written to avoid cancellation near t0
        num = np.exp(-self.rate * t) * -np.expm1(-self.rate * (self.horizon - t))
        return (self.amplitude * num / denom)[()]

    def bound(self):
        return abs(self.amplitude)

    def to_dict(self):
        return {"type": self.tag, "rate": self.rate, "horizon": self.horizon, "amplitude": self.amplitude}


@dataclass(frozen=True)
class ScaledSignal(Signal):
    factor: float
    inner: Signal
    tag = "scale"

    def __call__(self, t):
        return self.factor * self.inner(t)

    def bound(self):
        return abs(self.factor) * self.inner.bound()

    def to_dict(self):
        return {"type": self.tag, "factor": self.factor, "inner": self.inner.to_dict()}


@dataclass(frozen=True)
class SumSignal(Signal):
    terms: tuple[Signal, ...]
    tag = "sum"

    def __call__(self, t):
        total = self.terms[0](t)
        for s in self.terms[1:]:
            total = total + s(t)
        return total

    def bound(self):
        return sum(s.bound() for s in self.terms)

    def to_dict(self):
        return {"type": self.tag, "terms": [s.to_dict() for s in self.terms]}


def signal_from_dict(data: dict) -> Signal:
    kind = data.get("type")
    if kind == "constant":
        return ConstantSignal(float(data["value"]))
    if kind == "fourier":
        return FourierSignal(float(data["a0"]), tuple(data["a"]), tuple(data["b"]), float(data["period"]))
    if kind == "expdecay":
        return ExpDecaySignal(float(data["rate"]), float(data["horizon"]), float(data["amplitude"]))
    if kind == "scale":
        return ScaledSignal(float(data["factor"]), signal_from_dict(data["inner"]))
    if kind == "sum":
        return SumSignal(tuple(signal_from_dict(s) for s in data["terms"]))
    raise PerturbationError(f"unknown signal type {kind!r}")


# ---------------------------------------------------------------- continuous


@dataclass(frozen=True, eq=False)
class StateFeedback:
    """Correction h(t) = gain * (x_ref(t) - anchor) subtracted from every out-edge.

    ``x_ref`` is the trajectory of a reference run (``reference_x0`` driven by
    ``reference`` with scrambling gain ``reference_c1``); the engine integrates
    that run alongside so h is available at every stage time.
    """

    gain: float
    anchor: np.ndarray
    reference_x0: np.ndarray
    reference: "ContinuousPerturbation"
    reference_c1: float

    def __call__(self, ref_state):
        return self.gain * (np.asarray(ref_state) - self.anchor)

    def to_dict(self):
        return {
            "gain": self.gain,
            "anchor": list(map(float, self.anchor)),
            "reference_x0": list(map(float, self.reference_x0)),
            "reference": self.reference.to_dict(),
            "reference_c1": self.reference_c1,
        }


@dataclass(frozen=True, eq=False)
class ContinuousPerturbation:
    graph: Digraph
    signals: dict  # (sender, receiver) -> Signal, off-diagonal edges only
    horizon: float
    feedback: StateFeedback | None = field(default=None)

    def __post_init__(self):
        if self.horizon <= 0:
            raise PerturbationError("horizon t0 must be positive")
        for e in self.signals:
            if not self.graph.has_edge(*e):
                raise PerturbationError(f"signal on {e}, which is not an edge")

    def _check_time(self, t):
        t = np.asarray(t, dtype=float)
        if np.any(t < 0) or np.any(t > self.horizon):
            raise PerturbationError(f"perturbations are only defined on [0, {self.horizon}]")
        return t

    def edge_values(self, t, ref_states=None) -> np.ndarray:
        """Off-diagonal signals at times ``t`` as an array (len(t), |E|) in graph edge order.

        With state feedback, ``ref_states`` (len(t), n) must hold the reference
        trajectory at the same times.
        """
        t = np.atleast_1d(self._check_time(t))
        out = np.zeros((t.size, len(self.graph.edges)))
        for col, e in enumerate(self.graph.edges):
            sig = self.signals.get(e)
            if sig is not None:
                out[:, col] = sig(t)
        if self.feedback is not None:
            if ref_states is None:
                raise PerturbationError("state-feedback perturbation needs the reference states")
            h = self.feedback(np.atleast_2d(ref_states))
            senders, _ = self.graph.edge_index
            out -= h[:, senders]
        return out

    def eval_matrix(self, t: float, ref_state=None) -> np.ndarray:
        vals = self.edge_values(t, None if ref_state is None else np.atleast_2d(ref_state))[0]
        m = np.zeros((self.graph.n, self.graph.n))
        s, r = self.graph.edge_index
        m[s, r] = vals
        np.fill_diagonal(m, -m.sum(axis=1))
        return m

    def column_sums(self, t) -> np.ndarray:
        """P(t)^T 1 for the open-loop part, shape (len(t), n). Feedback excluded."""
        t = np.atleast_1d(self._check_time(t))
        vals = np.zeros((t.size, len(self.graph.edges)))
        for col, e in enumerate(self.graph.edges):
            sig = self.signals.get(e)
            if sig is not None:
                vals[:, col] = sig(t)
        out = np.zeros((t.size, self.graph.n))
        s, r = self.graph.edge_index
        # receiver gains p_i^(j); sender's diagonal carries the negated sum
        np.add.at(out.T, r, vals.T)
        np.add.at(out.T, s, -vals.T)
        return out

    def to_dict(self) -> dict:
        data = {
            "horizon": self.horizon,
            "edges": [
                {"from": i, "to": j, "signal": self.signals[(i, j)].to_dict()}
                for (i, j) in self.graph.edges
                if (i, j) in self.signals
            ],
        }
        if self.feedback is not None:
            data["feedback"] = self.feedback.to_dict()
        return data

    @classmethod
    def from_dict(cls, data: dict, g: Digraph) -> "ContinuousPerturbation":
        signals = {(int(e["from"]), int(e["to"])): signal_from_dict(e["signal"]) for e in data["edges"]}
        fb = None
        if "feedback" in data:
            f = data["feedback"]
            fb = StateFeedback(
                float(f["gain"]),
                np.asarray(f["anchor"], dtype=float),
                np.asarray(f["reference_x0"], dtype=float),
                cls.from_dict(f["reference"], g),
                float(f["reference_c1"]),
            )
        return cls(g, signals, float(data["horizon"]), fb)


def zero_continuous(g: Digraph, t0: float) -> ContinuousPerturbation:
    return ContinuousPerturbation(g, {}, t0)


def random_continuous(g: Digraph, seed: int, amplitude: float = 10.0, K: int = 3, t0: float = 1.0) -> ContinuousPerturbation:
    """Truncated Fourier signal per out-edge, coefficients uniform on [-amplitude, amplitude]."""
    if K < 1:
        raise PerturbationError("K must be at least 1")
    if amplitude < 0:
        raise PerturbationError("amplitude must be non-negative")
    rng = np.random.default_rng(seed)
    signals = {}
    for e in g.edges:
        c = rng.uniform(-amplitude, amplitude, size=2 * K + 1)
        signals[e] = FourierSignal(float(c[0]), tuple(map(float, c[1 : K + 1])), tuple(map(float, c[K + 1 :])), t0)
    return ContinuousPerturbation(g, signals, t0)
