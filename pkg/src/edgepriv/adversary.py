"""Attacker information sets and the two reconstruction attacks that provably work.

An internal attacker ``m`` follows the protocol but keeps everything it
receives; an external eavesdropper reads every link but never learns the
scrambling gain. Views are immutable snapshots so that two runs can be
compared entry by entry.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .ct_engine import CtTranscript
from .dt_engine import DtTranscript
from .graph import Digraph

INTERNAL_PARAMS = {"dt": ("eps1", "eps2"), "ct": ("c1", "c2", "t0")}
PUBLIC_PARAMS = {"dt": ("eps2",), "ct": ("c2", "t0")}


class AttackRefused(Exception):
    """The target is not reconstructible from this attacker's view."""


def _kind(transcript) -> str:
    if isinstance(transcript, DtTranscript):
        return "dt"
    if isinstance(transcript, CtTranscript):
        return "ct"
    raise TypeError(f"unsupported transcript type {type(transcript).__name__}")


def _times(transcript) -> tuple[np.ndarray, np.ndarray]:
    if isinstance(transcript, DtTranscript):
        steps = transcript.steps.astype(float)
        return steps, steps == 0
    return transcript.times, transcript.obfuscated


@dataclass(frozen=True, eq=False)
class InternalView:
    attacker: int
    graph: Digraph
    kind: str
    params: dict
    times: np.ndarray
    obfuscated: np.ndarray
    incoming: tuple[tuple[int, int], ...]
    incoming_values: np.ndarray  # (rows, |in|)
    state_times: np.ndarray
    own_states: np.ndarray
    outgoing: tuple[tuple[int, int], ...]
    own_perturbations: np.ndarray  # (obfuscated rows, |out|) incl. nothing for the diagonal
    own_diagonal: np.ndarray

    def arrays(self) -> dict:
        return {
            "times": self.times,
            "obfuscated": self.obfuscated.astype(float),
            "incoming_values": self.incoming_values,
            "state_times": self.state_times,
            "own_states": self.own_states,
            "own_perturbations": self.own_perturbations,
            "own_diagonal": self.own_diagonal,
        }

    def incoming_column(self, sender: int) -> np.ndarray:
        return self.incoming_values[:, self.incoming.index((sender, self.attacker))]

    def to_dict(self) -> dict:
        return {
            "type": "internal",
            "attacker": self.attacker,
            "graph": self.graph.to_dict(),
            "kind": self.kind,
            "params": self.params,
            "incoming": [list(e) for e in self.incoming],
            "outgoing": [list(e) for e in self.outgoing],
            **{k: v.tolist() for k, v in self.arrays().items()},
        }


@dataclass(frozen=True, eq=False)
class ExternalView:
    graph: Digraph
    kind: str
    params: dict
    times: np.ndarray
    obfuscated: np.ndarray
    edges: tuple[tuple[int, int], ...]
    values: np.ndarray

    def arrays(self) -> dict:
        return {"times": self.times, "obfuscated": self.obfuscated.astype(float), "values": self.values}

    @property
    def message_count(self) -> int:
        return self.values.size

    def to_dict(self) -> dict:
        return {
            "type": "external",
            "graph": self.graph.to_dict(),
            "kind": self.kind,
            "params": self.params,
            "edges": [list(e) for e in self.edges],
            **{k: v.tolist() for k, v in self.arrays().items()},
        }


def internal_view(transcript, trajectory, g: Digraph, params: dict, m: int) -> InternalView:
    """Everything agent ``m`` legitimately holds after a run.

    Own outgoing perturbations are recovered as (sent message - own state),
    which is exactly what ``m`` added.
    """
    if not 1 <= m <= g.n:
        raise ValueError(f"attacker id {m} outside 1..{g.n}")
    kind = _kind(transcript)
    params = {k: float(params[k]) for k in INTERNAL_PARAMS[kind]}
    times, obf = _times(transcript)
    incoming = tuple((j, m) for j in g.in_neighbors(m))
    cols = [transcript.edges.index(e) for e in incoming]
    outgoing = tuple((m, j) for j in g.out_neighbors(m))
    out_cols = [transcript.edges.index(e) for e in outgoing]

    if kind == "dt":
        state_times = trajectory.steps.astype(float)
        own = trajectory.states[:, m - 1].copy()
        obf_state = own[: int(obf.sum())]
    else:
        state_times = trajectory.times.copy()
        own = trajectory.states[:, m - 1].copy()
        obf_state = own[: trajectory.t0_index + 1]
    sent = transcript.values[obf][:, out_cols]
    pert = sent - obf_state[:, None]
    return InternalView(
        attacker=m,
        graph=g,
        kind=kind,
        params=params,
        times=times.copy(),
        obfuscated=obf.copy(),
        incoming=incoming,
        incoming_values=transcript.values[:, cols].copy(),
        state_times=state_times,
        own_states=own,
        outgoing=outgoing,
        own_perturbations=pert,
        own_diagonal=-pert.sum(axis=1),
    )


def external_view(transcript, g: Digraph, public_params: dict) -> ExternalView:
    kind = _kind(transcript)
    params = {k: float(public_params[k]) for k in PUBLIC_PARAMS[kind]}
    times, obf = _times(transcript)
    return ExternalView(g, kind, params, times.copy(), obf.copy(), transcript.edges, transcript.values.copy())


@dataclass
class ViewDiff:
    field: str
    row: int
    column: int
    delta: float


def diff_views(a, b, tol: float) -> list[ViewDiff]:
    """Entries where two views of the same kind disagree by more than ``tol``."""
    if type(a) is not type(b):
        raise TypeError("cannot compare views of different types")
    out = []
    if a.graph != b.graph or a.params != b.params:
        out.append(ViewDiff("header", -1, -1, float("inf")))
    if isinstance(a, InternalView) and (a.attacker != b.attacker or a.incoming != b.incoming):
        out.append(ViewDiff("header", -1, -1, float("inf")))
    fa, fb = a.arrays(), b.arrays()
    for name, va in fa.items():
        vb = fb[name]
        if va.shape != vb.shape:
            out.append(ViewDiff(name, -1, -1, float("inf")))
            continue
        d = vb - va
        if d.size == 0:
            continue
        d = d.reshape(len(d), -1)
        for r, c in zip(*np.nonzero(np.abs(d) > tol)):
            out.append(ViewDiff(name, int(r), int(c), float(d[r, c])))
    return out


def vulnerable_set(g: Digraph, m: int) -> set[int]:
    """Agents whose only neighbour, in both directions, is ``m``."""
    return {
        v
        for v in range(1, g.n + 1)
        if v != m and g.degree(v) == 1 and g.has_edge(m, v) and g.has_edge(v, m)
    }


def scan(g: Digraph) -> dict[int, list[int]]:
    return {m: sorted(vulnerable_set(g, m)) for m in range(1, g.n + 1)}


def _require_vulnerable(view: InternalView, target: int, kind: str):
    if view.kind != kind:
        raise ValueError(f"view is {view.kind!r}, attack needs {kind!r}")
    if target not in vulnerable_set(view.graph, view.attacker):
        raise AttackRefused(
            f"agent {target} is not vulnerable to agent {view.attacker}: "
            "it has another neighbour, so its initial state is not identifiable"
        )


def attack_internal_dt(view: InternalView, target: int) -> float:
    """x_v[0] = x_v[1] + eps1 * (y_v^(m)[0] - y_m^(v)[0])."""
    _require_vulnerable(view, target, "dt")
    col = view.incoming_column(target)
    if col.size < 2:
        raise ValueError("view must cover step k=1 (run at least two iterations)")
    y_vm = col[0]
    y_mv = view.own_states[0] + view.own_perturbations[0, view.outgoing.index((view.attacker, target))]
    return float(col[1] + view.params["eps1"] * (y_vm - y_mv))


def attack_internal_ct(view: InternalView, target: int) -> float:
    """x_v(0) = x_v(t0) - c1 * integral_0^t0 (y_m^(v) - y_v^(m)) by the trapezoid rule on the sample grid."""
    _require_vulnerable(view, target, "ct")
    col = view.incoming_column(target)
    obf = view.obfuscated
    tt = view.times[obf]
    y_vm = col[obf]
    y_mv = view.own_states[: tt.size] + view.own_perturbations[:, view.outgoing.index((view.attacker, target))]
    if not np.allclose(view.state_times[: tt.size], tt, rtol=0, atol=1e-12):
        raise ValueError("state samples and message samples are not on the same grid")
    x_t0 = col[np.flatnonzero(~obf)[0]]
    return float(x_t0 - view.params["c1"] * np.trapezoid(y_mv - y_vm, tt))


def attack(view: InternalView, target: int) -> float:
    return attack_internal_dt(view, target) if view.kind == "dt" else attack_internal_ct(view, target)
