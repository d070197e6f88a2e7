"""Second implementations that leave an attacker's view unchanged.

Each construction takes a base instance and returns a different instance
(initial states, perturbations, and for eavesdroppers the scrambling gain)
that produces the same attacker-visible data. ``verify_twin`` re-runs both and
diffs the transcripts, which is what turns the constructions into checks.

For internal variants, "target" plays the shifted agent and "partner" is an
in-neighbour of the target that absorbs the opposite shift.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field, replace

import numpy as np

from . import ct_engine, dt_engine
from .adversary import diff_views, external_view, internal_view
from .dt_engine import ConfigError
from .graph import Digraph, laplacian
from .perturb import (
    ConstantSignal,
    ContinuousPerturbation,
    DiscretePerturbation,
    ExpDecaySignal,
    StateFeedback,
    from_edge_values,
)

VARIANTS = ("internal-dt", "external-dt", "internal-ct", "external-ct")
DEFAULT_TOL = {"dt": 1e-11, "ct": 1e-6}


class TwinError(ValueError):
    pass


@dataclass(frozen=True, eq=False)
class TwinSpec:
    """Base instance plus the free parameter of the twin construction.

    ``free`` is the twin's initial state of ``target`` for internal variants
    and the gain offset (delta eps / delta c) for external ones. ``skip_edge``
    leaves one perturbation entry unmodified; it exists for negative controls.
    """

    variant: str
    graph: Digraph
    x0: np.ndarray
    perturbation: object
    config: object
    free: float
    target: int | None = None
    partner: int | None = None
    skip_edge: tuple[int, int] | None = None

    def __post_init__(self):
        if self.variant not in VARIANTS:
            raise TwinError(f"unknown twin variant {self.variant!r}; expected one of {VARIANTS}")
        object.__setattr__(self, "x0", np.asarray(self.x0, dtype=float))
        if self.variant.startswith("internal"):
            if self.target is None or self.partner is None:
                raise TwinError("internal twins need a target and a partner")
            if self.target == self.partner:
                raise TwinError("target and partner must differ")
            if not self.graph.has_edge(self.partner, self.target):
                raise TwinError(f"partner {self.partner} is not an in-neighbour of target {self.target}")

    @property
    def kind(self) -> str:
        return self.variant.split("-")[1]

    def _expect(self, variant):
        if self.variant != variant:
            raise TwinError(f"spec is {self.variant!r}, expected {variant!r}")


def _shifted_states(spec: TwinSpec):
    t, p = spec.target - 1, spec.partner - 1
    x = spec.x0.copy()
    shift = spec.free - x[t]
    x[t] = spec.free
    x[p] = spec.x0[t] + spec.x0[p] - spec.free
    return x, shift


def twin_internal_dt(spec: TwinSpec):
    """Returns (x0 twin, P twin). Only the target's and partner's rows change."""
    spec._expect("internal-dt")
    g, P, eps1 = spec.graph, spec.perturbation, spec.config.eps1
    x, d = _shifted_states(spec)
    d2 = -d
    values = {e: P.matrix[e[0] - 1, e[1] - 1] for e in g.edges}
    for j in g.out_neighbors(spec.target):
        values[(spec.target, j)] -= d
    for j in g.out_neighbors(spec.partner):
        if j == spec.target:
            values[(spec.partner, j)] += (1.0 / eps1 - 1.0) * d2
        else:
            values[(spec.partner, j)] -= d2
    if spec.skip_edge is not None:
        values[spec.skip_edge] = P.matrix[spec.skip_edge[0] - 1, spec.skip_edge[1] - 1]
    return x, from_edge_values(g, values)


def eta(g: Digraph, x0, P: DiscretePerturbation) -> np.ndarray:
    """L x[0] - P^T 1: the direction along which an eavesdropper cannot locate x[0]."""
    return laplacian(g) @ np.asarray(x0, dtype=float) - P.column_sums()


def twin_external_dt(spec: TwinSpec):
    """Returns (x0 twin, P twin, eps1 twin)."""
    spec._expect("external-dt")
    g, P, cfg = spec.graph, spec.perturbation, spec.config
    new_eps1 = cfg.eps1 + spec.free
    if new_eps1 == 0:
        raise ConfigError("eps1 + delta must be nonzero")
    x = spec.x0 + spec.free * eta(g, spec.x0, P)
    shift = x - spec.x0
    values = {e: P.matrix[e[0] - 1, e[1] - 1] - shift[e[0] - 1] for e in g.edges}
    if spec.skip_edge is not None:
        values[spec.skip_edge] = P.matrix[spec.skip_edge[0] - 1, spec.skip_edge[1] - 1]
    return x, from_edge_values(g, values), new_eps1


def decay_profile(c1: float, t0: float, shift: float) -> ExpDecaySignal:
    """Path of the target's state offset: equals ``shift`` at 0 and 0 at t0."""
    if abs(math.expm1(-c1 * t0)) < 1e-8:
        raise TwinError("ill-conditioned: |1 - exp(-c1 t0)| < 1e-8")
    return ExpDecaySignal(c1, t0, shift)


def _decay_constant(c1: float, t0: float, shift: float) -> float:
    return shift * math.exp(-c1 * t0) / -math.expm1(-c1 * t0)


def twin_internal_ct(spec: TwinSpec):
    """Returns (x0 twin, perturbation twin)."""
    spec._expect("internal-ct")
    g, p, cfg = spec.graph, spec.perturbation, spec.config
    if p.feedback is not None:
        raise TwinError("base perturbation must be open-loop")
    x, d = _shifted_states(spec)
    s = decay_profile(cfg.c1, cfg.t0, d)
    if d == 0:
        return x, p
    const = ConstantSignal(_decay_constant(cfg.c1, cfg.t0, d))
    signals = dict(p.signals)

    def add(edge, extra):
        if spec.skip_edge == edge:
            return
        base = signals.get(edge)
        signals[edge] = extra if base is None else base + extra

    for j in g.out_neighbors(spec.target):
        add((spec.target, j), -s)
    for j in g.out_neighbors(spec.partner):
        add((spec.partner, j), -const if j == spec.target else s)
    return x, ContinuousPerturbation(g, signals, p.horizon)


def twin_external_ct(spec: TwinSpec):
    """Returns (x0 twin, perturbation twin, c1 twin).

    The twin subtracts h(t) = (delta c / c1) (x(t) - x(t0)) from every out-edge,
    where x is the base trajectory; the engine integrates the base run
    alongside so h is exact at every stage time.
    """
    spec._expect("external-ct")
    g, p, cfg = spec.graph, spec.perturbation, spec.config
    if p.feedback is not None:
        raise TwinError("base perturbation must be open-loop")
    new_c1 = cfg.c1 + spec.free
    if new_c1 == 0:
        raise ConfigError("c1 + delta must be nonzero")
    if spec.free == 0:
        return spec.x0.copy(), p, cfg.c1
    x_t0 = ct_engine.scramble_endpoint(g, spec.x0, p, cfg)
    xi = -(x_t0 - spec.x0) / cfg.c1
    x = spec.x0 + spec.free * xi
    fb = StateFeedback(spec.free / cfg.c1, x_t0, spec.x0.copy(), p, cfg.c1)
    if spec.skip_edge is not None:
        raise TwinError("skip_edge is not supported for external-ct twins")
    return x, ContinuousPerturbation(g, dict(p.signals), p.horizon, fb), new_c1


def build_twin(spec: TwinSpec):
    """Twin instance as (x0, perturbation, config)."""
    if spec.variant == "internal-dt":
        x, P = twin_internal_dt(spec)
        return x, P, spec.config
    if spec.variant == "external-dt":
        x, P, e1 = twin_external_dt(spec)
        return x, P, replace(spec.config, eps1=e1)
    if spec.variant == "internal-ct":
        x, p = twin_internal_ct(spec)
        return x, p, spec.config
    x, p, c1 = twin_external_ct(spec)
    return x, p, replace(spec.config, c1=c1)


def run_instance(g, x0, perturbation, config):
    """(trajectory, transcript) for either protocol."""
    if isinstance(config, dt_engine.DtConfig):
        traj, transcript, _ = dt_engine.run(g, x0, perturbation, config)
        return traj, transcript
    return ct_engine.integrate(g, x0, perturbation, config)


# ---------------------------------------------------------------- verification


@dataclass
class DiffReport:
    variant: str
    tolerance: float
    times: list[float]
    max_state_diff: list[float]
    differences: list[tuple[float, tuple[int, int], float]]
    unexpected: list[tuple[float, tuple[int, int], float]]
    checks: dict[str, bool]
    notes: list[str] = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return all(self.checks.values()) and not self.unexpected

    @property
    def verdict(self) -> str:
        if not self.passed:
            return "fail"
        return "indistinguishable" if not self.differences else "pass"

    def to_dict(self) -> dict:
        return {
            "variant": self.variant,
            "tolerance": self.tolerance,
            "verdict": self.verdict,
            "checks": self.checks,
            "differences": [{"t": t, "edge": list(e), "delta": d} for t, e, d in self.differences],
            "unexpected": [{"t": t, "edge": list(e), "delta": d} for t, e, d in self.unexpected],
            "times": self.times,
            "max_state_diff": self.max_state_diff,
            "notes": self.notes,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2)

    def render(self, limit: int = 12) -> str:
        lines = [f"twin check [{self.variant}]  tol={self.tolerance:g}  verdict: {self.verdict.upper()}"]
        for name, ok in self.checks.items():
            lines.append(f"  {'ok  ' if ok else 'FAIL'} {name}")
        if self.differences:
            lines.append(f"  {'t':>10}  {'edge':>8}  {'delta':>14}")
            for t, (i, j), d in self.differences[:limit]:
                flag = "  unexpected" if (t, (i, j), d) in self.unexpected else ""
                lines.append(f"  {t:>10.4g}  {f'{i}->{j}':>8}  {d:>14.6g}{flag}")
            if len(self.differences) > limit:
                lines.append(f"  ... {len(self.differences) - limit} more differing entries")
        else:
            lines.append("  no transcript entry differs")
        lines.extend(f"  note: {n}" for n in self.notes)
        return "\n".join(lines)


def _transcript_grid(transcript):
    if isinstance(transcript, dt_engine.DtTranscript):
        steps = transcript.steps.astype(float)
        return steps, steps == 0
    return transcript.times, transcript.obfuscated


def _state_grid(traj):
    if isinstance(traj, dt_engine.DtTrajectory):
        return traj.steps.astype(float)
    return traj.times


def verify_twin(spec: TwinSpec, tolerance: float | None = None, twin=None) -> DiffReport:
    """Run base and twin and check the indistinguishability claims.

    ``twin`` may supply a prebuilt (x0, perturbation, config) in place of the
    construction, e.g. to test a hand-made instance.
    """
    tol = DEFAULT_TOL[spec.kind] if tolerance is None else tolerance
    g = spec.graph
    base_traj, base_tr = run_instance(g, spec.x0, spec.perturbation, spec.config)
    tx0, tp, tcfg = build_twin(spec) if twin is None else twin
    twin_traj, twin_tr = run_instance(g, tx0, tp, tcfg)

    times, obf = _transcript_grid(base_tr)
    delta = twin_tr.values - base_tr.values
    expected = np.zeros_like(delta)
    if spec.variant.startswith("internal"):
        col = g.edges.index((spec.partner, spec.target))
        d = spec.free - spec.x0[spec.target - 1]
        if spec.kind == "dt":
            expected[0, col] = -d / spec.config.eps1
        else:
            c1, t0 = spec.config.c1, spec.config.t0
            expected[obf, col] = -np.exp(-c1 * times[obf]) * d / -math.expm1(-c1 * t0)

    differences = [
        (float(times[r]), g.edges[c], float(delta[r, c])) for r, c in zip(*np.nonzero(np.abs(delta) > tol))
    ]
    unexpected = [
        (float(times[r]), g.edges[c], float(delta[r, c]))
        for r, c in zip(*np.nonzero(np.abs(delta - expected) > tol))
    ]

    state_times = _state_grid(base_traj)
    sdiff = np.abs(twin_traj.states - base_traj.states)
    checks = {}
    if spec.kind == "dt":
        after = state_times >= 1
        checks["states identical for k >= 1"] = bool(sdiff[after].max(initial=0.0) <= tol)
    else:
        t0 = spec.config.t0
        after = state_times >= t0
        checks["states identical for t >= t0"] = bool(sdiff[after].max(initial=0.0) <= tol)
        if spec.variant == "internal-ct":
            before = state_times <= t0
            s = decay_profile(spec.config.c1, t0, spec.free - spec.x0[spec.target - 1])(state_times[before])
            dx = (twin_traj.states - base_traj.states)[before]
            err = np.abs(dx[:, spec.target - 1] - s).max()
            err = max(err, np.abs(dx[:, spec.partner - 1] + s).max())
            others = [i for i in range(g.n) if i not in (spec.target - 1, spec.partner - 1)]
            if others:
                err = max(err, np.abs(dx[:, others]).max())
            checks["scrambling offsets follow the decay profile"] = bool(err <= tol)
    limit_gap = abs(twin_traj.states[-1].mean() - base_traj.states[-1].mean())
    checks["same consensus value"] = bool(limit_gap <= max(tol, 1e-9))
    sum_gap = abs(np.sum(tx0) - np.sum(spec.x0))
    checks["same initial sum"] = bool(sum_gap <= 1e-10 * (1 + np.abs(spec.x0).sum()))

    return DiffReport(
        variant=spec.variant,
        tolerance=tol,
        times=[float(t) for t in state_times],
        max_state_diff=[float(v) for v in sdiff.max(axis=1)],
        differences=differences,
        unexpected=unexpected,
        checks=checks,
    )


# ---------------------------------------------------------------- privacy witnesses


@dataclass
class Witness:
    """Two instances the attacker cannot tell apart although the target's initial state differs."""

    attacker: int | None
    target: int
    roles: tuple[int, int] | None
    state_shift: float
    view_differences: list

    @property
    def holds(self) -> bool:
        return not self.view_differences and self.state_shift != 0


def choose_roles(g: Digraph, attacker: int, target: int) -> tuple[int, int]:
    """(lemma target, lemma partner) so that ``target`` is shifted and ``attacker`` is a bystander."""
    for w in g.in_neighbors(target):
        if w != attacker:
            return target, w
    for w in g.out_neighbors(target):
        if w != attacker:
            return w, target
    raise TwinError(f"agent {target} only talks to {attacker}; no hiding partner exists")


def internal_witness(g, x0, perturbation, config, attacker: int, target: int, shift: float = 1.0, tol=None) -> Witness:
    """Build the internal twin hiding ``target`` from ``attacker`` and diff the attacker's views."""
    x0 = np.asarray(x0, dtype=float)
    kind = "dt" if isinstance(config, dt_engine.DtConfig) else "ct"
    tol = DEFAULT_TOL[kind] if tol is None else tol
    one, two = choose_roles(g, attacker, target)
    free = x0[one - 1] + shift if one == target else x0[one - 1] - shift
    spec = TwinSpec(f"internal-{kind}", g, x0, perturbation, config, free, one, two)
    tx0, tp, tcfg = build_twin(spec)
    params = _params(config)
    views = []
    for inst in ((x0, perturbation, config), (tx0, tp, tcfg)):
        traj, tr = run_instance(g, *inst)
        views.append(internal_view(tr, traj, g, params, attacker))
    return Witness(attacker, target, (one, two), float(tx0[target - 1] - x0[target - 1]), diff_views(*views, tol))


def external_witness(g, x0, perturbation, config, target: int, delta: float = 0.3, tol=None) -> Witness:
    """External twin with gain offset ``delta``; reports how far the target's initial state moved."""
    x0 = np.asarray(x0, dtype=float)
    kind = "dt" if isinstance(config, dt_engine.DtConfig) else "ct"
    tol = DEFAULT_TOL[kind] if tol is None else tol
    spec = TwinSpec(f"external-{kind}", g, x0, perturbation, config, delta)
    tx0, tp, tcfg = build_twin(spec)
    views = []
    for inst in ((x0, perturbation, config), (tx0, tp, tcfg)):
        traj, tr = run_instance(g, *inst)
        views.append(external_view(tr, g, _params(inst[2])))
    return Witness(None, target, None, float(tx0[target - 1] - x0[target - 1]), diff_views(*views, tol))


def _params(config) -> dict:
    if isinstance(config, dt_engine.DtConfig):
        return {"eps1": config.eps1, "eps2": config.eps2}
    return {"c1": config.c1, "c2": config.c2, "t0": config.t0}
