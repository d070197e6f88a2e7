"""Experiment configuration: JSON in, fully validated objects out.

Validation is total: every problem found is collected and reported together,
before anything runs.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import graph as graphs
from .ct_engine import CtConfig
from .dt_engine import ConfigError, DtConfig, default_eps2
from .perturb import random_continuous, random_discrete

TOP_KEYS = {"name", "seed", "graph", "x0", "protocol", "params", "perturbation", "attacker", "twin", "twins", "out", "tolerances"}
DT_KEYS = {"eps1", "eps2", "iterations", "early_stop"}
CT_KEYS = {"c1", "c2", "t0", "h", "t_end", "sample_stride"}


@dataclass
class TwinRequest:
    variant: str  # "internal" or "external"
    target: int | None = None
    partner: int | None = None
    value: float | None = None
    delta: float | None = None
    skip_edge: tuple[int, int] | None = None


@dataclass
class ExperimentConfig:
    seed: int
    graph: graphs.Digraph
    x0: np.ndarray
    protocol: str
    params: dict
    amplitude: float = 10.0
    basis_terms: int = 3
    attacker: dict = field(default_factory=lambda: {"type": "none"})
    twins: list[TwinRequest] = field(default_factory=list)
    out: str | None = None
    tolerances: dict = field(default_factory=dict)
    name: str = "experiment"
    raw: dict = field(default_factory=dict, repr=False)

    def protocol_config(self):
        if self.protocol == "dt":
            conv = self.tolerances.get("convergence", 1e-9)
            return DtConfig(convergence_tol=conv, **self.params)
        return CtConfig(**self.params)

    def perturbation(self):
        if self.protocol == "dt":
            return random_discrete(self.graph, self.seed, self.amplitude)
        cfg = self.protocol_config()
        return random_continuous(self.graph, self.seed, self.amplitude, self.basis_terms, cfg.t0)

    def with_seed(self, seed: int) -> "ExperimentConfig":
        raw = dict(self.raw, seed=seed)
        return parse_config(raw)


def _num(v) -> bool:
    return isinstance(v, (int, float)) and not isinstance(v, bool) and math.isfinite(v)


def _int(v) -> bool:
    return isinstance(v, int) and not isinstance(v, bool)


def load_config(path) -> ExperimentConfig:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc.strerror}") from None
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: invalid JSON at line {exc.lineno} column {exc.colno}: {exc.msg}") from None
    if not isinstance(data, dict):
        raise ConfigError(f"{path}: top level must be a JSON object")
    return parse_config(data, base_dir=path.parent)


def _load_graph(spec, base_dir, errors):
    try:
        if spec == "demo":
            return graphs.demo_graph()
        if isinstance(spec, str):
            p = Path(spec)
            if not p.is_absolute() and base_dir is not None:
                p = base_dir / p
            return graphs.load(p)
        if isinstance(spec, dict):
            if spec.get("type") == "pendant_pair":
                return graphs.pendant_pair_graph(int(spec["n"]), int(spec.get("attacker", 1)))
            if spec.get("type") == "ring":
                return graphs.ring(int(spec["n"]))
            return graphs.from_dict(spec)
        errors.append("graph: expected \"demo\", a file path, or an object with n and edges")
    except OSError as exc:
        errors.append(f"graph: cannot read {exc.filename}: {exc.strerror}")
    except (graphs.GraphError, KeyError, TypeError, ValueError) as exc:
        errors.append(f"graph: {exc}")
    return None


def parse_config(data: dict, base_dir=None) -> ExperimentConfig:
    """Validate a decoded config dict; raises ConfigError naming every violation."""
    errors = []
    for k in sorted(set(data) - TOP_KEYS):
        errors.append(f"unknown key {k!r}")

    seed = data.get("seed")
    if seed is None:
        errors.append("seed is required (no entropy default)")
    elif not _int(seed) or seed < 0:
        errors.append("seed must be a non-negative integer")

    g = _load_graph(data.get("graph"), base_dir, errors) if "graph" in data else None
    if "graph" not in data:
        errors.append("graph is required")
    g_ok = False
    if g is not None:
        report = graphs.validate(g)
        errors.extend(f"graph: {v}" for v in report.violations)
        g_ok = report.ok
    n = g.n if g is not None else None

    x0 = data.get("x0")
    if not isinstance(x0, list) or not all(_num(v) for v in x0):
        errors.append("x0 must be a list of finite numbers")
        x0 = None
    elif n is not None and len(x0) != n:
        errors.append(f"x0 has {len(x0)} entries but the graph has {n} agents")

    protocol = data.get("protocol")
    params = data.get("params", {})
    if protocol not in ("dt", "ct"):
        errors.append("protocol must be \"dt\" or \"ct\"")
    if not isinstance(params, dict):
        errors.append("params must be an object")
        params = {}
    allowed = DT_KEYS if protocol == "dt" else CT_KEYS if protocol == "ct" else set(params)
    for k in sorted(set(params) - allowed):
        errors.append(f"params: unknown key {k!r} for protocol {protocol}")
    params = {k: v for k, v in params.items() if k in allowed}
    n_before = len(errors)
    for k, v in params.items():
        if k == "early_stop":
            if not isinstance(v, bool):
                errors.append("params.early_stop must be a boolean")
        elif k in ("iterations", "sample_stride"):
            if not _int(v):
                errors.append(f"params.{k} must be an integer")
        elif not _num(v):
            errors.append(f"params.{k} must be a finite number")
    types_ok = len(errors) == n_before

    tolerances = data.get("tolerances", {})
    if not isinstance(tolerances, dict) or not all(_num(v) and v > 0 for v in tolerances.values()):
        errors.append("tolerances must map names to positive numbers")
        tolerances = {}

    pconf = None
    if protocol == "dt":
        if "eps1" not in params:
            errors.append("params.eps1 is required for dt")
        if "eps2" not in params and g_ok:
            params["eps2"] = default_eps2(g)
    if protocol == "ct" and "c1" not in params:
        errors.append("params.c1 is required for ct")
    if types_ok:
        try:
            if protocol == "dt" and {"eps1", "eps2"} <= set(params) and g_ok:
                pconf = DtConfig(convergence_tol=tolerances.get("convergence", 1e-9), **params)
                pconf.check(g)
            elif protocol == "ct" and "c1" in params:
                pconf = CtConfig(**params)
                pconf.check()
        except ConfigError as exc:
            errors.extend(f"params: {m}" for m in str(exc).split("; "))
            pconf = None

    pert = data.get("perturbation", {})
    amplitude, terms = 10.0, 3
    if not isinstance(pert, dict):
        errors.append("perturbation must be an object")
    else:
        for k in sorted(set(pert) - {"amplitude", "K"}):
            errors.append(f"perturbation: unknown key {k!r}")
        amplitude = pert.get("amplitude", 10.0)
        terms = pert.get("K", 3)
        if not _num(amplitude) or amplitude < 0:
            errors.append("perturbation.amplitude must be a non-negative number")
        if not _int(terms) or terms < 1:
            errors.append("perturbation.K must be an integer >= 1")

    attacker = data.get("attacker", {"type": "none"})
    if not isinstance(attacker, dict) or attacker.get("type") not in ("internal", "external", "none"):
        errors.append("attacker.type must be internal, external or none")
        attacker = {"type": "none"}
    elif attacker["type"] == "internal":
        m = attacker.get("m")
        if not _int(m) or (n is not None and not 1 <= m <= n):
            errors.append(f"attacker.m must be an agent id in 1..{n}")
        for t in attacker.get("targets", []):
            if not _int(t) or (n is not None and not 1 <= t <= n):
                errors.append(f"attacker.targets: {t!r} is not an agent id in 1..{n}")
            elif t == m:
                errors.append("attacker.targets must not contain the attacker itself")

    raw_twins = data.get("twins", [])
    if "twin" in data:
        raw_twins = [data["twin"]] + list(raw_twins)
    twins = []
    for idx, tw in enumerate(raw_twins):
        twins.append(_parse_twin(tw, idx, g if g_ok else None, protocol, pconf, errors))

    out = data.get("out")
    if out is not None and not isinstance(out, str):
        errors.append("out must be a path string")
    name = data.get("name", "experiment")

    if errors:
        raise ConfigError("invalid config:\n  - " + "\n  - ".join(errors))
    return ExperimentConfig(
        seed=seed,
        graph=g,
        x0=np.asarray(x0, dtype=float),
        protocol=protocol,
        params=params,
        amplitude=float(amplitude),
        basis_terms=terms,
        attacker=attacker,
        twins=twins,
        out=out,
        tolerances=tolerances,
        name=str(name),
        raw=data,
    )


def _parse_twin(tw, idx, g, protocol, pconf, errors):
    where = f"twins[{idx}]"
    if not isinstance(tw, dict) or tw.get("variant") not in ("internal", "external"):
        errors.append(f"{where}: variant must be internal or external")
        return None
    req = TwinRequest(tw["variant"])
    skip = tw.get("skip_edge")
    if skip is not None:
        if not (isinstance(skip, list) and len(skip) == 2 and all(_int(v) for v in skip)):
            errors.append(f"{where}: skip_edge must be [sender, receiver]")
        elif g is not None and not g.has_edge(*skip):
            errors.append(f"{where}: skip_edge {skip} is not an edge")
        else:
            req.skip_edge = tuple(skip)
    if req.variant == "internal":
        for k in ("target", "partner"):
            v = tw.get(k)
            if not _int(v) or (g is not None and not 1 <= v <= g.n):
                errors.append(f"{where}: {k} must be an agent id")
                return req
        req.target, req.partner = tw["target"], tw["partner"]
        if req.target == req.partner:
            errors.append(f"{where}: target and partner must differ")
        elif g is not None and not g.has_edge(req.partner, req.target):
            errors.append(f"{where}: partner {req.partner} must send to target {req.target}")
        if not _num(tw.get("value")):
            errors.append(f"{where}: value (new initial state of target) must be a number")
        else:
            req.value = float(tw["value"])
        if protocol == "ct" and pconf is not None and abs(math.expm1(-pconf.c1 * pconf.t0)) < 1e-8:
            errors.append(f"{where}: ill-conditioned, |1 - exp(-c1 t0)| < 1e-8")
    else:
        d = tw.get("delta")
        if not _num(d):
            errors.append(f"{where}: delta must be a number")
            return req
        req.delta = float(d)
        gain = None if pconf is None else (pconf.eps1 if protocol == "dt" else pconf.c1)
        if gain is not None and gain + d == 0:
            errors.append(f"{where}: delta makes the twin's scrambling gain zero")
        if protocol == "ct" and skip is not None:
            errors.append(f"{where}: skip_edge is only supported for discrete or internal twins")
    for k in sorted(set(tw) - {"variant", "target", "partner", "value", "delta", "skip_edge"}):
        errors.append(f"{where}: unknown key {k!r}")
    return req
