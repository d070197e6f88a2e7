"""Command line entry point: ``edgepriv {run,attack,twin-check,scan,demo}``.

Exit codes: 0 pass, 1 verdict failure, 2 config error, 3 runtime error.
"""
from __future__ import annotations

import argparse
import json
import sys
from dataclasses import replace
from importlib import resources
from pathlib import Path

import numpy as np

from . import adversary, twin_lab
from .config import ExperimentConfig, load_config
from .dt_engine import ConfigError, DtConfig

EXIT_OK, EXIT_VERDICT, EXIT_CONFIG, EXIT_RUNTIME = 0, 1, 2, 3
DEMO_CONFIGS = {"dt": "demo_dt.json", "ct": "demo_ct.json"}


def _write(out: Path, name: str, text: str) -> Path:
    path = out / name
    try:
        out.mkdir(parents=True, exist_ok=True)
        path.write_text(text)
    except OSError as exc:
        raise RuntimeError(f"cannot write {path}: {exc.strerror}") from None
    return path


def _dump(obj) -> str:
    return json.dumps(obj, indent=2, sort_keys=True) + "\n"


def _out_dir(cfg: ExperimentConfig, override) -> Path:
    if override is not None:
        return Path(override)
    return Path(cfg.out or f"runs/{cfg.name}")


def execute(cfg: ExperimentConfig):
    """Run the configured protocol; returns (trajectory, transcript, perturbation, converged_at)."""
    pconf = cfg.protocol_config()
    pert = cfg.perturbation()
    traj, transcript = twin_lab.run_instance(cfg.graph, cfg.x0, pert, pconf)
    spread = traj.spread()
    hits = np.flatnonzero(spread < cfg.tolerances.get("convergence", 1e-9))
    if cfg.protocol == "dt":
        converged_at = int(hits[0]) if hits.size else None
    else:
        converged_at = float(traj.times[hits[0]]) if hits.size else None
    return traj, transcript, pert, converged_at


def summarize(cfg: ExperimentConfig, traj, converged_at) -> dict:
    sums = traj.states.sum(axis=1)
    return {
        "protocol": cfg.protocol,
        "seed": cfg.seed,
        "n": cfg.graph.n,
        "mean_x0": float(cfg.x0.mean()),
        "limit": float(traj.states[-1].mean()),
        "final_state": [float(v) for v in traj.states[-1]],
        "final_spread": float(traj.spread()[-1]),
        "converged_at": converged_at,
        "sum_drift": float(np.abs(sums - sums[0]).max()),
    }


def cmd_run(cfg: ExperimentConfig, out: Path) -> int:
    traj, transcript, _, converged_at = execute(cfg)
    summary = summarize(cfg, traj, converged_at)
    _write(out, "config-echo.json", _dump(cfg.raw))
    _write(out, "trajectory.csv", traj.to_csv())
    _write(out, "transcript.jsonl", transcript.to_jsonl())
    _write(out, "summary.json", _dump(summary))
    print(f"{cfg.protocol} run: limit {summary['limit']:.12g} (mean x0 {summary['mean_x0']:.12g}), "
          f"final spread {summary['final_spread']:.3g}, converged_at {converged_at}, "
          f"sum drift {summary['sum_drift']:.3g}")
    print(f"wrote {out}/")
    return EXIT_OK


def _params(pconf) -> dict:
    if isinstance(pconf, DtConfig):
        return {"eps1": pconf.eps1, "eps2": pconf.eps2}
    return {"c1": pconf.c1, "c2": pconf.c2, "t0": pconf.t0}


def cmd_attack(cfg: ExperimentConfig, out: Path) -> int:
    spec = cfg.attacker
    if spec["type"] != "internal":
        raise ConfigError(
            f"attack needs an internal attacker (got {spec['type']!r}); "
            "no reconstruction exists for an eavesdropper who lacks the scrambling gain"
        )
    m = spec["m"]
    traj, transcript, _, _ = execute(cfg)
    view = adversary.internal_view(transcript, traj, cfg.graph, _params(cfg.protocol_config()), m)
    vulnerable = adversary.vulnerable_set(cfg.graph, m)
    requested = spec.get("targets") or [v for v in range(1, cfg.graph.n + 1) if v != m]
    rows = []
    for v in sorted(set(requested) | vulnerable):
        try:
            est = adversary.attack(view, v)
        except adversary.AttackRefused as exc:
            rows.append({"target": v, "status": "refused", "reason": str(exc)})
            continue
        truth = float(cfg.x0[v - 1])
        rows.append({"target": v, "status": "recovered", "estimate": est, "true": truth, "error": abs(est - truth)})
    _write(out, "attack.json", _dump({"attacker": m, "vulnerable": sorted(vulnerable), "results": rows}))
    print(f"attacker {m}: vulnerable set {sorted(vulnerable) or '{}'}")
    print(f"  {'target':>6}  {'status':>9}  {'estimate':>16}  {'true':>10}  {'error':>9}")
    for r in rows:
        if r["status"] == "recovered":
            print(f"  {r['target']:>6}  {'recovered':>9}  {r['estimate']:>16.10g}  {r['true']:>10.6g}  {r['error']:>9.2e}")
        else:
            print(f"  {r['target']:>6}  {'refused':>9}")
    return EXIT_OK


def twin_specs(cfg: ExperimentConfig) -> list[twin_lab.TwinSpec]:
    pconf, pert = cfg.protocol_config(), cfg.perturbation()
    specs = []
    for req in cfg.twins:
        variant = f"{req.variant}-{cfg.protocol}"
        free = req.value if req.variant == "internal" else req.delta
        specs.append(twin_lab.TwinSpec(variant, cfg.graph, cfg.x0, pert, pconf, free,
                                       req.target, req.partner, req.skip_edge))
    return specs


def cmd_twin_check(cfg: ExperimentConfig, out: Path, tol=None) -> int:
    if not cfg.twins:
        raise ConfigError("twin-check needs a twin (or twins) entry in the config")
    tol = tol if tol is not None else cfg.tolerances.get("twin")
    reports = []
    for spec in twin_specs(cfg):
        rep = twin_lab.verify_twin(spec, tol)
        reports.append(rep)
        print(rep.render())
    _write(out, "twin-report.json", _dump([r.to_dict() for r in reports]))
    return EXIT_OK if all(r.passed for r in reports) else EXIT_VERDICT


def cmd_scan(cfg: ExperimentConfig, out: Path | None = None) -> int:
    table = adversary.scan(cfg.graph)
    total = sum(len(v) for v in table.values())
    print(f"{'attacker':>8}  vulnerable agents")
    for m, vs in table.items():
        print(f"{m:>8}  {', '.join(map(str, vs)) if vs else '-'}")
    print(f"total: {total} vulnerable (attacker, target) pairs")
    if out is not None:
        _write(out, "scan.json", _dump({"table": {str(k): v for k, v in table.items()}, "total": total}))
    return EXIT_OK


def demo_config_path(protocol: str = "dt") -> Path:
    return Path(str(resources.files("edgepriv") / "data" / DEMO_CONFIGS[protocol]))


def cmd_demo(cfg: ExperimentConfig, out: Path, tol=None) -> int:
    print(f"== run ({cfg.protocol}) ==")
    cmd_run(cfg, out)
    print("== scan ==")
    cmd_scan(cfg, out)
    if cfg.attacker["type"] == "internal":
        print("== attack ==")
        cmd_attack(cfg, out)
    print("== twin check ==")
    return cmd_twin_check(cfg, out, tol)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="edgepriv", description="Edge-perturbed average consensus experiments.")
    sub = parser.add_subparsers(dest="command", required=True)
    for name, helptext in (
        ("run", "run the protocol and write trajectory, transcript and summary"),
        ("attack", "reconstruct initial states from an internal attacker's view"),
        ("twin-check", "build twin instances and diff attacker views"),
        ("scan", "list vulnerable agents for every attacker placement"),
        ("demo", "run everything on the shipped five-agent demo"),
    ):
        p = sub.add_parser(name, help=helptext)
        p.add_argument("--config", type=Path, required=name != "demo", help="experiment JSON")
        p.add_argument("--out", type=Path, help="output directory (overrides the config)")
        p.add_argument("--seed", type=int, help="override the config seed")
        p.add_argument("--tol", type=float, help="twin-check tolerance")
        if name == "demo":
            p.add_argument("--protocol", choices=sorted(DEMO_CONFIGS), default="dt")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        path = args.config if args.config is not None else demo_config_path(getattr(args, "protocol", "dt"))
        cfg = load_config(path)
        if args.seed is not None:
            cfg = cfg.with_seed(args.seed)
        if args.tol is not None:
            if not args.tol > 0:
                raise ConfigError("--tol must be positive")
            cfg = replace(cfg, tolerances=dict(cfg.tolerances, twin=args.tol))
        out = _out_dir(cfg, args.out)
        handlers = {
            "run": lambda: cmd_run(cfg, out),
            "attack": lambda: cmd_attack(cfg, out),
            "twin-check": lambda: cmd_twin_check(cfg, out, args.tol),
            "scan": lambda: cmd_scan(cfg, out),
            "demo": lambda: cmd_demo(cfg, out, args.tol),
        }
        return handlers[args.command]()
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except Exception as exc:  # noqa: BLE001
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
