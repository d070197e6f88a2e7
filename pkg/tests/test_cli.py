import hashlib
import json

import pytest

from edgepriv import cli
from edgepriv.config import load_config, parse_config
from edgepriv.dt_engine import ConfigError


def _demo(protocol="dt"):
    return json.loads(cli.demo_config_path(protocol).read_text())


def _write_config(tmp_path, data, name="cfg.json"):
    p = tmp_path / name
    p.write_text(json.dumps(data))
    return p


def _digest(path):
    return hashlib.sha256(path.read_bytes()).hexdigest()


def test_demo_config_loads_with_reference_parameters():
    cfg = load_config(cli.demo_config_path("dt"))
    assert cfg.params["eps1"] == 1.0
    assert cfg.params["eps2"] == pytest.approx(1 / 3 - 0.01)
    assert list(cfg.x0) == [7, 3, 1, -2, -15]
    assert cfg.seed == 42


@pytest.mark.parametrize(
    "patch, needle",
    [
        ({"params": {"eps1": 1.0, "eps2": 0.6}}, "0.5"),
        ({"params": {"eps1": 0.0, "eps2": 0.3}}, "eps1"),
        ({"seed": None}, "seed"),
        ({"x0": [1, 2]}, "x0 has 2 entries"),
        ({"attacker": {"type": "internal", "m": 9}}, "attacker.m"),
        ({"twins": [{"variant": "internal", "target": 3, "partner": 1, "value": 1}]}, "partner 1 must send"),
        ({"twins": [{"variant": "external", "delta": -1.0}]}, "gain zero"),
        ({"graph": {"n": 3, "edges": [[1, 2], [2, 3]]}}, "unbalanced"),
        ({"colour": "blue"}, "unknown key"),
    ],
)
def test_config_errors_name_the_constraint(patch, needle):
    data = _demo()
    data.update(patch)
    if data.get("seed", 0) is None:
        del data["seed"]
    with pytest.raises(ConfigError, match=needle):
        parse_config(data)


def test_all_violations_are_reported_together():
    data = _demo()
    data.update({"params": {"eps1": 0.0, "eps2": 0.9}, "x0": [1]})
    with pytest.raises(ConfigError) as exc:
        parse_config(data)
    msg = str(exc.value)
    assert "eps1" in msg and "eps2" in msg and "x0" in msg


def test_bad_json_and_missing_file(tmp_path):
    p = tmp_path / "bad.json"
    p.write_text("{not json")
    with pytest.raises(ConfigError, match="invalid JSON"):
        load_config(p)
    assert cli.main(["run", "--config", str(tmp_path / "nope.json")]) == cli.EXIT_CONFIG


def test_run_writes_layout_and_limit(tmp_path):
    assert cli.main(["run", "--config", str(cli.demo_config_path()), "--out", str(tmp_path)]) == 0
    assert {p.name for p in tmp_path.iterdir()} == {"config-echo.json", "trajectory.csv", "transcript.jsonl", "summary.json"}
    summary = json.loads((tmp_path / "summary.json").read_text())
    assert summary["limit"] == pytest.approx(-1.2, abs=1e-9)
    assert summary["mean_x0"] == pytest.approx(-1.2)
    assert summary["final_spread"] < 1e-9
    assert summary["converged_at"] is not None
    assert (tmp_path / "trajectory.csv").read_text().startswith("k,x_1,x_2,x_3,x_4,x_5\n")


def test_runs_are_deterministic(tmp_path):
    for d in ("a", "b"):
        cli.main(["run", "--config", str(cli.demo_config_path()), "--out", str(tmp_path / d)])
    for name in ("trajectory.csv", "transcript.jsonl", "summary.json"):
        assert _digest(tmp_path / "a" / name) == _digest(tmp_path / "b" / name)


def test_seed_override_changes_transcript_only(tmp_path):
    cfg = str(cli.demo_config_path())
    cli.main(["run", "--config", cfg, "--out", str(tmp_path / "a")])
    cli.main(["run", "--config", cfg, "--out", str(tmp_path / "b"), "--seed", "7"])
    assert _digest(tmp_path / "a" / "transcript.jsonl") != _digest(tmp_path / "b" / "transcript.jsonl")
    lim = [json.loads((tmp_path / d / "summary.json").read_text())["limit"] for d in "ab"]
    assert lim[0] == pytest.approx(lim[1], abs=1e-9)


def test_ct_demo_run_keeps_sum(tmp_path):
    assert cli.main(["run", "--config", str(cli.demo_config_path("ct")), "--out", str(tmp_path)]) == 0
    summary = json.loads((tmp_path / "summary.json").read_text())
    assert summary["sum_drift"] < 1e-8
    assert (tmp_path / "trajectory.csv").read_text().startswith("t,x_1")


def test_attack_on_pendant_graph(tmp_path):
    data = _demo()
    data.update({"graph": {"type": "pendant_pair", "n": 5, "attacker": 2}, "attacker": {"type": "internal", "m": 2}, "twins": []})
    p = _write_config(tmp_path, data)
    assert cli.main(["attack", "--config", str(p), "--out", str(tmp_path / "o")]) == 0
    report = json.loads((tmp_path / "o" / "attack.json").read_text())
    rows = {r["target"]: r for r in report["results"]}
    assert report["vulnerable"] == [5]
    assert rows[5]["status"] == "recovered" and rows[5]["error"] < 1e-12
    assert all(rows[v]["status"] == "refused" for v in (1, 3, 4))


def test_attack_on_demo_refuses_everything(tmp_path):
    assert cli.main(["attack", "--config", str(cli.demo_config_path()), "--out", str(tmp_path)]) == 0
    report = json.loads((tmp_path / "attack.json").read_text())
    assert report["vulnerable"] == []
    assert all(r["status"] == "refused" for r in report["results"])


def test_attack_refuses_external_attacker(tmp_path):
    data = _demo()
    data["attacker"] = {"type": "external"}
    p = _write_config(tmp_path, data)
    assert cli.main(["attack", "--config", str(p), "--out", str(tmp_path / "o")]) == cli.EXIT_CONFIG


def test_twin_check_exit_codes(tmp_path, capsys):
    assert cli.main(["twin-check", "--config", str(cli.demo_config_path()), "--out", str(tmp_path / "a")]) == 0
    out = capsys.readouterr().out
    assert "PASS" in out and "INDISTINGUISHABLE" in out and "4->3" in out
    data = _demo()
    data["twins"] = [{"variant": "internal", "target": 3, "partner": 4, "value": 10, "skip_edge": [3, 5]}]
    p = _write_config(tmp_path, data)
    assert cli.main(["twin-check", "--config", str(p), "--out", str(tmp_path / "b")]) == cli.EXIT_VERDICT
    assert "FAIL" in capsys.readouterr().out


def test_scan_tables(tmp_path, capsys):
    cases = [({"type": "ring", "n": 3}, 3, 0), ({"type": "pendant_pair", "n": 5}, 5, 1), ("demo", 5, 0)]
    for graph_spec, n, nonempty in cases:
        data = _demo()
        data.update({"graph": graph_spec, "x0": [0.0] * n, "twins": [], "attacker": {"type": "none"}})
        p = _write_config(tmp_path, data)
        assert cli.main(["scan", "--config", str(p), "--out", str(tmp_path / "s")]) == 0
        table = json.loads((tmp_path / "s" / "scan.json").read_text())["table"]
        assert sum(bool(v) for v in table.values()) == nonempty
    capsys.readouterr()


def test_graph_file_path_is_relative_to_config(tmp_path):
    (tmp_path / "g.txt").write_text("1 2\n2 3\n3 1\n")
    data = {"seed": 1, "graph": "g.txt", "x0": [1, 2, 3], "protocol": "dt", "params": {"eps1": 1.0, "eps2": 0.5 - 1e-3}}
    cfg = load_config(_write_config(tmp_path, data))
    assert cfg.graph.n == 3


def test_demo_subcommand(tmp_path, capsys):
    assert cli.main(["demo", "--out", str(tmp_path)]) == 0
    assert (tmp_path / "twin-report.json").exists()
    capsys.readouterr()


def test_runtime_error_exit_code(tmp_path):
    blocker = tmp_path / "file"
    blocker.write_text("")
    assert cli.main(["run", "--config", str(cli.demo_config_path()), "--out", str(blocker / "sub")]) == cli.EXIT_RUNTIME


def test_eps2_defaults_inside_the_step_bound():
    data = _demo()
    data["params"] = {"eps1": 1.0}
    cfg = parse_config(data)
    assert cfg.params["eps2"] == pytest.approx(0.45)
