import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from edgepriv import dt_engine, graph, perturb
from edgepriv.dt_engine import ConfigError, DtConfig

from _util import message_passing_dt, random_dt_config, random_graph

X0 = np.array([7.0, 3.0, 1.0, -2.0, -15.0])
DEMO = DtConfig(eps1=1.0, eps2=1 / 3 - 0.01, iterations=500)


def test_demo_converges_to_mean():
    g = graph.demo_graph()
    traj, transcript, k = dt_engine.run(g, X0, perturb.random_discrete(g, 42), DEMO)
    assert np.abs(traj.states[-1] + 1.2).max() < 1e-9
    assert k is not None and k < 500
    assert transcript.values.shape == (500, 8)


def test_matches_message_passing_oracle():
    rng = np.random.default_rng(11)
    for _ in range(30):
        g = random_graph(rng)
        x0 = rng.uniform(-10, 10, g.n)
        P = perturb.random_discrete(g, int(rng.integers(1 << 30)))
        cfg = random_dt_config(rng, g, iterations=25)
        traj, tr, _ = dt_engine.run(g, x0, P, cfg)
        states, sent = message_passing_dt(g, x0, P, cfg.eps1, cfg.eps2, 25)
        assert np.allclose(traj.states, states, rtol=0, atol=1e-10)
        for k in (0, 1, 24):
            for e, v in sent[k].items():
                assert abs(tr.message(k, *e) - v) < 1e-10


def test_scramble_step_matches_matrix_form():
    g = graph.demo_graph()
    P = perturb.random_discrete(g, 3)
    x1, msgs = dt_engine.scramble_step(X0, P, 0.7, g)
    L = graph.laplacian(g)
    assert np.allclose(x1, X0 - 0.7 * L @ X0 + 0.7 * P.column_sums())
    assert msgs[(3, 4)] == X0[2] + P.entry(3, 4)


def test_zero_perturbation_reduces_to_plain_iteration():
    g = graph.demo_graph()
    cfg = DtConfig(eps1=0.3, eps2=0.3, iterations=40)
    traj, _, _ = dt_engine.run(g, X0, perturb.zero_discrete(g), cfg)
    W = np.eye(5) - 0.3 * graph.laplacian(g)
    x = X0.copy()
    for row in traj.states[1:]:
        x = W @ x
        assert np.allclose(row, x, atol=1e-12)


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_sum_is_invariant(seed):
    rng = np.random.default_rng(seed)
    g = random_graph(rng)
    x0 = rng.uniform(-10, 10, g.n)
    cfg = random_dt_config(rng, g, iterations=50)
    traj, _, _ = dt_engine.run(g, x0, perturb.random_discrete(g, seed), cfg)
    sums = traj.states.sum(axis=1)
    assert np.abs(sums - sums[0]).max() <= 1e-10 * (1 + np.abs(x0).sum())


@pytest.mark.parametrize(
    "cfg, msg",
    [
        (DtConfig(0.0, 0.2), "eps1"),
        (DtConfig(1.0, 0.6), "0.5"),
        (DtConfig(1.0, 0.0), "eps2"),
        (DtConfig(1.0, 0.2, iterations=0), "iterations"),
    ],
)
def test_config_checks(cfg, msg):
    with pytest.raises(ConfigError, match=msg):
        cfg.check(graph.demo_graph())


def test_early_stop_truncates():
    g = graph.demo_graph()
    cfg = DtConfig(1.0, 1 / 3 - 0.01, iterations=500, early_stop=True)
    traj, tr, k = dt_engine.run(g, X0, perturb.random_discrete(g, 42), cfg)
    assert traj.states.shape[0] == k + 1
    assert tr.values.shape[0] == k


def test_outputs_serialise():
    g = graph.demo_graph()
    traj, tr, _ = dt_engine.run(g, X0, perturb.random_discrete(g, 42), DtConfig(1.0, 0.3, iterations=3))
    lines = traj.to_csv().splitlines()
    assert lines[0] == "k,x_1,x_2,x_3,x_4,x_5"
    assert len(lines) == 5
    recs = [json.loads(s) for s in tr.to_jsonl().splitlines()]
    assert len(recs) == 3 * 8 == len(tr)
    assert recs[0].keys() == {"k", "from", "to", "value"}


def test_invalid_graph_is_rejected():
    g = graph.build(3, [(1, 2), (2, 3)])
    with pytest.raises(graph.GraphError):
        dt_engine.run(g, np.zeros(3), perturb.zero_discrete(g), DtConfig(1.0, 0.5))
