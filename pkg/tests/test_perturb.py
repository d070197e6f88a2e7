import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from edgepriv import graph, perturb
from edgepriv.perturb import PerturbationError


@settings(max_examples=100, deadline=None)
@given(st.integers(3, 9), st.integers(0, 2**32 - 1), st.floats(0, 50))
def test_discrete_rows_are_locally_zero_sum(n, seed, amp):
    g = graph.random_balanced(n, np.random.default_rng(seed))
    P = perturb.random_discrete(g, seed, amp)
    assert np.allclose(P.matrix.sum(axis=1), 0, atol=1e-12)
    off = P.matrix - np.diag(np.diag(P.matrix))
    assert np.all(off[~g.adjacency.T.astype(bool)] == 0)
    assert np.abs(off).max(initial=0) <= amp


def test_random_discrete_is_seeded():
    g = graph.demo_graph()
    a = perturb.random_discrete(g, 42)
    b = perturb.random_discrete(g, 42)
    c = perturb.random_discrete(g, 43)
    assert np.array_equal(a.matrix, b.matrix)
    assert not np.array_equal(a.matrix, c.matrix)


def test_from_dict_checks_sparsity_and_diagonal():
    g = graph.demo_graph()
    P = perturb.random_discrete(g, 1)
    assert np.array_equal(perturb.DiscretePerturbation.from_dict(P.to_dict(), g).matrix, P.matrix)
    bad = P.matrix.copy()
    bad[0, 2] = 1.0  # 1 -> 3 is not an edge
    with pytest.raises(PerturbationError, match="not an edge"):
        perturb.DiscretePerturbation.from_dict({"n": 5, "matrix": bad.tolist()}, g)
    bad = P.matrix.copy()
    bad[0, 0] += 1.0
    with pytest.raises(PerturbationError, match="diagonal"):
        perturb.DiscretePerturbation.from_dict({"n": 5, "matrix": bad.tolist()}, g)


def test_from_edge_values_rejects_non_edges():
    with pytest.raises(PerturbationError):
        perturb.from_edge_values(graph.demo_graph(), {(1, 3): 1.0})


def test_fourier_signal_values():
    s = perturb.FourierSignal(1.0, (2.0,), (3.0,), 1.0)
    t = np.array([0.0, 0.25])
    expected = 1 + 2 * np.cos(2 * np.pi * t) + 3 * np.sin(2 * np.pi * t)
    assert np.allclose(s(t), expected)
    assert s.bound() == 6.0


@pytest.mark.parametrize("rate", [-1.0, -0.5, 0.5, 1.0, 2.0])
def test_exp_decay_endpoints(rate):
    s = perturb.ExpDecaySignal(rate, 1.0, 3.0)
    assert math.isclose(float(s(0.0)), 3.0, rel_tol=1e-14)
    assert abs(float(s(1.0))) < 1e-15
    t = np.linspace(0, 1, 7)
    direct = 3.0 * (np.exp(-rate * t) - np.exp(-rate)) / (1 - np.exp(-rate))
    assert np.allclose(s(t), direct, rtol=1e-12, atol=1e-14)


def test_exp_decay_refuses_ill_conditioned():
    with pytest.raises(PerturbationError, match="ill-conditioned"):
        perturb.ExpDecaySignal(1e-10, 1.0, 1.0)


def test_signal_algebra_and_roundtrip():
    a = perturb.ConstantSignal(2.0)
    b = perturb.ExpDecaySignal(1.0, 1.0, 1.0)
    combo = a - b + (-a)
    t = np.linspace(0, 1, 5)
    assert np.allclose(combo(t), -b(t))
    again = perturb.signal_from_dict(combo.to_dict())
    assert np.allclose(again(t), combo(t))


def test_continuous_matrix_is_zero_sum_and_column_sums_match():
    g = graph.demo_graph()
    p = perturb.random_continuous(g, 3, K=2)
    for t in (0.0, 0.3, 1.0):
        m = p.eval_matrix(t)
        assert np.allclose(m.sum(axis=1), 0, atol=1e-12)
        assert np.allclose(p.column_sums(t)[0], m.sum(axis=0), atol=1e-12)


def test_continuous_window_is_enforced():
    p = perturb.random_continuous(graph.demo_graph(), 3)
    with pytest.raises(PerturbationError):
        p.edge_values(1.5)
    with pytest.raises(PerturbationError):
        perturb.random_continuous(graph.demo_graph(), 3, K=0)


def test_continuous_roundtrip():
    g = graph.demo_graph()
    p = perturb.random_continuous(g, 5)
    q = perturb.ContinuousPerturbation.from_dict(p.to_dict(), g)
    t = np.linspace(0, 1, 11)
    assert np.array_equal(p.edge_values(t), q.edge_values(t))


def test_state_feedback_subtracts_from_out_edges():
    g = graph.ring(3)
    base = perturb.zero_continuous(g, 1.0)
    fb = perturb.StateFeedback(0.5, np.zeros(3), np.zeros(3), base, 1.0)
    p = perturb.ContinuousPerturbation(g, {}, 1.0, fb)
    vals = p.edge_values([0.2], np.array([[2.0, 4.0, 6.0]]))
    # edges sorted: (1,2), (2,3), (3,1); sender's correction is 0.5 * x_sender
    assert np.allclose(vals, [[-1.0, -2.0, -3.0]])
    with pytest.raises(PerturbationError, match="reference"):
        p.edge_values([0.2])
