import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from aicbnb import data, ols, stepwise as sw
from aicbnb.bnb import NodeState

from instances import dense_objective, prepared, random_instance


def test_node_without_free_variables():
    d, g, _ = prepared(random_instance(1, n=30, p=4))
    node = NodeState.from_sets(Z1=[1, 3], Z0=[2, 4])
    fw, bw = sw.run_both(g, node.Z1, node.Z)
    assert fw.subset == bw.subset == (1, 3)
    assert not fw.moves and not bw.moves
    assert sw.stepwise_bound(node, g).objective.value == pytest.approx(dense_objective(d, [1, 3]), abs=1e-9)


def test_forward_recovers_exact_signal():
    rng = np.random.default_rng(0)
    X = rng.normal(size=(60, 4))
    d, g, _ = prepared(data.from_arrays(X, X[:, 0] + 1e-3 * rng.normal(size=60)))
    res = sw.sw_forward(g)
    assert res.subset[:1] == (1,)
    assert 1 in ols.enumerate_all(g).subset


def test_single_predictor_both_passes_agree_with_enumeration():
    d, g, _ = prepared(random_instance(3, n=30, p=1))
    e = ols.enumerate_all(g)
    assert sw.sw_forward(g).subset == sw.sw_backward(g).subset == e.subset


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 10_000), st.data())
def test_node_feasibility_and_move_invariants(seed, draw):
    d, g, _ = prepared(random_instance(seed, n=30, p=8, dependent=seed % 3 == 0))
    labels = draw.draw(st.lists(st.sampled_from("10f"), min_size=8, max_size=8))
    Z1 = [j + 1 for j, c in enumerate(labels) if c == "1"]
    Z0 = [j + 1 for j, c in enumerate(labels) if c == "0"]
    Z = [j + 1 for j, c in enumerate(labels) if c == "f"]
    for res in sw.run_both(g, Z1, Z):
        assert set(Z1) <= set(res.subset)
        assert not set(Z0) & set(res.subset)
        assert len(res.moves) <= len(Z)
        assert res.evaluations <= len(Z) * (len(Z) + 1) // 2 + len(Z) + 1
        vals = [dense_objective(d, Z1 if res.direction == "forward" else Z1 + Z)]
        vals += [v for _, _, v in res.moves]
        assert all(b < a - 1e-9 for a, b in zip(vals, vals[1:]))


def test_never_below_oracle():
    for seed in range(15):
        d, g, _ = prepared(random_instance(500 + seed, n=30, p=8))
        best = ols.enumerate_all(g).objective.value
        assert sw.sw_forward(g).objective.value >= best - 1e-9
        assert sw.sw_backward(g).objective.value >= best - 1e-9


def test_result_objective_matches_subset():
    d, g, _ = prepared(random_instance(7, n=40, p=10))
    for res in (sw.sw_forward(g), sw.sw_backward(g)):
        assert res.objective.value == pytest.approx(dense_objective(d, res.subset), abs=1e-9)
        assert res.full_aic(d.n) == pytest.approx(ols.full_aic(res.objective, d.n))
