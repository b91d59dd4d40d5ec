import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from illiq.kernel import PiecewiseConvex
from illiq.tree import (
    ClaimProcess,
    TreeError,
    adapted_projection,
    binomial_tree,
    build_tree,
    conditional_expectation,
    random_tree,
)


def _binomial_nodes(p=(0.5, 0.5)):
    return [{"id": 0, "t": 0, "parent": None, "prob": 1.0},
            {"id": 1, "t": 1, "parent": 0, "prob": p[0]},
            {"id": 2, "t": 1, "parent": 0, "prob": p[1]}]


def test_single_node_tree():
    tree = build_tree([{"id": "r", "t": 0, "parent": None, "prob": 1.0}])
    assert tree.T == 0 and tree.n == 1


def test_binomial_tree_probabilities():
    tree = build_tree(_binomial_nodes())
    assert tree.prob[tree.leaves].tolist() == [0.5, 0.5]


@pytest.mark.parametrize("nodes,msg", [
    (_binomial_nodes((0.5, 0.6)), "probabilities do not sum to 1"),
    (_binomial_nodes() + [{"id": 3, "t": 1, "parent": 9, "prob": 1.0}], "orphan node"),
    (_binomial_nodes() + [{"id": 3, "t": 2, "parent": 1, "prob": 1.0}], "leaf at wrong depth"),
    ([{"id": 0, "t": 0, "parent": 1, "prob": 1.0}, {"id": 1, "t": 1, "parent": 0, "prob": 1.0}],
     "cycle detected"),
    (_binomial_nodes() + [{"id": 5, "t": 0, "parent": None, "prob": 1.0}], "forests are rejected"),
])
def test_build_errors(nodes, msg):
    with pytest.raises(TreeError, match=msg):
        build_tree(nodes)


def test_zero_probability_branch_rejected():
    with pytest.raises(TreeError, match="zero-probability"):
        build_tree(_binomial_nodes((1.0, 0.0)))


def test_conditional_expectation_examples():
    tree = build_tree(_binomial_nodes())
    assert conditional_expectation(tree, [2.0, 4.0], 1, 0)[0, 0] == 3.0
    same = conditional_expectation(tree, [2.0, 4.0], 1, 1)
    assert same[:, 0].tolist() == [2.0, 4.0]
    with pytest.raises(ValueError, match="anticipating"):
        conditional_expectation(tree, [1.0], 0, 1)


def test_adapted_projection_examples():
    tree = build_tree(_binomial_nodes())
    raw = np.array([[2.0, 5.0], [4.0, 7.0]])
    proj = adapted_projection(tree, raw)
    assert proj.scalar.tolist() == [3.0, 5.0, 7.0]
    again = adapted_projection(tree, np.array([[3.0, 5.0], [3.0, 7.0]]))
    assert again.scalar.tolist() == [3.0, 5.0, 7.0]
    with pytest.raises(ValueError, match="missing path value"):
        adapted_projection(tree, np.array([[2.0, np.nan], [4.0, 7.0]]))


@given(st.integers(0, 2**32 - 1))
def test_tower_property(seed):
    rng = np.random.default_rng(seed)
    tree = random_tree(rng, max_T=4, max_nodes=30)
    vals = rng.normal(size=len(tree.layers[tree.T]))
    direct = conditional_expectation(tree, vals, tree.T, 0)
    for s in range(tree.T + 1):
        mid = conditional_expectation(tree, vals, tree.T, s)
        assert np.allclose(conditional_expectation(tree, mid, s, 0), direct, atol=1e-12)
    assert abs(direct[0, 0] - tree.prob[tree.leaves] @ vals) <= 1e-12


@given(st.integers(0, 2**32 - 1))
def test_adapted_projection_linear_and_idempotent(seed):
    rng = np.random.default_rng(seed)
    tree = random_tree(rng, max_T=3, max_nodes=20)
    nl = len(tree.leaves)
    a = rng.normal(size=(nl, tree.T + 1))
    b = rng.normal(size=(nl, tree.T + 1))
    pa, pb = adapted_projection(tree, a), adapted_projection(tree, b)
    assert np.allclose(adapted_projection(tree, 2 * a - b).scalar, 2 * pa.scalar - pb.scalar)
    # re-expand the projection along paths and project again
    paths = np.array([[pa.scalar[n] for n in tree.path(int(leaf))] for leaf in tree.leaves])
    assert np.allclose(adapted_projection(tree, paths).scalar, pa.scalar, atol=1e-12)


def test_jensen_for_separable_loss():
    rng = np.random.default_rng(3)
    V = PiecewiseConvex.exponential(1.0)
    for _ in range(100):
        tree = random_tree(rng, max_T=3, max_nodes=15)
        raw = rng.normal(size=(len(tree.leaves), tree.T + 1))
        proj = adapted_projection(tree, raw).scalar
        ev_proj = float(tree.prob @ V(proj))
        ev_raw = sum(tree.prob[leaf] * V(raw[k]).sum() for k, leaf in enumerate(tree.leaves))
        assert ev_proj <= ev_raw + 1e-12


def test_binomial_tree_builder():
    tree = binomial_tree(3, 0.3)
    assert tree.n == 15 and abs(tree.prob[tree.leaves].sum() - 1.0) < 1e-12


def test_claim_process_arithmetic():
    tree = binomial_tree(1)
    c = ClaimProcess(tree, [1.0, 2.0, 3.0])
    assert ((c + c) * 0.5 - c).scalar.tolist() == [0.0, 0.0, 0.0]
    with pytest.raises(ValueError):
        ClaimProcess(tree, [1.0, 2.0])
