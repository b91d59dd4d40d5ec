"""Cross-checks of the LP-based solvers against the independent oracles."""

import math

import numpy as np
import pytest

from illiq.market import LossSpec, MarketModel
from illiq.models import bin1, call_claim, martingale_prices, random_pwl_loss, small_tree
from illiq.primal import solve_alm, superhedge, unit_premium
from oracles import alm_objective, projected_subgradient, superhedge_by_vertices


def _boxed_bidask(rng, max_nodes=6):
    tree = small_tree(rng, max_nodes)
    P = martingale_prices(tree, rng, 1)
    spread = rng.uniform(0.01, 0.1, size=(tree.n, 1))
    box = (np.array([[1.0, 0.0], [-1.0, 0.0], [0.0, 1.0], [0.0, -1.0]]),
           np.array(rng.uniform(1.0, 3.0, size=4)))
    m = MarketModel.linear_prices(tree, P, [box] * tree.n, spread=spread)
    return m, rng.normal(scale=0.5, size=tree.n)


def test_objective_matches_package(rng):
    m = bin1()
    loss = LossSpec([random_pwl_loss(rng), random_pwl_loss(rng)])
    c = call_claim(m)
    sol = solve_alm(m, loss, c)
    assert alm_objective(m, loss, c, sol.x.values) == pytest.approx(sol.value, abs=1e-9)


def test_subgradient_oracle_agrees(rng):
    for _ in range(3):
        m, c = _boxed_bidask(rng)
        loss = LossSpec([random_pwl_loss(rng) for _ in range(m.tree.T + 1)])
        ref, _ = projected_subgradient(m, loss, c, iters=20_000)
        assert solve_alm(m, loss, c).value == pytest.approx(ref, abs=1e-4)


def test_vertex_oracle_bin1():
    m = bin1()
    box = (np.array([[1.0, 0.0], [-1.0, 0.0], [0.0, 1.0], [0.0, -1.0]]), np.full(4, 5.0))
    mb = MarketModel.linear_prices(m.tree, [[1.0], [2.0], [0.5]], [box] * 3)
    p0 = unit_premium(m.tree)
    c = call_claim(m)
    assert superhedge_by_vertices(mb, c, p0, "sup") == pytest.approx(1 / 3, abs=1e-10)
    assert superhedge_by_vertices(mb, c, p0, "inf") == pytest.approx(1 / 3, abs=1e-10)


@pytest.mark.parametrize("side", ["sup", "inf"])
def test_vertex_oracle_agrees(rng, side):
    for _ in range(4):
        m, c = _boxed_bidask(rng)
        p0 = unit_premium(m.tree)
        ref = superhedge_by_vertices(m, c, p0, side)
        got = superhedge(m, c, p0, side=side).value
        if math.isinf(ref):
            assert got == ref
        else:
            assert got == pytest.approx(ref, abs=1e-8)
