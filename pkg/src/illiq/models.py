"""Reference instances and random instance generators."""

from __future__ import annotations

import numpy as np

from .kernel import PiecewiseConvex
from .market import LossSpec, MarketModel
from .tree import ScenarioTree, binomial_tree, build_tree, random_tree

INF = float("inf")


def one_period_tree(probs) -> ScenarioTree:
    nodes = [{"id": 0, "t": 0, "parent": None, "prob": 1.0}]
    for k, p in enumerate(probs):
        nodes.append({"id": k + 1, "t": 1, "parent": 0, "prob": float(p)})
    return build_tree(nodes)


def bin1() -> MarketModel:
    """Stock at 1, moving to 2 or 0.5 with probability 1/2; liquid cash."""
    tree = one_period_tree([0.5, 0.5])
    return MarketModel.linear_prices(tree, [[1.0], [2.0], [0.5]], assets=("cash", "stock"))


def arbitrage() -> MarketModel:
    """Stock at 1 that surely moves to 2."""
    tree = one_period_tree([0.5, 0.5])
    return MarketModel.linear_prices(tree, [[1.0], [2.0], [2.0]], assets=("cash", "stock"))


def trinomial() -> MarketModel:
    """Incomplete one-period market: stock 1 -> {2, 1, 0.5}, probability 1/3 each."""
    tree = one_period_tree([1 / 3, 1 / 3, 1 / 3])
    return MarketModel.linear_prices(tree, [[1.0], [2.0], [1.0], [0.5]], assets=("cash", "stock"))


def call_claim(model: MarketModel, strike: float = 1.0, asset: int = 1) -> np.ndarray:
    """Terminal payoff ``max(s_T - K, 0)`` of a linear-priced asset."""
    tree = model.tree
    c = np.zeros(tree.n)
    for n in tree.leaves:
        s = model.costs[n][asset].slopes[0]
        c[n] = max(s - strike, 0.0)
    return c


def martingale_prices(tree: ScenarioTree, rng: np.random.Generator, n_assets: int,
                      vol: float = 0.3) -> np.ndarray:
    """Positive price paths that are martingales under the tree measure."""
    P = np.ones((tree.n, n_assets))
    for n in range(tree.n):
        ch = tree.children[n]
        if not ch:
            continue
        w = tree.cond[ch]
        for k in range(n_assets):
            if len(ch) == 1:
                P[ch[0], k] = P[n, k]
                continue
            z = rng.normal(size=len(ch))
            z = z - w @ z
            scale = vol / max(np.max(np.abs(z)), 1e-12)
            P[ch, k] = P[n, k] * (1.0 + scale * z * rng.uniform(0.3, 1.0))
    return P


def random_pwl_loss(rng: np.random.Generator) -> PiecewiseConvex:
    """Nondecreasing piecewise-linear loss with ``V(0)=0``, flat far left
    (``dom V*`` contains 0) and a kink at 0 with slopes straddling 1."""
    a = float(rng.uniform(0.2, 0.9))
    b = float(rng.uniform(1.2, 4.0))
    k = float(rng.uniform(0.5, 3.0))
    return PiecewiseConvex.pwl([-k, 0.0], [0.0, a, b], (0.0, 0.0))


def random_pwl_cost(rng: np.random.Generator, price: float) -> PiecewiseConvex:
    """Bid-ask cost around ``price`` with an extra illiquidity kink."""
    e1 = float(rng.uniform(0.0, 0.05))
    e2 = float(rng.uniform(0.05, 0.2))
    q = float(rng.uniform(0.5, 2.0))
    return PiecewiseConvex.pwl(
        [-q, 0.0, q],
        [price * (1 - e2), price * (1 - e1), price * (1 + e1), price * (1 + e2)],
    )


def random_pwl_instance(rng: np.random.Generator, max_T: int = 4, max_nodes: int = 30,
                        max_assets: int = 3, constraints: bool = True):
    """(model, loss, claim) with piecewise-linear data on a random tree."""
    tree = random_tree(rng, max_T=max_T, max_nodes=max_nodes)
    J = int(rng.integers(2, max_assets + 1))
    P = martingale_prices(tree, rng, J - 1)
    costs = []
    for n in range(tree.n):
        costs.append([None] + [random_pwl_cost(rng, P[n, k]) for k in range(J - 1)])
    cons = None
    if constraints and rng.random() < 0.5:
        cons = []
        for n in range(tree.n):
            # position limits on risky assets
            A = np.vstack([np.eye(J)[1:], -np.eye(J)[1:]])
            b = rng.uniform(0.5, 3.0, size=2 * (J - 1))
            cons.append((A, b))
    model = MarketModel.build(tree, costs, cons, liquid_cash=True)
    loss = LossSpec([random_pwl_loss(rng) for _ in range(tree.T + 1)])
    c = rng.normal(scale=0.5, size=tree.n)
    return model, loss, c


def random_bidask_instance(rng: np.random.Generator, short_sales: bool = False,
                           max_T: int = 3, max_nodes: int = 20, max_assets: int = 3):
    """Liquid cash plus proportional bid-ask costs; optional short-sale ban."""
    tree = random_tree(rng, max_T=max_T, max_nodes=max_nodes)
    J = int(rng.integers(2, max_assets + 1))
    P = martingale_prices(tree, rng, J - 1)
    spread = rng.uniform(0.01, 0.1, size=(tree.n, J - 1))
    cons = None
    if short_sales:
        A = -np.eye(J)[1:]
        cons = [(A, np.zeros(J - 1)) for _ in range(tree.n)]
    model = MarketModel.linear_prices(tree, P, cons, spread=spread)
    loss = LossSpec([random_pwl_loss(rng) for _ in range(tree.T + 1)])
    c = rng.normal(scale=0.5, size=tree.n)
    return model, loss, c, P, spread


def small_tree(rng: np.random.Generator, max_nodes: int = 6) -> ScenarioTree:
    while True:
        tree = random_tree(rng, max_T=2, max_nodes=max_nodes, max_branch=3)
        if tree.n <= max_nodes:
            return tree


__all__ = [
    "arbitrage", "bin1", "binomial_tree", "call_claim", "martingale_prices", "one_period_tree",
    "random_bidask_instance", "random_pwl_cost", "random_pwl_instance", "random_pwl_loss",
    "small_tree", "trinomial",
]
