import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from illiq.dual import (
    check_optimality,
    conjugate_phi,
    evaluate_certificate,
    shadow_prices,
    solve_dual,
    solve_dual_direct,
    support_C,
)
from illiq.kernel import PiecewiseConvex
from illiq.market import LossSpec, MarketModel, trading_cost
from illiq.models import (
    bin1,
    call_claim,
    one_period_tree,
    random_bidask_instance,
    random_pwl_instance,
    random_pwl_loss,
)
from illiq.primal import solve_alm, unit_premium
from illiq.tree import PortfolioProcess, adapted_projection

INF = math.inf
MARTINGALE_DENSITY = np.array([1.0, 2 / 3, 4 / 3])


# ---------------------------------------------------------------------------
# support function of the hedgeable claims


def test_support_C_bin1():
    m = bin1()
    assert support_C(m, MARTINGALE_DENSITY)[0] == pytest.approx(0.0, abs=1e-12)
    assert support_C(m, [1.0, 1.0, 1.0])[0] == INF
    assert support_C(m, np.zeros(3))[0] == pytest.approx(0.0, abs=1e-12)
    assert support_C(m, [1.0, -1.0, 3.0])[0] == INF


def test_support_C_homogeneous(rng):
    for _ in range(8):
        m, _, _ = random_pwl_instance(rng, max_T=2, max_nodes=10)
        q = rng.uniform(0.2, 2.0, size=m.tree.n)
        base = support_C(m, q)[0]
        for lam in (0.5, 3.0):
            val = support_C(m, lam * q)[0]
            if base == INF:
                assert val == INF
            else:
                assert val == pytest.approx(lam * base, abs=1e-7 * max(1.0, abs(base)))


# ---------------------------------------------------------------------------
# conjugate of the optimum value


def test_conjugate_phi_indicator_equals_support_C(rng):
    m = bin1()
    L = LossSpec.indicator(1)
    for q in (MARTINGALE_DENSITY, np.zeros(3), 2.5 * MARTINGALE_DENSITY, np.array([1.0, 1.0, 1.0])):
        assert conjugate_phi(m, L, q)[0] == support_C(m, q)[0]


def test_conjugate_phi_at_zero_is_minus_inf_phi():
    m = bin1()
    assert conjugate_phi(m, LossSpec.indicator(1), np.zeros(3))[0] == pytest.approx(0.0, abs=1e-12)


def test_conjugate_phi_negative_entry():
    m = bin1()
    L = LossSpec.broadcast(PiecewiseConvex.exponential(1.0), 1)
    assert conjugate_phi(m, L, [1.0, -0.1, 1.0])[0] == INF


@settings(max_examples=20)
@given(seed=st.integers(0, 10_000))
def test_conjugate_phi_splits(seed):
    rng = np.random.default_rng(seed)
    m, loss, _ = random_pwl_instance(rng, max_T=2, max_nodes=10)
    q = rng.uniform(0.0, 1.5, size=m.tree.n)
    total = conjugate_phi(m, loss, q)[0]
    ev = loss.expected_conjugate(m.tree, q)
    sc = support_C(m, q)[0]
    if ev == INF or sc == INF:
        assert total == INF
    else:
        assert total == pytest.approx(ev + sc, abs=1e-7)


# ---------------------------------------------------------------------------
# dual solutions


def test_dual_bin1_replication():
    m = bin1()
    c = call_claim(m) - unit_premium(m.tree) / 3
    cert = solve_dual(m, LossSpec.indicator(1), c)
    assert cert.status == "optimal"
    assert cert.value == pytest.approx(0.0, abs=1e-10)
    # q is a nonnegative multiple of the martingale density
    k = cert.q[0]
    assert k >= 0
    assert np.allclose(cert.q, k * MARTINGALE_DENSITY, atol=1e-9)


def test_dual_zero_claim():
    m = bin1()
    cert = solve_dual(m, LossSpec.indicator(1), np.zeros(3))
    assert cert.value == pytest.approx(0.0, abs=1e-12)
    assert cert.gap <= 1e-12


def test_dual_bin1_entropic():
    m = bin1()
    loss = LossSpec.terminal(PiecewiseConvex.exponential(1.0), 1)
    cert = solve_dual(m, loss, call_claim(m))
    H = (1 / 3) * math.log(2 / 3) + (2 / 3) * math.log(4 / 3)
    assert cert.primal_value == pytest.approx(math.exp(1 / 3 - H) - 1, abs=1e-7)
    assert cert.gap <= 1e-6
    assert cert.status == "optimal"


def test_strong_duality_random(rng):
    for _ in range(15):
        m, loss, c = random_pwl_instance(rng, max_T=3, max_nodes=20)
        cert = solve_dual(m, loss, c)
        assert cert.status == "optimal"
        assert cert.gap <= 1e-6


def test_direct_dual_agrees(rng):
    for _ in range(6):
        m, loss, c = random_pwl_instance(rng, max_T=2, max_nodes=10)
        cert = solve_dual(m, loss, c)
        val, q, w = solve_dual_direct(m, loss, c)
        assert val == pytest.approx(cert.value, abs=1e-6)


def test_weak_duality(rng):
    for _ in range(10):
        m, loss, c = random_pwl_instance(rng, max_T=2, max_nodes=12)
        other = rng.normal(scale=0.5, size=m.tree.n)
        cert = solve_dual(m, loss, other)          # a dual point for some other claim
        x = solve_alm(m, loss, c).x                 # and a feasible strategy for c
        ev = evaluate_certificate(m, loss, c, cert.q, cert.w)
        for strat in (x, PortfolioProcess(m.tree, np.zeros((m.tree.n, m.J)))):
            primal = loss.expected(m.tree, trading_cost(m, strat).scalar + c)
            assert ev.value <= primal + 1e-7


def test_dual_decomposition_to_dict():
    m = bin1()
    loss = LossSpec.broadcast(random_pwl_loss(np.random.default_rng(1)), 1)
    cert = solve_dual(m, loss, call_claim(m))
    d = cert.to_dict()
    parts = d["decomposition"]
    total = parts["expected_conjugate_loss"] + parts["trading_cost_term"] + parts["constraint_term"]
    assert d["value"] == pytest.approx(d["pairing"] - total, abs=1e-12)


# ---------------------------------------------------------------------------
# optimality conditions


def test_check_optimality_trivial():
    m = bin1()
    cert = evaluate_certificate(m, LossSpec.indicator(1), np.zeros(3), np.zeros(3), np.zeros((3, 2)))
    rep = check_optimality(m, LossSpec.indicator(1), np.zeros(3), np.zeros((3, 2)), cert)
    assert rep.passed


def test_check_optimality_replication_pair():
    m = bin1()
    L = LossSpec.indicator(1)
    c = call_claim(m) - unit_premium(m.tree) / 3
    cert = solve_dual(m, L, c)
    assert check_optimality(m, L, c, cert.x, cert).passed
    x = cert.x.copy()
    x[0, 1] += 0.1
    assert not check_optimality(m, L, c, x, cert).passed


def test_check_optimality_entropic_pair():
    m = bin1()
    loss = LossSpec.terminal(PiecewiseConvex.exponential(1.0), 1)
    c = call_claim(m)
    cert = solve_dual(m, loss, c)
    assert check_optimality(m, loss, c, cert.x, cert).passed


def test_check_optimality_dimension_mismatch():
    m = bin1()
    L = LossSpec.indicator(1)
    cert = solve_dual(m, L, np.zeros(3))
    cert.q = np.zeros(4)
    with pytest.raises(ValueError):
        check_optimality(m, L, np.zeros(3), np.zeros((3, 2)), cert)


def test_check_optimality_sound_and_complete(rng):
    for _ in range(10):
        m, loss, c = random_pwl_instance(rng, max_T=3, max_nodes=15)
        cert = solve_dual(m, loss, c)
        rep = check_optimality(m, loss, c, cert.x, cert)
        assert rep.passed == (cert.gap <= 1e-6)


# ---------------------------------------------------------------------------
# shadow prices


def _positive_q_bin1():
    m = bin1()
    loss = LossSpec.terminal(PiecewiseConvex.exponential(1.0), 1)
    c = call_claim(m)
    return m, solve_dual(m, loss, c)


def test_shadow_prices_linear_market():
    m, cert = _positive_q_bin1()
    sp = shadow_prices(m, cert, cert.x)
    assert sp.defined.all()
    prices = np.array([[1.0, 1.0], [1.0, 2.0], [1.0, 0.5]])
    assert np.allclose(sp.prices, prices, atol=1e-6)
    assert sp.drift_kind[0] == "martingale"


def test_shadow_prices_degenerate():
    m = bin1()
    cert = solve_dual(m, LossSpec.indicator(1), np.zeros(3))
    with pytest.raises(ValueError, match="degenerate"):
        shadow_prices(m, cert, cert.x)


def test_shadow_prices_within_spread():
    tree = one_period_tree([0.5, 0.5])
    P = [[1.0], [1.3], [0.8]]
    m = MarketModel.linear_prices(tree, P, spread=[[0.1]] * 3)
    loss = LossSpec.broadcast(random_pwl_loss(np.random.default_rng(5)), 1)
    c = np.array([0.0, 0.4, -0.2])
    cert = solve_dual(m, loss, c)
    sp = shadow_prices(m, cert, cert.x)
    for n in np.flatnonzero(sp.defined):
        s = P[n][0]
        assert 0.9 * s - 1e-9 <= sp.prices[n, 1] <= 1.1 * s + 1e-9
    assert sp.within_spread.all()
    assert np.max(sp.complementarity) <= 1e-7


def test_shadow_prices_untraded_node_complementary():
    # zero claim and a loss flat on the left: no trade, prices anywhere in the spread
    tree = one_period_tree([0.5, 0.5])
    m = MarketModel.linear_prices(tree, [[1.0], [1.3], [0.8]], spread=[[0.1]] * 3)
    loss = LossSpec.broadcast(PiecewiseConvex.linear(1.0), 1)
    cert = solve_dual(m, loss, np.zeros(3))
    sp = shadow_prices(m, cert, cert.x)
    assert np.allclose(m.delta(cert.x), 0.0)
    assert np.max(sp.complementarity) <= 1e-12


def test_shadow_prices_random_bidask(rng):
    for short_ban in (False, True):
        for _ in range(4):
            m, loss, c, P, spread = random_bidask_instance(rng, short_sales=short_ban)
            cert = solve_dual(m, loss, c)
            if not np.any(cert.q > 0):
                continue
            sp = shadow_prices(m, cert, cert.x)
            assert sp.within_spread.all()
            assert np.max(sp.complementarity) <= 1e-7
            allowed = {"martingale", "leaf"} | ({"supermartingale"} if short_ban else set())
            assert set(sp.drift_kind) <= allowed


# ---------------------------------------------------------------------------
# adapted projection of dual guesses


@settings(max_examples=20)
@given(seed=st.integers(0, 10_000))
def test_adapted_projection_does_not_increase_objective(seed):
    """Projecting a path-wise density onto the tree cannot raise the dual
    objective ``E sum_t (V_t*(q_t) - c_t q_t)`` for adapted ``c``."""
    rng = np.random.default_rng(seed)
    m, loss, c = random_pwl_instance(rng, max_T=3, max_nodes=15)
    tree = m.tree
    if rng.random() < 0.5:
        loss = LossSpec.broadcast(PiecewiseConvex.exponential(1.0), tree.T)
    raw = np.zeros((len(tree.leaves), tree.T + 1))
    base = rng.uniform(0.1, 1.0, size=tree.n)
    for k, leaf in enumerate(tree.leaves):
        for n in tree.path(int(leaf)):
            raw[k, tree.t[n]] = base[n] * rng.uniform(0.5, 1.5)
    raw = np.clip(raw, 0.0, 1.0)  # inside dom V* for both loss families
    path_obj = 0.0
    for k, leaf in enumerate(tree.leaves):
        for n in tree.path(int(leaf)):
            t = int(tree.t[n])
            path_obj += tree.prob[leaf] * (loss.per_time[t].conjugate()(raw[k, t]) - c[n] * raw[k, t])
    qa = adapted_projection(tree, raw).scalar
    node_obj = sum(tree.prob[n] * (loss.at(tree, n).conjugate()(qa[n]) - c[n] * qa[n])
                   for n in range(tree.n))
    assert node_obj <= path_obj + 1e-10
