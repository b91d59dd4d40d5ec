import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from illiq.dual import solve_dual, support_C
from illiq.kernel import PiecewiseConvex
from illiq.market import LossSpec, MarketModel, trading_cost
from illiq.models import bin1, call_claim, martingale_prices, random_pwl_instance, random_pwl_loss, trinomial
from illiq.primal import phi, unit_premium
from illiq.tree import PortfolioProcess, random_tree
from illiq.valuation import (
    accounting_value,
    arbitrage_bounds,
    dual_valuation_bound,
    golden_minimize,
    indifference_swap_rate,
    inf_phi_negative,
    leftmost_crossing,
    support_A,
    support_B,
)

INF = math.inf

# Trinomial step 1 -> {2, 1, 0.5}, exponential terminal loss, call with strike 1.
# Entropic closed form over the one-parameter family of martingale measures,
# maximized with scipy's bounded scalar search:
#   sup_Q {E^Q c - H(Q|P)} - sup_Q {-H(Q|P)} = 0.2300927122...
TRINOMIAL_RATE = 0.23009271222524702
#   sup_Q {E^Q c - H(Q|P)} alone (reference level 0) = 0.1926959472...
TRINOMIAL_LEVEL0 = 0.1926959472786603


def _indicator_bin1():
    m = bin1()
    return m, LossSpec.indicator(1), call_claim(m)


def _entropic_trinomial():
    m = trinomial()
    return m, LossSpec.terminal(PiecewiseConvex.exponential(1.0), 1), call_claim(m)


# ---------------------------------------------------------------------------
# one-dimensional search helpers


def test_golden_minimize():
    x, f = golden_minimize(lambda a: (a - 1.3) ** 2, -5.0, 5.0, 1e-12)
    assert x == pytest.approx(1.3, abs=1e-6)
    assert f <= 1e-12


def test_leftmost_crossing_expands_bracket():
    a, status, _, _ = leftmost_crossing(lambda v: v * v - 1.0, 0.0, -0.5, 0.5)
    assert status == "optimal"
    assert a == pytest.approx(-1.0, abs=1e-8)


def test_leftmost_crossing_statuses():
    assert leftmost_crossing(lambda v: -1.0, 0.0, 1.0, 2.0, max_expansions=20)[1] == "unbounded"
    assert leftmost_crossing(lambda v: 1.0, 0.0, 1.0, 2.0, max_expansions=20)[1] == "no_bracket"


# ---------------------------------------------------------------------------
# accounting values


@pytest.mark.parametrize("method", ["program", "bisection"])
def test_accounting_value_superhedging_cost(method):
    m, L, c = _indicator_bin1()
    short = accounting_value(m, L, c, method=method)
    long = accounting_value(m, L, c, side="long", method=method)
    assert short.value == pytest.approx(1 / 3, abs=1e-8)
    assert long.value == pytest.approx(1 / 3, abs=1e-8)
    assert short.bounds == pytest.approx((1 / 3, 1 / 3), abs=1e-10)


def test_accounting_value_zero_claim():
    m, L, _ = _indicator_bin1()
    assert accounting_value(m, L, np.zeros(3)).value == pytest.approx(0.0, abs=1e-12)


def test_accounting_value_bad_side():
    m, L, c = _indicator_bin1()
    with pytest.raises(ValueError):
        accounting_value(m, L, c, side="middle")


def test_accounting_methods_agree(rng):
    for _ in range(5):
        m, loss, c = random_pwl_instance(rng, max_T=2, max_nodes=10)
        a = accounting_value(m, loss, c).value
        b = accounting_value(m, loss, c, method="bisection").value
        assert a == pytest.approx(b, abs=1e-7)


@settings(max_examples=15)
@given(seed=st.integers(0, 10_000), beta=st.floats(-2.0, 2.0))
def test_translation_property(seed, beta):
    rng = np.random.default_rng(seed)
    m, loss, c = random_pwl_instance(rng, max_T=2, max_nodes=10)
    p0 = unit_premium(m.tree)
    a = accounting_value(m, loss, c).value
    b = accounting_value(m, loss, c + beta * p0).value
    assert b == pytest.approx(a + beta, abs=1e-6)


def test_ordering_chain(rng):
    for _ in range(10):
        m, loss, c = random_pwl_instance(rng, max_T=3, max_nodes=15)
        assert accounting_value(m, loss, np.zeros(m.tree.n)).value == pytest.approx(0.0, abs=1e-9)
        short = accounting_value(m, loss, c)
        long = accounting_value(m, loss, c, side="long").value
        lo, hi = short.bounds
        assert lo - 1e-6 <= long <= short.value + 1e-6
        assert short.value <= hi + 1e-6


def test_replicable_claims_collapse_chain(rng):
    for _ in range(4):
        tree = random_tree(rng, max_T=3, max_nodes=15)
        m = MarketModel.linear_prices(tree, martingale_prices(tree, rng, 2))
        x = rng.normal(size=(tree.n, 3))
        x[[tree.is_leaf(n) for n in range(tree.n)]] = 0.0
        beta = float(rng.normal())
        c = -trading_cost(m, PortfolioProcess(tree, x)).scalar
        c[0] += beta
        loss = LossSpec([random_pwl_loss(rng) for _ in range(tree.T + 1)])
        short = accounting_value(m, loss, c)
        long = accounting_value(m, loss, c, side="long").value
        for v in (*short.bounds, short.value, long):
            assert v == pytest.approx(beta, abs=1e-8)


# ---------------------------------------------------------------------------
# indifference swap rates


def test_swap_rate_replicable_is_loss_independent(rng):
    m, _, c = _indicator_bin1()
    p0 = unit_premium(m.tree)
    cases = [
        (LossSpec.indicator(1), np.zeros(3)),
        (LossSpec.terminal(PiecewiseConvex.exponential(1.0), 1), rng.normal(scale=0.3, size=3)),
        (LossSpec([random_pwl_loss(rng), random_pwl_loss(rng)]), rng.normal(scale=0.3, size=3)),
    ]
    for loss, cbar in cases:
        r = indifference_swap_rate(m, loss, cbar, p0, c)
        assert r.value == pytest.approx(1 / 3, abs=1e-7)


def test_swap_rate_zero_claim():
    m, L, _ = _entropic_trinomial()
    p0 = unit_premium(m.tree)
    r = indifference_swap_rate(m, L, np.zeros(4), p0, np.zeros(4))
    assert r.value == pytest.approx(0.0, abs=1e-7)


@pytest.mark.parametrize("method", ["program", "bisection"])
def test_swap_rate_trinomial(method):
    m, L, c = _entropic_trinomial()
    p0 = unit_premium(m.tree)
    r = indifference_swap_rate(m, L, np.zeros(4), p0, c, method=method)
    lo, hi = arbitrage_bounds(m, c, p0)
    assert lo + 1e-3 < r.value < hi - 1e-3
    assert r.value == pytest.approx(TRINOMIAL_RATE, abs=1e-6)


def test_swap_rate_reference_not_finite():
    m, L, c = _indicator_bin1()
    p0 = unit_premium(m.tree)
    cbar = np.array([0.0, 5.0, 5.0])  # unhedgeable under the indicator loss
    r = indifference_swap_rate(m, L, cbar, p0, c)
    assert r.status == "reference_not_finite"


def test_swap_rate_premium_in_recession_cone():
    m, L, c = _indicator_bin1()
    r = indifference_swap_rate(m, L, np.zeros(3), -unit_premium(m.tree), c)
    assert r.value == -INF
    assert r.status == "premium_in_recession_cone"


# ---------------------------------------------------------------------------
# support functions and dual bounds


def test_support_B_indicator():
    m, L, _ = _indicator_bin1()
    assert support_B(m, L, [1.0, 0.5, 2.0]) == pytest.approx(0.0, abs=1e-12)
    assert support_B(m, L, [1.0, -1.0, 2.0]) == INF


def test_support_B_entropic_at_one():
    m = bin1()
    loss = LossSpec.broadcast(PiecewiseConvex.exponential(1.0), 1)
    val, direct = support_B(m, loss, np.ones(3), cross_check=True)
    assert val == pytest.approx(0.0, abs=1e-9)
    assert direct == pytest.approx(0.0, abs=1e-6)


def test_support_B_cross_check(rng):
    for _ in range(6):
        m, loss, _ = random_pwl_instance(rng, max_T=2, max_nodes=10)
        q = rng.uniform(0.0, 5.0, size=m.tree.n)
        val, direct = support_B(m, loss, q, cross_check=True)
        assert val == pytest.approx(direct, abs=1e-6)


def test_support_A_decomposition(rng):
    checked = 0
    for _ in range(8):
        m, loss, _ = random_pwl_instance(rng, max_T=2, max_nodes=10)
        assert inf_phi_negative(m, loss)
        q1 = solve_dual(m, loss, rng.normal(size=m.tree.n)).q
        q2 = solve_dual(m, loss, rng.normal(size=m.tree.n)).q
        lam = rng.uniform()
        q = rng.uniform(0.3, 5.0) * (lam * q1 + (1 - lam) * q2)
        sa = support_A(m, loss, q)
        sb = support_B(m, loss, q)
        sc = support_C(m, q)[0]
        assert math.isfinite(sc)
        assert sa == pytest.approx(sb + sc, abs=1e-6)
        checked += 1
    assert checked == 8


def test_dual_bound_bin1():
    m, L, c = _indicator_bin1()
    b = dual_valuation_bound(m, L, c)
    assert b.status == "optimal"
    assert b.value == pytest.approx(1 / 3, abs=1e-9)
    assert np.allclose(b.q, [1.0, 2 / 3, 4 / 3], atol=1e-9)


def test_dual_bound_condition_failed():
    m, L, c = _indicator_bin1()
    b = dual_valuation_bound(m, L, c, p=-unit_premium(m.tree))
    assert b.status == "condition_failed"
    assert b.value == INF


def test_dual_bound_trinomial():
    m, L, c = _entropic_trinomial()
    p0 = unit_premium(m.tree)
    assert dual_valuation_bound(m, L, c).value == pytest.approx(TRINOMIAL_LEVEL0, abs=1e-6)
    rate = indifference_swap_rate(m, L, np.zeros(4), p0, c).value
    bound = dual_valuation_bound(m, L, c, cbar=np.zeros(4)).value
    assert bound == pytest.approx(rate, abs=1e-5)


def test_dual_bound_matches_accounting_value(rng):
    for _ in range(6):
        m, loss, c = random_pwl_instance(rng, max_T=2, max_nodes=10)
        for side in ("short", "long"):
            primal = accounting_value(m, loss, c, side=side).value
            dual = dual_valuation_bound(m, loss, c, side=side).value
            assert dual == pytest.approx(primal, abs=1e-5)


def test_properness_matches_normalizable_density():
    # finite value exactly when some q in dom sigma_C has <p, q> = 1
    m, L, c = _indicator_bin1()
    p0 = unit_premium(m.tree)
    assert math.isfinite(accounting_value(m, L, c).value)
    assert support_C(m, [1.0, 2 / 3, 4 / 3])[0] < INF
    # -p0 would need q_0 = -1, outside dom sigma_C; the value degenerates
    assert support_C(m, [-1.0, -2 / 3, -4 / 3])[0] == INF
    assert indifference_swap_rate(m, L, np.zeros(3), -p0, c).value == -INF
    assert phi(m, L, np.zeros(3)) == 0.0
