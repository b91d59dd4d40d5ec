"""Accounting values, indifference swap rates, arbitrage bounds and their
dual representations.

Values are infima of a real parameter over a sublevel set of the optimum
value function.  Since ``(x, alpha) -> E V(S(dx) + c - alpha p)`` is jointly
convex, the default method solves one convex program in ``(x, alpha)``.  The
``"bisection"`` method instead locates the leftmost level crossing of the
one-dimensional convex map ``alpha -> phi(c - alpha p)``; both are kept so
they can be checked against each other.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from ._program import Program
from .config import Tolerances, default_tolerances
from .market import LossSpec, MarketModel
from .primal import _hedging_block, claim_array, recession_membership, solve_alm, superhedge, unit_premium

INF = math.inf
GOLDEN = (math.sqrt(5.0) - 1.0) / 2.0


@dataclass
class ValuationResult:
    value: float
    side: str
    bracket: tuple = (-INF, INF)
    bounds: tuple = (-INF, INF)
    dual_bound: float = math.nan
    status: str = "optimal"
    details: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {"value": self.value, "side": self.side, "bracket": list(self.bracket),
                "bounds": {"inf": self.bounds[0], "sup": self.bounds[1]},
                "dual_bound": self.dual_bound, "status": self.status, "details": dict(self.details)}


# ---------------------------------------------------------------------------
# one-dimensional convex search


def golden_minimize(g, lo: float, hi: float, tol: float = 1e-9, max_iter: int = 400):
    """Minimize a convex ``g`` on ``[lo, hi]``; returns ``(argmin, min)``."""
    a, b = lo, hi
    x1 = b - GOLDEN * (b - a)
    x2 = a + GOLDEN * (b - a)
    f1, f2 = g(x1), g(x2)
    for _ in range(max_iter):
        if b - a <= tol * max(1.0, abs(a), abs(b)):
            break
        if f1 <= f2:
            b, x2, f2 = x2, x1, f1
            x1 = b - GOLDEN * (b - a)
            f1 = g(x1)
        else:
            a, x1, f1 = x1, x2, f2
            x2 = a + GOLDEN * (b - a)
            f2 = g(x2)
    cands = [(f1, x1), (f2, x2), (g(a), a), (g(b), b)]
    f, x = min(cands)
    return x, f


def leftmost_crossing(g, level: float, lo: float, hi: float, tol: float = 1e-9,
                      max_expansions: int = 200):
    """Smallest ``alpha`` with ``g(alpha) <= level`` for convex nonincreasing-
    then-nondecreasing ``g``.  Returns ``(alpha, status, (lo, hi), samples)``."""
    samples = []

    def G(a):
        v = g(a)
        samples.append((a, v))
        return v

    step = max(1.0, hi - lo)
    n = 0
    while G(hi) > level:
        n += 1
        if n > max_expansions:
            return math.nan, "no_bracket", (lo, hi), samples
        # the crossing may lie right of hi, or hi may sit past the minimizer
        lo, hi = hi, hi + step
        step *= 2.0
        if not math.isfinite(hi):
            return INF, "infeasible", (lo, hi), samples
    step = max(1.0, hi - lo)
    n = 0
    while G(lo) <= level:
        n += 1
        if n > max_expansions:
            return -INF, "unbounded", (lo, hi), samples
        hi, lo = lo, lo - step
        step *= 2.0
    while hi - lo > tol * max(1.0, abs(lo), abs(hi)):
        mid = 0.5 * (lo + hi)
        if G(mid) <= level:
            hi = mid
        else:
            lo = mid
    return hi, "optimal", (lo, hi), samples


# ---------------------------------------------------------------------------
# joint level programs


def _min_alpha(model, loss, base, p, level, tol):
    """``inf {alpha | exists x: E V(S(dx) + base - alpha p) <= level}``."""
    tree = model.tree
    prog = Program(tol)
    alpha = prog.var(1, cost=1.0)[0]
    hb = _hedging_block(prog, model)
    vs = []
    for n in range(tree.n):
        v = prog.var(1)[0]
        idx = list(hb.u[n]) + [alpha]
        coef = [1.0] * model.J + [-float(p[n])]
        prog.epigraph(loss.at(tree, n), idx, coef, float(base[n]), v)
        vs.append(v)
    prog.le(vs, list(tree.prob), float(level))
    res = prog.solve()
    if res.status in ("optimal", "cut_limit"):
        return float(res.z[alpha]), "optimal"
    if res.status == "unbounded":
        return -INF, "unbounded"
    if res.status == "infeasible":
        return INF, "infeasible"
    return math.nan, res.status


def arbitrage_bounds(model: MarketModel, c, p=None, recession: bool = False,
                     tol: Tolerances | None = None) -> tuple[float, float]:
    """``(pi_inf, pi_sup)``: sub- and superhedging cost in units of ``p``."""
    lo = superhedge(model, c, p, side="inf", recession=recession, tol=tol).value
    hi = superhedge(model, c, p, side="sup", recession=recession, tol=tol).value
    return lo, hi


def accounting_value(model: MarketModel, loss: LossSpec, c=None, side: str = "short",
                     method: str = "program", tol: Tolerances | None = None) -> ValuationResult:
    """Least initial capital making ``c`` acceptable (short side), or the
    mirrored long value ``-pi_s(-c)``."""
    if side not in ("short", "long"):
        raise ValueError("side must be 'short' or 'long'")
    tol = tol or default_tolerances()
    cv = claim_array(model, c)
    p0 = unit_premium(model.tree)
    bounds = arbitrage_bounds(model, cv, p0, tol=tol)
    sgn = 1.0 if side == "short" else -1.0
    base = sgn * cv
    bl, bh = (bounds if side == "short" else (-bounds[1], -bounds[0]))
    if method == "program":
        val, status = _min_alpha(model, loss, base, p0, 0.0, tol)
        bracket = (bl, bh)
    elif method == "bisection":
        val, status, bracket, samples = _crossing(model, loss, base, p0, 0.0, bl, bh, tol)
    else:
        raise ValueError(f"unknown method {method!r}")
    val = sgn * val
    return ValuationResult(val, side, bracket, bounds, status=status)


def _crossing(model, loss, base, p, level, bl, bh, tol):
    def g(a):
        return solve_alm(model, loss, base - a * p, tol).value

    lo = bl if math.isfinite(bl) else (bh - 1.0 if math.isfinite(bh) else -1.0)
    hi = bh if math.isfinite(bh) else lo + 1.0
    if hi <= lo:
        lo, hi = hi - 1e-6, hi
    return leftmost_crossing(g, level, lo, hi, tol.bisection, tol.max_expansions)


def indifference_swap_rate(model: MarketModel, loss: LossSpec, cbar, p, c, side: str = "short",
                           method: str = "program", tol: Tolerances | None = None) -> ValuationResult:
    """Least rate ``alpha`` at which swapping ``c`` against ``alpha p`` leaves
    the optimum value at ``c_bar`` unchanged or better (short side); the long
    side is ``sup {alpha | phi(c_bar - c + alpha p) <= phi(c_bar)}``."""
    if side not in ("short", "long"):
        raise ValueError("side must be 'short' or 'long'")
    tol = tol or default_tolerances()
    cb = claim_array(model, cbar)
    pv = claim_array(model, p)
    cv = claim_array(model, c)
    ref = solve_alm(model, loss, cb, tol)
    if not math.isfinite(ref.value):
        return ValuationResult(math.nan, side, status="reference_not_finite",
                               details={"phi_cbar": ref.value})
    bounds = arbitrage_bounds(model, cv, pv, recession=True, tol=tol)
    sgn = 1.0 if side == "short" else -1.0
    base = cb + sgn * cv
    details = {"phi_cbar": ref.value}
    if method == "program":
        val, status = _min_alpha(model, loss, base, pv, ref.value, tol)
        bracket = bounds if side == "short" else (-bounds[1], -bounds[0])
    else:
        bl, bh = bounds if side == "short" else (-bounds[1], -bounds[0])
        val, status, bracket, _ = _crossing(model, loss, base, pv, ref.value, bl, bh, tol)
    if status == "unbounded":
        if recession_membership(model, pv, tol).member:
            status = "premium_in_recession_cone"
    return ValuationResult(sgn * val, side, bracket, bounds, status=status, details=details)


# ---------------------------------------------------------------------------
# support functions of the acceptance sets


def _phi_or_zero(model, loss, cbar, tol):
    if cbar is None:
        return None, 0.0
    cb = claim_array(model, cbar)
    return cb, solve_alm(model, loss, cb, tol).value


def support_B(model: MarketModel, loss: LossSpec, q, cbar=None, tol: Tolerances | None = None,
              cross_check: bool = False):
    """``inf_{a>0} a [E V*(q/a) + phi(c_bar)] - <c_bar, q>`` (``c_bar = 0``
    and ``phi = 0`` by default).  With ``cross_check`` also returns the value
    of ``sup {<c, q> | E V(c_bar + c) <= phi(c_bar)}``."""
    tol = tol or default_tolerances()
    tree = model.tree
    qv = claim_array(model, q)
    if np.any(qv < 0):
        return (INF, INF) if cross_check else INF
    cb, level = _phi_or_zero(model, loss, cbar, tol)
    pair = 0.0 if cb is None else float(tree.prob @ (cb * qv))
    if not math.isfinite(level):
        raise ValueError("phi(c_bar) must be finite")

    def h(a):
        return a * loss.expected_conjugate(tree, qv / a) - pair + a * level

    def hlog(s):
        return h(math.exp(s))

    # alpha -> 0 limit: recession of E V* at q
    rec = 0.0
    for n in range(tree.n):
        r = loss.at(tree, n).conjugate().recession()(float(qv[n]))
        rec += tree.prob[n] * r if r != 0.0 else 0.0
    rec -= pair
    s, val = golden_minimize(hlog, -40.0, 40.0, tol.golden)
    val = min(val, rec) if not math.isnan(rec) else val
    if not cross_check:
        return val
    return val, _support_B_direct(model, loss, qv, cb, level, tol)


def _support_B_direct(model, loss, qv, cb, level, tol):
    tree = model.tree
    prog = Program(tol)
    cvar = prog.var(tree.n, cost=0.0)
    vs = []
    for n in range(tree.n):
        prog.set_cost(cvar[n], -float(tree.prob[n] * qv[n]))
        v = prog.var(1)[0]
        prog.epigraph(loss.at(tree, n), [cvar[n]], [1.0], 0.0 if cb is None else float(cb[n]), v)
        vs.append(v)
    prog.le(vs, list(tree.prob), float(level))
    res = prog.solve()
    if res.status in ("optimal", "cut_limit"):
        return -res.objective
    if res.status == "unbounded":
        return INF
    if res.status == "infeasible":
        return -INF
    return math.nan


def support_A(model: MarketModel, loss: LossSpec, q, cbar=None, tol: Tolerances | None = None) -> float:
    """``sup {<c, q> | phi(c_bar + c) <= phi(c_bar)}`` by a joint program in
    ``(c, x)``."""
    tol = tol or default_tolerances()
    tree = model.tree
    qv = claim_array(model, q)
    cb, level = _phi_or_zero(model, loss, cbar, tol)
    base = np.zeros(tree.n) if cb is None else cb
    prog = Program(tol)
    cvar = prog.var(tree.n)
    hb = _hedging_block(prog, model)
    vs = []
    for n in range(tree.n):
        prog.set_cost(cvar[n], -float(tree.prob[n] * qv[n]))
        v = prog.var(1)[0]
        idx = list(hb.u[n]) + [cvar[n]]
        prog.epigraph(loss.at(tree, n), idx, [1.0] * len(idx), float(base[n]), v)
        vs.append(v)
    prog.le(vs, list(tree.prob), float(level))
    res = prog.solve()
    if res.status in ("optimal", "cut_limit"):
        return -res.objective
    if res.status == "unbounded":
        return INF
    if res.status == "infeasible":
        return -INF
    return math.nan


def inf_phi_negative(model: MarketModel, loss: LossSpec, cbar=None, eps: float = 1e-3,
                     tol: Tolerances | None = None) -> bool:
    """Probe ``phi(c_bar - eps p0) < phi(c_bar)`` (``c_bar = 0``: ``< 0``)."""
    tree = model.tree
    cb, level = _phi_or_zero(model, loss, cbar, tol)
    base = np.zeros(tree.n) if cb is None else cb
    return solve_alm(model, loss, base - eps * unit_premium(tree), tol).value < level


@dataclass
class DualBound:
    value: float
    q: np.ndarray | None
    status: str

    def to_dict(self) -> dict:
        return {"value": self.value, "status": self.status,
                "q": None if self.q is None else self.q.tolist()}


def dual_valuation_bound(model: MarketModel, loss: LossSpec, c, p=None, cbar=None,
                         side: str = "short", tol: Tolerances | None = None) -> DualBound:
    """``sup_q {<c, q> - sigma_B(q) - sigma_C(q) | <p, q> = 1}`` as one convex
    program over ``(q, alpha, w, mu)``; the long side mirrors via ``-c``."""
    tol = tol or default_tolerances()
    tree = model.tree
    pv = unit_premium(tree) if p is None else claim_array(model, p)
    if recession_membership(model, pv, tol).member:
        return DualBound(INF if side == "short" else -INF, None, "condition_failed")
    sgn = 1.0 if side == "short" else -1.0
    cv = sgn * claim_array(model, c)
    cb, level = _phi_or_zero(model, loss, cbar, tol)
    J = model.J
    prog = Program(tol)
    qv = prog.var(tree.n)
    alpha = prog.var(1, lo=0.0, cost=float(level))[0]
    for n in range(tree.n):
        P = float(tree.prob[n])
        shift = 0.0 if cb is None else float(cb[n])
        prog.set_cost(qv[n], -P * (cv[n] + shift))
        e = prog.var(1, cost=P)[0]
        prog.perspective(loss.at(tree, n).conjugate(), [qv[n]], [1.0], alpha, e)
    wv = [prog.var(J) for _ in range(tree.n)]
    for n in range(tree.n):
        P = float(tree.prob[n])
        for j, f in enumerate(model.costs[n]):
            t = prog.var(1, cost=P)[0]
            prog.perspective(f.conjugate(), [wv[n][j]], [1.0], qv[n], t)
            if model.theta[n, j] != 0.0:
                prog.set_cost(wv[n][j], -P * model.theta[n, j])
    for n in tree.inner_nodes:
        ch = tree.children[n]
        m = model.A[n].shape[0]
        mu = prog.var(m, lo=0.0) if m else np.zeros(0, dtype=int)
        for k in range(m):
            prog.set_cost(mu[k], float(tree.prob[n] * model.b[n][k]))
        for j in range(J):
            idx = [wv[ci][j] for ci in ch] + [wv[n][j]] + list(mu)
            coef = list(tree.cond[ch]) + [-1.0] + [-model.A[n][k, j] for k in range(m)]
            prog.eq(idx, coef, 0.0)
    for n in range(tree.n):
        prog.le([qv[n]], [-1.0], 0.0)
    prog.eq(qv, list(tree.prob * pv), 1.0)
    res = prog.solve()
    if res.status in ("optimal", "cut_limit"):
        return DualBound(sgn * -res.objective, res.z[qv], "optimal")
    if res.status == "unbounded":
        return DualBound(sgn * INF, None, "unbounded")
    if res.status == "infeasible":
        return DualBound(-sgn * INF, None, "infeasible")
    return DualBound(math.nan, None, res.status)


__all__ = [
    "DualBound", "ValuationResult", "accounting_value", "arbitrage_bounds", "dual_valuation_bound",
    "golden_minimize", "indifference_swap_rate", "inf_phi_negative", "leftmost_crossing",
    "support_A", "support_B",
]
