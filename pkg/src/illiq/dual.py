"""Conjugates of the optimum value, dual certificates, and shadow prices.

A dual pair ``(q, w)`` is a scalar node process ``q >= 0`` (stochastic
discount factor) and a J-vector node process ``w``; its objective splits
into

* ``E V*(q)``                          (risk preferences),
* ``E sum_t (q_t S_t)^*(w_t)``         (trading costs),
* ``E sum_t sigma_{D_t}(E_t dw_{t+1})``  (portfolio constraints),

and the dual value is ``<c, q> - (sum of the three terms)``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import nnls

from ._program import Program
from .config import Tolerances, default_tolerances
from .kernel import Interval, PiecewiseConvex, scale_epi, scaled_conjugate
from .lp import LinearProgram, solve_lp
from .market import LossSpec, MarketModel
from .primal import claim_array, solve_alm
from .tree import ClaimProcess, PortfolioProcess

INF = math.inf


def _arr(model: MarketModel, q) -> np.ndarray:
    return claim_array(model, q)


def _inner_drift(model: MarketModel, w: np.ndarray, n: int) -> np.ndarray:
    """``E_n[w_{t+1}] - w_n`` at an inner node."""
    tree = model.tree
    ch = tree.children[n]
    return tree.cond[ch] @ w[ch] - w[n]


def support_D_robust(model: MarketModel, n: int, v: np.ndarray, tol: float) -> tuple[float, float]:
    """``(sigma_D(v), residual)``; ``v`` is first projected onto the barrier
    cone of ``D`` and the projection distance reported as residual.
    Returns ``+inf`` when the residual exceeds ``tol``."""
    tree = model.tree
    if tree.is_leaf(n):
        return 0.0, 0.0
    if not model.constrained(n):
        r = float(np.max(np.abs(v), initial=0.0))
        return (0.0 if r <= tol else INF), r
    A, b = model.A[n], model.b[n]
    mu, _ = nnls(A.T, v)
    r = float(np.max(np.abs(A.T @ mu - v), initial=0.0))
    if r > tol:
        return INF, r
    vp = A.T @ mu
    sol = solve_lp(LinearProgram(b, E=A.T, d=vp, lo=np.zeros(A.shape[0])))
    if sol.status != "optimal":
        return float(b @ mu), r
    return sol.objective, r


def _clip_to(dom: Interval, y: float) -> tuple[float, float]:
    c = min(max(y, dom.lo), dom.hi)
    return c, abs(c - y)


@dataclass
class DualCertificate:
    q: np.ndarray
    w: np.ndarray
    ev_star: float
    cost_term: float
    constraint_term: float
    pairing: float
    value: float
    status: str = "feasible"
    infeasibility: float = 0.0
    primal_value: float = math.nan
    gap: float = math.nan
    mu: list | None = None
    x: np.ndarray | None = None

    @property
    def feasible(self) -> bool:
        return self.status in ("feasible", "optimal")

    def to_dict(self) -> dict:
        return {
            "status": self.status,
            "q": self.q.tolist(),
            "w": self.w.tolist(),
            "decomposition": {
                "expected_conjugate_loss": self.ev_star,
                "trading_cost_term": self.cost_term,
                "constraint_term": self.constraint_term,
            },
            "pairing": self.pairing,
            "value": self.value,
            "primal_value": self.primal_value,
            "gap": self.gap,
            "infeasibility": self.infeasibility,
        }


def evaluate_certificate(model: MarketModel, loss: LossSpec | None, c, q, w,
                         tol: Tolerances | None = None) -> DualCertificate:
    """Objective decomposition of ``(q, w)``.  Entries that miss a domain by
    at most the dual feasibility tolerance are projected and the distance is
    reported as ``infeasibility``; larger misses make the terms infinite."""
    tol = tol or default_tolerances()
    ftol = tol.dual_feasibility
    tree = model.tree
    cv = _arr(model, c)
    q = np.asarray(q, dtype=float).copy()
    w = np.asarray(w, dtype=float).reshape(tree.n, model.J).copy()
    resid = 0.0
    ev = 0.0
    for n in range(tree.n):
        if loss is None:
            dom = Interval(0.0, INF)
            vstar = PiecewiseConvex.indicator_interval(0.0, INF)
        else:
            vstar = loss.at(tree, n).conjugate()
            dom = vstar.domain
        q[n], r = _clip_to(dom, q[n])
        resid = max(resid, r)
        ev += tree.prob[n] * vstar(q[n])
    if loss is None:
        ev = 0.0
    cost = 0.0
    for n in range(tree.n):
        for j, f in enumerate(model.costs[n]):
            g = scaled_conjugate(f, q[n])
            w[n, j], r = _clip_to(g.domain, w[n, j])
            resid = max(resid, r)
            cost += tree.prob[n] * (g(w[n, j]) - model.theta[n, j] * w[n, j])
    con = 0.0
    for n in model.tree.inner_nodes:
        v = _inner_drift(model, w, n)
        s, r = support_D_robust(model, n, v, ftol)
        resid = max(resid, r)
        con += tree.prob[n] * s
    pairing = float(tree.prob @ (cv * q))
    total = ev + cost + con
    value = pairing - total if math.isfinite(total) else -INF
    status = "feasible" if resid <= ftol and math.isfinite(value) else "dual_not_attained"
    return DualCertificate(q, w, ev, cost, con, pairing, value, status, resid)


# ---------------------------------------------------------------------------


def _w_program(model: MarketModel, q: np.ndarray, tol: Tolerances | None):
    """``inf_w E sum[(q_t S_t)^*(w_t) + sigma_D(E_t dw_{t+1})]``."""
    tree = model.tree
    J = model.J
    prog = Program(tol)
    wv = [prog.var(J) for _ in range(tree.n)]
    for n in range(tree.n):
        P = float(tree.prob[n])
        for j, f in enumerate(model.costs[n]):
            g = scaled_conjugate(f, q[n])
            t = prog.var(1, cost=P)[0]
            prog.epigraph(g, [wv[n][j]], [1.0], 0.0, t)
            if model.theta[n, j] != 0.0:
                prog.set_cost(wv[n][j], -P * model.theta[n, j])
    for n in tree.inner_nodes:
        ch = tree.children[n]
        m = model.A[n].shape[0]
        mu = prog.var(m, lo=0.0, cost=0.0) if m else np.zeros(0, dtype=int)
        for k in range(m):
            prog.set_cost(mu[k], float(tree.prob[n] * model.b[n][k]))
        for j in range(J):
            idx = [wv[c][j] for c in ch] + [wv[n][j]] + list(mu)
            coef = list(tree.cond[ch]) + [-1.0] + [-model.A[n][k, j] for k in range(m)]
            prog.eq(idx, coef, 0.0)
    res = prog.solve()
    if res.status in ("optimal", "cut_limit"):
        w = np.array([res.z[idx] for idx in wv])
        return res.objective, w
    if res.status == "infeasible":
        return INF, None
    if res.status == "unbounded":
        return -INF, None
    raise RuntimeError(f"dual weight program ended with status {res.status}")


def support_C(model: MarketModel, q, tol: Tolerances | None = None):
    """Support function of the hedgeable claims at ``q``; ``(value, w)``."""
    qv = _arr(model, q)
    if np.any(qv < 0):
        return INF, None
    return _w_program(model, qv, tol)


def conjugate_phi(model: MarketModel, loss: LossSpec, q, tol: Tolerances | None = None):
    """Conjugate of the optimum value function at ``q``; ``(value, w)``."""
    tree = model.tree
    qv = _arr(model, q)
    ev = loss.expected_conjugate(tree, qv)
    if ev == INF:
        return INF, None
    val, w = _w_program(model, qv, tol)
    return ev + val, w


def solve_dual(model: MarketModel, loss: LossSpec, c=None, tol: Tolerances | None = None,
               primal=None) -> DualCertificate:
    """Dual solution harvested from the primal reduction's multipliers."""
    tol = tol or default_tolerances()
    cv = _arr(model, c)
    sol = primal if primal is not None else solve_alm(model, loss, cv, tol)
    if sol.status != "optimal":
        tree = model.tree
        cert = DualCertificate(np.zeros(tree.n), np.zeros((tree.n, model.J)), INF, INF, INF,
                               0.0, -INF, status="dual_not_attained", infeasibility=INF,
                               primal_value=sol.value)
        return cert
    cert = evaluate_certificate(model, loss, cv, sol.q, sol.w, tol)
    cert.primal_value = sol.value
    cert.gap = abs(sol.value - cert.value) if math.isfinite(cert.value) else INF
    cert.mu = sol.mu
    cert.x = sol.x.values
    if cert.status == "feasible" and cert.gap <= tol.dual_feasibility:
        cert.status = "optimal"
    return cert


def solve_dual_direct(model: MarketModel, loss: LossSpec, c=None, tol: Tolerances | None = None):
    """Joint convex minimization over ``(q, w)`` (cross-check of
    :func:`solve_dual`).  Returns ``(dual value, q, w)``."""
    tree = model.tree
    J = model.J
    cv = _arr(model, c)
    prog = Program(tol)
    qv = prog.var(tree.n)
    wv = [prog.var(J) for _ in range(tree.n)]
    for n in range(tree.n):
        P = float(tree.prob[n])
        e = prog.var(1, cost=P)[0]
        prog.epigraph(loss.at(tree, n).conjugate(), [qv[n]], [1.0], 0.0, e)
        prog.set_cost(qv[n], -P * cv[n])
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
            idx = [wv[c][j] for c in ch] + [wv[n][j]] + list(mu)
            coef = list(tree.cond[ch]) + [-1.0] + [-model.A[n][k, j] for k in range(m)]
            prog.eq(idx, coef, 0.0)
    for n in range(tree.n):
        prog.le([qv[n]], [-1.0], 0.0)
    res = prog.solve()
    if res.status in ("optimal", "cut_limit"):
        return -res.objective, res.z[qv], np.array([res.z[i] for i in wv])
    if res.status == "unbounded":
        return INF, None, None
    return -INF, None, None


# ---------------------------------------------------------------------------


def near_subdifferential(f: PiecewiseConvex, y: float, delta: float = 0.0) -> Interval:
    """Union of the subdifferentials of ``f`` over ``[y - delta, y + delta]``
    intersected with the domain (an interval by monotonicity)."""
    dom = f.domain
    a = min(max(y - delta, dom.lo), dom.hi)
    b = max(min(y + delta, dom.hi), dom.lo)
    return Interval(f.subdifferential(a).lo, f.subdifferential(b).hi)


def scaled_subdifferential(f: PiecewiseConvex, q: float, y: float, delta: float = 0.0) -> Interval:
    """Subdifferential of the epi-multiple ``(q f)`` at ``y``; for ``q = 0`` the
    normal cone of the closed domain."""
    dom = f.domain
    if q > 0:
        return near_subdifferential(f, y, delta).scaled(q)
    lo = -INF if y <= dom.lo + delta else 0.0
    hi = INF if y >= dom.hi - delta else 0.0
    return Interval(lo, hi)


def _fy_excess(f: PiecewiseConvex, y: float, v: float, eps: float) -> float:
    """Fenchel-Young gap at ``(y, v)`` beyond ``eps * max(1, |f(y)|)``."""
    fy = f(y)
    gap = fy + f.conjugate()(v) - y * v
    if math.isnan(gap):
        return INF
    return max(0.0, gap - eps * max(1.0, abs(fy)))


@dataclass
class NodeCheck:
    node: object
    normal_cone: float
    loss_subgradient: float
    cost_subgradient: float
    feasibility: float

    def passed(self, tol: float) -> bool:
        return max(self.normal_cone, self.loss_subgradient, self.cost_subgradient,
                   self.feasibility) <= tol

    def to_dict(self) -> dict:
        return {"node": self.node, "normal_cone": self.normal_cone,
                "loss_subgradient": self.loss_subgradient,
                "cost_subgradient": self.cost_subgradient, "feasibility": self.feasibility}


@dataclass
class OptimalityReport:
    nodes: list
    tol: float
    passed: bool = field(init=False)

    def __post_init__(self):
        self.passed = all(n.passed(self.tol) for n in self.nodes)

    @property
    def max_residual(self) -> float:
        return max((max(n.normal_cone, n.loss_subgradient, n.cost_subgradient, n.feasibility)
                    for n in self.nodes), default=0.0)

    def to_dict(self) -> dict:
        return {"passed": self.passed, "tol": self.tol, "max_residual": self.max_residual,
                "nodes": [n.to_dict() for n in self.nodes]}


def check_optimality(model: MarketModel, loss: LossSpec, c, x, cert: DualCertificate,
                     tol: Tolerances | None = None) -> OptimalityReport:
    """Node-wise residuals of the three optimality inclusions.

    * ``E_t dw_{t+1}`` lies in the normal cone of ``D_t`` at ``x_t``;
    * ``q_t`` lies in the subdifferential of ``V_t`` at ``S_t(dx_t) + c_t``;
    * ``w_t`` lies in the subdifferential of ``(q_t S_t)`` at ``dx_t``.

    Arguments within the check tolerance of a kink see the subgradients on
    both sides, so solutions reported by the LP pass despite rounding.
    Smooth functions are handled by outer linearization, whose multipliers
    are averages of cut slopes; for them the test is the Fenchel-Young gap
    ``f(y) + f*(v) - y v`` against the cut tolerance (an epsilon-subgradient).
    """
    tol = tol or default_tolerances()
    ctol = tol.optimality_check
    tree = model.tree
    cv = _arr(model, c)
    xv = x.values if isinstance(x, ClaimProcess) else np.asarray(x, dtype=float)
    xv = xv.reshape(tree.n, model.J)
    q = np.asarray(cert.q, dtype=float)
    w = np.asarray(cert.w, dtype=float).reshape(tree.n, model.J)
    if q.shape[0] != tree.n:
        raise ValueError("dimension mismatch between certificate and tree")
    dx = model.delta(xv)
    cut_eps = tol.cut_tol
    out = []
    for n in range(tree.n):
        feas = 0.0
        if tree.is_leaf(n):
            feas = float(np.max(np.abs(xv[n]), initial=0.0))
        elif model.constrained(n):
            feas = float(np.max(model.A[n] @ xv[n] - model.b[n], initial=0.0))
        y = dx[n] + model.theta[n]
        s_total = 0.0
        cost_res = 0.0
        for j, f in enumerate(model.costs[n]):
            val = f(float(y[j]))
            if val == INF:
                feas = INF
                cost_res = INF
                continue
            s_total += val
            if f.is_pwl:
                sub = scaled_subdifferential(f, q[n], float(y[j]), ctol)
                cost_res = max(cost_res, sub.distance(w[n, j]))
            else:
                g = scale_epi(f, q[n]) if q[n] > 0 else f.recession()
                cost_res = max(cost_res, _fy_excess(g, float(y[j]), float(w[n, j]), cut_eps))
        if math.isfinite(s_total):
            V = loss.at(tree, n)
            arg = s_total + cv[n]
            if not V.is_pwl and V.domain.contains(arg, ctol):
                loss_res = _fy_excess(V, arg, float(q[n]), cut_eps)
            elif V.domain.contains(arg, ctol):
                loss_res = near_subdifferential(V, arg, ctol).distance(q[n])
            else:
                loss_res = INF
                feas = INF
        else:
            loss_res = INF
        nc = 0.0
        if not tree.is_leaf(n):
            v = _inner_drift(model, w, n)
            sig, r = support_D_robust(model, n, v, ctol)
            nc = max(r, sig - float(v @ xv[n])) if math.isfinite(sig) else INF
        out.append(NodeCheck(tree.ids[n], nc, loss_res, cost_res, feas))
    return OptimalityReport(out, ctol)


# ---------------------------------------------------------------------------


@dataclass
class ShadowPrices:
    prices: np.ndarray          # NaN where q = 0
    defined: np.ndarray         # bool per node
    within_spread: np.ndarray   # bool per node (True where undefined)
    complementarity: np.ndarray  # residual per node
    drift: np.ndarray           # E_t[w_{t+1}] - w_t per inner node (0 at leaves)
    drift_kind: list            # per node: "martingale" / "supermartingale" / "violated" / "leaf"
    polar_residual: np.ndarray  # distance of the drift from the barrier cone of D

    def to_dict(self, tree=None) -> dict:
        ids = list(tree.ids) if tree is not None else list(range(len(self.defined)))
        return {
            "nodes": [
                {
                    "node": ids[n],
                    "price": None if not self.defined[n] else self.prices[n].tolist(),
                    "status": "defined" if self.defined[n] else "undefined",
                    "within_spread": bool(self.within_spread[n]),
                    "complementarity": float(self.complementarity[n]),
                    "drift": self.drift[n].tolist(),
                    "drift_kind": self.drift_kind[n],
                }
                for n in range(len(self.defined))
            ]
        }


def shadow_prices(model: MarketModel, cert: DualCertificate, x, tol: Tolerances | None = None) -> ShadowPrices:
    """``s = w / q`` where ``q > 0`` with consistency flags."""
    tol = tol or default_tolerances()
    ctol = tol.optimality_check
    tree = model.tree
    q = np.asarray(cert.q, dtype=float)
    w = np.asarray(cert.w, dtype=float).reshape(tree.n, model.J)
    if not np.any(q > 0):
        raise ValueError("degenerate dual")
    xv = x.values if isinstance(x, ClaimProcess) else np.asarray(x, dtype=float)
    dx = model.delta(xv.reshape(tree.n, model.J))
    prices = np.full((tree.n, model.J), np.nan)
    defined = q > 0
    within = np.ones(tree.n, dtype=bool)
    comp = np.zeros(tree.n)
    for n in range(tree.n):
        if not defined[n]:
            continue
        s = w[n] / q[n]
        prices[n] = s
        for j, f in enumerate(model.costs[n]):
            dom = f.conjugate().domain
            scale = max(1.0, abs(s[j]))
            if not dom.contains(s[j], 1e-9 * scale):
                within[n] = False
            d = float(dx[n, j] + model.theta[n, j])
            if f.is_pwl and f.bps.shape[0] <= 1:
                # sublinear piece: dx must lie in the normal cone of dom S* at s
                hi_gap = (dom.hi - s[j]) if math.isfinite(dom.hi) else (0.0 if d <= 0 else INF)
                lo_gap = (s[j] - dom.lo) if math.isfinite(dom.lo) else (0.0 if d >= 0 else INF)
                r = max(d, 0.0) * max(hi_gap, 0.0) + max(-d, 0.0) * max(lo_gap, 0.0)
            else:
                r = f.subdifferential(d).distance(s[j]) if f.domain.contains(d) else INF
            comp[n] = max(comp[n], r)
    drift = np.zeros((tree.n, model.J))
    kinds = []
    polar = np.zeros(tree.n)
    for n in range(tree.n):
        if tree.is_leaf(n):
            kinds.append("leaf")
            continue
        v = _inner_drift(model, w, n)
        drift[n] = v
        if model.constrained(n):
            A = model.A[n]
            rec_rows = A  # barrier cone of D contains the cone generated by the rows of A
            mu, _ = nnls(rec_rows.T, v)
            polar[n] = float(np.max(np.abs(rec_rows.T @ mu - v), initial=0.0))
        else:
            polar[n] = float(np.max(np.abs(v), initial=0.0))
        if np.all(np.abs(v) <= ctol):
            kinds.append("martingale")
        elif np.all(v <= ctol):
            kinds.append("supermartingale")
        else:
            kinds.append("violated")
    return ShadowPrices(prices, defined, within, comp, drift, kinds, polar)


__all__ = [
    "DualCertificate", "OptimalityReport", "ShadowPrices", "check_optimality", "conjugate_phi",
    "evaluate_certificate", "shadow_prices", "solve_dual", "solve_dual_direct", "support_C",
    "support_D_robust", "scaled_subdifferential", "near_subdifferential",
]
