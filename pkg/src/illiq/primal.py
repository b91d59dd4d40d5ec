"""Optimal hedging, superhedging and recession-cone membership.

Every problem is reduced to one :class:`~illiq._program.Program`: per node
and asset an epigraph variable ``u >= phi(dx + theta)``, and per node a loss
epigraph ``v >= V_t(sum_j u + c)``.  Piecewise-linear data give an exact LP;
smooth losses are handled by tangent cuts.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from ._program import Program, ProgramResult
from .config import Tolerances
from .market import LossSpec, MarketModel, recession_model, trading_cost
from .tree import ClaimProcess, PortfolioProcess

OPTIMAL = "optimal"
UNBOUNDED_BELOW = "unbounded_below"
INFEASIBLE = "infeasible"


def claim_array(model: MarketModel, c) -> np.ndarray:
    if c is None:
        return np.zeros(model.tree.n)
    if isinstance(c, ClaimProcess):
        return c.scalar.astype(float)
    arr = np.asarray(c, dtype=float).ravel()
    if arr.shape[0] != model.tree.n:
        raise ValueError(f"claim needs {model.tree.n} node values")
    return arr


@dataclass
class _Hedge:
    x: list            # per node: variable indices (J,) or None at leaves
    u: list            # per node: variable indices (J,)
    cost_groups: list  # per node: list of J groups
    con_rows: list     # per node: row ids of A x <= b


def _hedging_block(prog: Program, model: MarketModel) -> _Hedge:
    tree = model.tree
    J = model.J
    xs, us, groups, rows = [], [], [], []
    for n in range(tree.n):
        xs.append(None if tree.is_leaf(n) else prog.var(J))
    for n in range(tree.n):
        u = prog.var(J)
        par = int(tree.parent[n])
        gs = []
        for j in range(J):
            idx, coef = [], []
            if xs[n] is not None:
                idx.append(xs[n][j])
                coef.append(1.0)
            if par >= 0:
                idx.append(xs[par][j])
                coef.append(-1.0)
            gs.append(prog.epigraph(model.costs[n][j], idx, coef, float(model.theta[n, j]), u[j]))
        us.append(u)
        groups.append(gs)
        r = []
        if xs[n] is not None:
            for i in range(model.A[n].shape[0]):
                r.append(prog.le(xs[n], model.A[n][i], model.b[n][i]))
        rows.append(r)
    return _Hedge(xs, us, groups, rows)


def _strategy(model: MarketModel, hb: _Hedge, z: np.ndarray) -> np.ndarray:
    x = np.zeros((model.tree.n, model.J))
    for n, idx in enumerate(hb.x):
        if idx is not None:
            x[n] = z[idx]
    return x


@dataclass
class PrimalSolution:
    status: str
    value: float
    x: PortfolioProcess | None = None
    cost: ClaimProcess | None = None
    ray: np.ndarray | None = None
    certificate: dict | None = None
    lp_value: float = math.nan
    q: np.ndarray | None = None
    w: np.ndarray | None = None
    mu: list | None = None
    cuts: int = 0
    message: str = ""

    def to_dict(self) -> dict:
        d = {"status": self.status, "value": self.value, "lp_value": self.lp_value,
             "cuts": self.cuts, "message": self.message}
        if self.x is not None:
            d["x"] = self.x.values.tolist()
            d["cost"] = self.cost.scalar.tolist()
        if self.ray is not None:
            d["ray"] = self.ray.tolist()
        return d


def solve_alm(model: MarketModel, loss: LossSpec, c=None, tol: Tolerances | None = None) -> PrimalSolution:
    """Minimize ``E V(S(dx + theta) + c)`` over admissible strategies."""
    tree = model.tree
    cv = claim_array(model, c)
    prog = Program(tol)
    hb = _hedging_block(prog, model)
    loss_groups = []
    for n in range(tree.n):
        v = prog.var(1, cost=float(tree.prob[n]))[0]
        idx = list(hb.u[n])
        loss_groups.append(prog.epigraph(loss.at(tree, n), idx, [1.0] * len(idx), float(cv[n]), v))
    res = prog.solve()
    return _primal_from(res, model, loss, cv, hb, loss_groups)


def _primal_from(res: ProgramResult, model, loss, cv, hb, loss_groups) -> PrimalSolution:
    tree = model.tree
    if res.status == "unbounded":
        ray = _strategy(model, hb, res.lp.ray)
        return PrimalSolution(UNBOUNDED_BELOW, -math.inf, ray=ray,
                              message="objective unbounded below along the reported strategy ray")
    if res.status == "infeasible":
        return PrimalSolution(INFEASIBLE, math.inf, certificate=res.lp.farkas,
                              message="no admissible strategy keeps the loss finite")
    if res.status not in ("optimal", "cut_limit"):
        return PrimalSolution(res.status, math.nan, message=res.lp.message)
    x = _strategy(model, hb, res.z)
    xp = PortfolioProcess(tree, x)
    slack = res.program.tol.lp_feasibility
    cost = trading_cost(model, xp, slack)
    value = loss.expected(tree, cost.scalar + cv, slack)
    q = np.zeros(tree.n)
    w = np.zeros((tree.n, model.J))
    mu = []
    for n in range(tree.n):
        P = tree.prob[n]
        q[n] = res.group_mass(loss_groups[n])[1] / P
        for j in range(model.J):
            w[n, j] = res.group_mass(hb.cost_groups[n][j])[1] / P
        mu.append(np.array([res.row_price(r) for r in hb.con_rows[n]]) / P)
    sol = PrimalSolution(OPTIMAL, value, xp, cost, lp_value=res.objective, q=q, w=w, mu=mu,
                         cuts=res.cuts)
    if res.status == "cut_limit":
        sol.message = "cut limit reached before the tolerance"
    return sol


def phi(model: MarketModel, loss: LossSpec, c=None, tol: Tolerances | None = None) -> float:
    """Optimal value; ``-inf`` when unbounded below, ``+inf`` when infeasible."""
    return solve_alm(model, loss, c, tol).value


# ---------------------------------------------------------------------------


@dataclass
class HedgeResult:
    side: str
    value: float
    status: str
    x: PortfolioProcess | None = None
    certificate: dict | None = None
    ray: np.ndarray | None = None

    def to_dict(self) -> dict:
        d = {"side": self.side, "value": self.value, "status": self.status}
        if self.x is not None:
            d["x"] = self.x.values.tolist()
        return d


def superhedge(model: MarketModel, c, p=None, side: str = "sup", recession: bool = False,
               tol: Tolerances | None = None) -> HedgeResult:
    """Super- (``side="sup"``) or subhedging (``"inf"``) cost of ``c`` in units
    of the premium ``p`` (default: cash at time 0).

    ``sup``: least ``a`` with ``c - a p`` hedgeable at no cost;
    ``inf``: greatest ``a`` with ``a p - c`` hedgeable at no cost.  With
    ``recession=True`` the conical recession model is used (swap-rate bounds).
    """
    if side not in ("sup", "inf"):
        raise ValueError("side must be 'sup' or 'inf'")
    if recession:
        model = recession_model(model)[0]
    tree = model.tree
    cv = claim_array(model, c)
    pv = unit_premium(tree) if p is None else claim_array(model, p)
    if not np.any(pv != 0):
        raise ValueError("premium must be nonzero")
    prog = Program(tol)
    a = prog.var(1, cost=1.0 if side == "sup" else -1.0)[0]
    hb = _hedging_block(prog, model)
    sgn = 1.0 if side == "sup" else -1.0
    for n in range(tree.n):
        idx = list(hb.u[n]) + [a]
        coef = [1.0] * model.J + [-sgn * pv[n]]
        prog.le(idx, coef, -sgn * cv[n])
    res = prog.solve()
    if res.status == "unbounded":
        val = -math.inf if side == "sup" else math.inf
        return HedgeResult(side, val, "unbounded", ray=_strategy(model, hb, res.lp.ray))
    if res.status == "infeasible":
        val = math.inf if side == "sup" else -math.inf
        return HedgeResult(side, val, "infeasible", certificate=res.lp.farkas)
    if res.status not in ("optimal", "cut_limit"):
        return HedgeResult(side, math.nan, res.status)
    x = PortfolioProcess(tree, _strategy(model, hb, res.z))
    return HedgeResult(side, float(res.z[a]), "optimal", x=x)


def unit_premium(tree) -> np.ndarray:
    """Cash paid at the root only."""
    p = np.zeros(tree.n)
    p[0] = 1.0
    return p


@dataclass
class Membership:
    member: bool
    x: PortfolioProcess | None = None
    certificate: dict | None = None
    details: dict = field(default_factory=dict)


def recession_membership(model: MarketModel, c, tol: Tolerances | None = None) -> Membership:
    """Is ``c`` in the recession cone of the hedgeable claims, i.e. does some
    strategy in the recession model satisfy ``S(dx) + c <= 0``?"""
    rec = recession_model(model)[0]
    return hedgeable(rec, c, tol)


def hedgeable(model: MarketModel, c, tol: Tolerances | None = None) -> Membership:
    """Is ``c`` superhedgeable at zero cost in ``model``?"""
    tree = model.tree
    cv = claim_array(model, c)
    prog = Program(tol)
    hb = _hedging_block(prog, model)
    for n in range(tree.n):
        prog.le(list(hb.u[n]), [1.0] * model.J, -cv[n])
    res = prog.solve()
    if res.status in ("optimal", "cut_limit"):
        return Membership(True, PortfolioProcess(tree, _strategy(model, hb, res.z)))
    if res.status == "infeasible":
        return Membership(False, certificate=res.lp.farkas)
    raise RuntimeError(f"membership program ended with status {res.status}")
