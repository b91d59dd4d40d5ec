"""Market models: separable trading costs, polyhedral constraints, losses."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .kernel import PiecewiseConvex
from .tree import ClaimProcess, ScenarioTree

CASH = PiecewiseConvex.linear(1.0)


class ModelError(ValueError):
    pass


@dataclass(frozen=True)
class LossSpec:
    """Separable loss ``V(c) = sum_t V_t(c_t)`` given per time."""

    per_time: tuple

    def __init__(self, per_time: Sequence[PiecewiseConvex]):
        object.__setattr__(self, "per_time", tuple(per_time))

    def at(self, tree: ScenarioTree, n: int) -> PiecewiseConvex:
        return self.per_time[int(tree.t[n])]

    @classmethod
    def broadcast(cls, f: PiecewiseConvex, T: int) -> "LossSpec":
        return cls([f] * (T + 1))

    @classmethod
    def terminal(cls, f: PiecewiseConvex, T: int) -> "LossSpec":
        """Indicator of the nonpositive reals before ``T``, ``f`` at ``T``:
        intermediate payments must be nonpositive and only the terminal
        aggregate is penalized."""
        return cls([PiecewiseConvex.indicator_nonpositive()] * T + [f])

    @classmethod
    def indicator(cls, T: int) -> "LossSpec":
        return cls.broadcast(PiecewiseConvex.indicator_nonpositive(), T)

    def recession(self) -> "LossSpec":
        return LossSpec([f.recession() for f in self.per_time])

    def expected(self, tree: ScenarioTree, c: np.ndarray, slack: float = 0.0) -> float:
        """``E V(c)`` for a scalar node array; arguments within ``slack``
        (relative) of the domain are moved onto it."""
        total = 0.0
        for n in range(tree.n):
            f = self.at(tree, n)
            v = f(_snap(f, float(c[n]), slack))
            if v == math.inf:
                return math.inf
            total += tree.prob[n] * v
        return total

    def expected_conjugate(self, tree: ScenarioTree, q: np.ndarray) -> float:
        """``E V*(q)``."""
        total = 0.0
        for n in range(tree.n):
            v = self.at(tree, n).conjugate()(float(q[n]))
            if v == math.inf:
                return math.inf
            total += tree.prob[n] * v
        return total

    def to_dict(self) -> dict:
        return {"per_time": [f.to_dict() for f in self.per_time]}


@dataclass
class MarketModel:
    """Per-node separable costs and polyhedral constraints on a tree.

    ``costs[n][j]`` is the cost of trading ``x`` units of asset ``j`` at node
    ``n``; ``A[n] x <= b[n]`` describes the holdings allowed after trading at
    node ``n``.  Leaves always force liquidation.
    """

    tree: ScenarioTree
    costs: list
    A: list
    b: list
    theta: np.ndarray
    liquid_cash: bool = False
    assets: tuple = ()
    broadcast: dict = field(default_factory=dict)

    @property
    def J(self) -> int:
        return len(self.costs[0])

    @classmethod
    def build(cls, tree: ScenarioTree, costs, constraints=None, theta=None,
              liquid_cash: bool = False, assets: Sequence[str] | None = None,
              broadcast: dict | None = None) -> "MarketModel":
        """``costs``: node-indexed list of per-asset functions.  ``constraints``:
        node-indexed list of ``(A, b)`` pairs or ``None`` (unconstrained)."""
        if len(costs) != tree.n:
            raise ModelError(f"costs given for {len(costs)} nodes, tree has {tree.n}")
        J = len(costs[0])
        if J < 1:
            raise ModelError("need at least one asset")
        cc = []
        for n, row in enumerate(costs):
            if len(row) != J:
                raise ModelError(f"node {tree.ids[n]!r}: expected {J} cost functions")
            row = list(row)
            if liquid_cash:
                row[0] = CASH if row[0] is None else row[0]
            if any(f is None for f in row):
                raise ModelError(f"node {tree.ids[n]!r}: missing cost function")
            cc.append(tuple(row))
        A_list, b_list = [], []
        for n in range(tree.n):
            con = None if constraints is None else constraints[n]
            if tree.is_leaf(n) or con is None:
                A_list.append(np.zeros((0, J)))
                b_list.append(np.zeros(0))
                continue
            A = np.asarray(con[0], dtype=float).reshape(-1, J)
            b = np.asarray(con[1], dtype=float).ravel()
            if A.shape[0] != b.shape[0]:
                raise ModelError(f"node {tree.ids[n]!r}: A and b disagree in rows")
            A_list.append(A)
            b_list.append(b)
        th = np.zeros((tree.n, J)) if theta is None else np.asarray(theta, dtype=float).reshape(tree.n, J)
        names = tuple(assets) if assets else tuple(f"asset{j}" for j in range(J))
        if len(names) != J:
            raise ModelError("asset names do not match the cost dimension")
        return cls(tree, cc, A_list, b_list, th, liquid_cash, names, dict(broadcast or {}))

    @classmethod
    def linear_prices(cls, tree: ScenarioTree, prices, constraints=None, spread=None,
                      **kw) -> "MarketModel":
        """Liquid cash plus risky assets with node prices ``prices[n][k]``;
        ``spread`` (same shape, relative) gives bid-ask costs
        ``max(s(1-e) x, s(1+e) x)``."""
        P = np.asarray(prices, dtype=float).reshape(tree.n, -1)
        costs = []
        for n in range(tree.n):
            row = [CASH]
            for k in range(P.shape[1]):
                s = P[n, k]
                e = 0.0 if spread is None else float(np.asarray(spread, dtype=float).reshape(tree.n, -1)[n, k])
                if e == 0.0:
                    row.append(PiecewiseConvex.linear(s))
                else:
                    row.append(PiecewiseConvex.pwl([0.0], [s * (1 - e), s * (1 + e)]))
            costs.append(row)
        return cls.build(tree, costs, constraints, liquid_cash=True, **kw)

    def constrained(self, n: int) -> bool:
        return self.A[n].shape[0] > 0

    def delta(self, x: np.ndarray) -> np.ndarray:
        """``dx_t = x_t - x_{t-1}`` with ``x_{-1} = 0``."""
        x = np.asarray(x, dtype=float).reshape(self.tree.n, self.J)
        dx = x.copy()
        par = self.tree.parent
        dx[1:] -= x[par[1:]]
        return dx

    def node_cost(self, n: int, dx: np.ndarray, slack: float = 0.0) -> float:
        total = 0.0
        for j, f in enumerate(self.costs[n]):
            v = f(_snap(f, float(dx[j] + self.theta[n, j]), slack))
            if v == math.inf:
                return math.inf
            total += v
        return total

    def with_theta(self, theta) -> "MarketModel":
        th = np.asarray(theta, dtype=float).reshape(self.tree.n, self.J)
        return MarketModel(self.tree, self.costs, self.A, self.b, th, self.liquid_cash,
                           self.assets, dict(self.broadcast))

    def support_D(self, n: int, v: np.ndarray) -> float:
        """``sup {x @ v | A x <= b}`` (zero at leaves where D = {0})."""
        from .lp import LinearProgram, solve_lp

        v = np.asarray(v, dtype=float)
        if self.tree.is_leaf(n):
            return 0.0
        if not self.constrained(n):
            return 0.0 if np.all(v == 0.0) else math.inf
        sol = solve_lp(LinearProgram(-v, F=self.A[n], g=self.b[n]))
        if sol.status == "unbounded":
            return math.inf
        if sol.status != "optimal":
            raise ModelError(f"constraint set at node {self.tree.ids[n]!r} is empty")
        return -sol.objective


# ---------------------------------------------------------------------------


@dataclass
class Check:
    name: str
    passed: bool
    nodes: list = field(default_factory=list)
    message: str = ""

    def to_dict(self) -> dict:
        return {"name": self.name, "passed": self.passed, "nodes": list(self.nodes),
                "message": self.message}


@dataclass
class ValidationReport:
    checks: list
    notes: list = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return all(c.passed for c in self.checks)

    def failures(self) -> list:
        return [c for c in self.checks if not c.passed]

    def to_dict(self) -> dict:
        return {"ok": self.ok, "checks": [c.to_dict() for c in self.checks], "notes": list(self.notes)}


def validate_model(model: MarketModel, loss: LossSpec | None = None) -> ValidationReport:
    tree = model.tree
    checks = []

    bad = [tree.ids[n] for n in range(tree.n)
           if any(abs(f(0.0)) > 1e-12 for f in model.costs[n])]
    checks.append(Check("S(0) = 0", not bad, bad, "S(0) ≠ 0" if bad else ""))

    bad = [tree.ids[n] for n in range(tree.n) if model.b[n].size and np.any(model.b[n] < 0)]
    checks.append(Check("0 in D", not bad, bad, "0 ∉ D" if bad else ""))

    if model.liquid_cash:
        bad = [tree.ids[n] for n in range(tree.n) if model.costs[n][0] != CASH]
        checks.append(Check("liquid cash", not bad, bad,
                            "cash cost differs from x -> x" if bad else ""))

    th_bad = model.theta.shape != (tree.n, model.J)
    checks.append(Check("dimensions", not th_bad, [], "theta has the wrong shape" if th_bad else ""))

    notes = ["liquidation at the horizon is enforced: holdings at leaves are fixed to 0"]
    for key, flag in sorted(model.broadcast.items()):
        if flag:
            notes.append(f"{key}: per-time specification broadcast across nodes")

    if loss is not None:
        if len(loss.per_time) != tree.T + 1:
            checks.append(Check("loss horizon", False, [],
                                f"loss given for {len(loss.per_time)} times, need {tree.T + 1}"))
        else:
            nondec, zero, noncon = [], [], []
            for t, f in enumerate(loss.per_time):
                dom = f.domain
                if f.is_pwl:
                    left, right = float(f.slopes[0]), float(f.slopes[-1])
                elif f.family in ("exp", "power"):
                    left, right = 0.0, math.inf
                else:
                    left, right = -math.inf, math.inf
                if left < 0 or math.isfinite(dom.lo):
                    nondec.append(t)
                if not dom.contains(0.0) or abs(f(0.0)) > 1e-12:
                    zero.append(t)
                if right <= 0:
                    noncon.append(t)
            checks.append(Check("loss nondecreasing", not nondec, nondec,
                                "loss decreases somewhere" if nondec else ""))
            checks.append(Check("V(0) = 0", not zero, zero, "V(0) ≠ 0" if zero else ""))
            checks.append(Check("loss nonconstant", not noncon, noncon,
                                "loss is constant" if noncon else ""))
    return ValidationReport(checks, notes)


def _snap(f: PiecewiseConvex, y: float, slack: float) -> float:
    if slack <= 0.0:
        return y
    dom = f.domain
    eps = slack * max(1.0, abs(y))
    if dom.hi < y <= dom.hi + eps:
        return dom.hi
    if dom.lo - eps <= y < dom.lo:
        return dom.lo
    return y


def trading_cost(model: MarketModel, x, slack: float = 0.0) -> ClaimProcess:
    """Node-wise ``S_t(dx_t + theta_t)``; ``+inf`` outside the cost domain."""
    xv = x.values if isinstance(x, ClaimProcess) else np.asarray(x, dtype=float)
    dx = model.delta(xv)
    vals = np.array([model.node_cost(n, dx[n], slack) for n in range(model.tree.n)])
    return ClaimProcess(model.tree, vals)


def recession_model(model: MarketModel, loss: LossSpec | None = None):
    """Conical model: recession costs, ``A x <= 0``, recession losses, no theta."""
    costs = [tuple(f.recession() for f in row) for row in model.costs]
    rec = MarketModel(model.tree, costs, [a.copy() for a in model.A],
                      [np.zeros_like(b) for b in model.b], np.zeros_like(model.theta),
                      model.liquid_cash, model.assets, dict(model.broadcast))
    return rec, (None if loss is None else loss.recession())
