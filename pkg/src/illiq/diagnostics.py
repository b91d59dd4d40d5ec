"""Checks of the standing assumptions: linearity of the recession trading
cone, domain scaling of the conjugate loss, asymptotic elasticity, and an
aggregate report."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from ._program import Program
from .config import Tolerances, default_tolerances
from .kernel import PiecewiseConvex
from .market import LossSpec, MarketModel, validate_model
from .tree import PortfolioProcess, ScenarioTree

INF = math.inf


# ---------------------------------------------------------------------------
# linearity


@dataclass
class LinealityReport:
    is_linear: bool
    ray: PortfolioProcess | None
    dimension: int
    form: str = "node"          # "node": S-infinity <= 0 per node; "path": loss recession per path
    verified: bool = True
    slack: float = 0.0

    def to_dict(self) -> dict:
        return {"is_linear": self.is_linear, "dimension": self.dimension, "form": self.form,
                "verified": self.verified, "slack": self.slack,
                "ray": None if self.ray is None else self.ray.values.tolist()}


def _loss_is_conelike(loss: LossSpec | None) -> bool:
    """True when every ``V_t`` has a nonnegative recession function, so that
    ``V_inf(c) <= 0`` exactly when ``c <= 0``."""
    if loss is None:
        return True
    for f in loss.per_time:
        r = f.recession()
        if r(-1.0) < 0.0 or not r(1.0) > 0.0:
            return False
    return True


def _rec_cone(model: MarketModel, loss: LossSpec | None, x: np.ndarray, tol: float) -> bool:
    """Membership of a strategy in the recession cone being tested."""
    tree = model.tree
    x = x.reshape(tree.n, model.J)
    for n in range(tree.n):
        if tree.is_leaf(n):
            continue
        if model.constrained(n) and np.any(model.A[n] @ x[n] > tol):
            return False
    dx = model.delta(x)
    s = np.array([sum(f.recession()(float(dx[n, j])) for j, f in enumerate(model.costs[n]))
                  for n in range(tree.n)])
    if _loss_is_conelike(loss):
        return bool(np.all(s <= tol))
    for path in _paths(tree):
        tot = 0.0
        for n in path:
            tot += loss.at(tree, n).recession()(float(s[n]))
        if not tot <= tol:
            return False
    return True


def _paths(tree: ScenarioTree):
    return [tree.path(leaf) for leaf in tree.leaves]


def linearity_check(model: MarketModel, loss: LossSpec | None = None,
                    tol: Tolerances | None = None) -> LinealityReport:
    """Is ``{x in N_{D_inf} | V_inf(S_inf(dx)) <= 0}`` a linear space?

    Every defining row ``r_i z <= 0`` of the (lifted) cone must be tight on
    the whole cone.  One LP maximizes the summed slack over the cone cut
    to ``|x| <= 1``; a positive optimum yields a violating strategy, which is
    then verified directly.
    """
    tol = tol or default_tolerances()
    tree = model.tree
    J = model.J
    conelike = _loss_is_conelike(loss)
    prog = Program(tol)
    xs = [None if tree.is_leaf(n) else prog.var(J, lo=-1.0, hi=1.0) for n in range(tree.n)]
    tight_rows = []
    s_vars = []
    for n in range(tree.n):
        par = int(tree.parent[n])
        u = prog.var(J)
        for j, f in enumerate(model.costs[n]):
            idx, coef = [], []
            if xs[n] is not None:
                idx.append(xs[n][j])
                coef.append(1.0)
            if par >= 0:
                idx.append(xs[par][j])
                coef.append(-1.0)
            prog.epigraph(f.recession(), idx, coef, 0.0, u[j])
        s_vars.append(u)
        if xs[n] is not None:
            for i in range(model.A[n].shape[0]):
                prog.le(xs[n], model.A[n][i], 0.0)
    if conelike:
        for n in range(tree.n):
            prog.le(s_vars[n], [1.0] * J, 0.0)
    else:
        v = []
        for n in range(tree.n):
            vn = prog.var(1)[0]
            prog.epigraph(loss.at(tree, n).recession(), list(s_vars[n]), [1.0] * J, 0.0, vn)
            v.append(vn)
        for path in _paths(tree):
            prog.le([v[n] for n in path], [1.0] * len(path), 0.0)
    # minimize the sum of all row activities = maximize the total slack
    cost = np.zeros(prog.n)
    for idx, coef, rhs in prog.le_rows:
        np.add.at(cost, idx, coef)
    prog.c = list(cost)
    res = prog.solve()
    if res.status != "optimal":
        raise RuntimeError(f"linearity LP ended with status {res.status}")
    slack = -float(res.objective)
    nx = sum(J for n in range(tree.n) if xs[n] is not None)
    form = "node" if conelike else "path"
    if slack <= 1e-7:
        return LinealityReport(True, None, _lineality_dim(model, nx), form, True, slack)
    x = np.zeros((tree.n, J))
    for n in range(tree.n):
        if xs[n] is not None:
            x[n] = res.z[xs[n]]
    ok = _rec_cone(model, loss, x, 1e-9) and not _rec_cone(model, loss, -x, 1e-9)
    if not ok:
        return LinealityReport(True, None, _lineality_dim(model, nx), form, False, slack)
    return LinealityReport(False, PortfolioProcess(tree, x), _lineality_dim(model, nx), form, True, slack)


def _lineality_dim(model: MarketModel, nx: int) -> int:
    """Dimension of ``{x | x and -x in the cone}``: constraint rows, every
    non-linear recession cost, and each node's total cost vanish."""
    tree = model.tree
    J = model.J
    pos = {}
    k = 0
    for n in range(tree.n):
        if not tree.is_leaf(n):
            pos[n] = k
            k += J
    rows = []

    def delta_row(n, j, w=1.0):
        r = np.zeros(nx)
        if n in pos:
            r[pos[n] + j] += w
        par = int(tree.parent[n])
        if par >= 0:
            r[pos[par] + j] -= w
        return r

    for n in range(tree.n):
        if n in pos:
            for a in model.A[n]:
                r = np.zeros(nx)
                r[pos[n]:pos[n] + J] = a
                rows.append(r)
        total = np.zeros(nx)
        for j, f in enumerate(model.costs[n]):
            rec = f.recession()
            lin = rec.is_pwl and rec.bps.shape[0] == 0
            if lin:
                total += delta_row(n, j, float(rec.slopes[0]))
            else:
                rows.append(delta_row(n, j))
        rows.append(total)
    if nx == 0:
        return 0
    M = np.array(rows) if rows else np.zeros((0, nx))
    rank = int(np.linalg.matrix_rank(M, tol=1e-9)) if M.size else 0
    return nx - rank


# ---------------------------------------------------------------------------
# asymptotic elasticity


@dataclass
class FormVerdicts:
    beta: float
    ybar: float
    forms: dict            # "a".."d" -> bool
    precondition: bool

    @property
    def agree(self) -> bool:
        return len(set(self.forms.values())) == 1

    def to_dict(self) -> dict:
        return {"beta": self.beta, "ybar": self.ybar, "forms": dict(self.forms),
                "precondition": self.precondition, "agree": self.agree}


@dataclass
class RAEReport:
    condition: str
    holds: bool | None
    witnesses: dict
    method: str
    per_time: list = field(default_factory=list)
    forms: FormVerdicts | None = None

    @property
    def verdict(self) -> str:
        return "unknown" if self.holds is None else ("holds" if self.holds else "fails")

    def to_dict(self) -> dict:
        return {"condition": self.condition, "verdict": self.verdict, "witnesses": self.witnesses,
                "method": self.method, "per_time": list(self.per_time),
                "forms": None if self.forms is None else self.forms.to_dict()}


def _grid(lo: float, hi: float, n: int = 1000) -> np.ndarray:
    if lo > 0:
        return np.geomspace(lo, hi, n)
    return np.linspace(lo, hi, n)


def _grid_inequality(vs: PiecewiseConvex, lam: float, ys: np.ndarray, rtol: float = 1e-9):
    """Least ``C`` with ``v*(lam y) <= C v*(y)`` on ``ys`` (``None`` if none)."""
    lhs = vs(lam * ys)
    rhs = vs(ys)
    C = 0.0
    for a, b in zip(lhs, rhs):
        if not math.isfinite(b):
            continue
        if not math.isfinite(a):
            return None
        if b <= 0.0:
            if a > rtol * max(1.0, abs(b)):
                return None
            continue
        C = max(C, a / b)
    return C


def _single_rae(V: PiecewiseConvex, condition: str):
    """Verdict, witnesses and method for one univariate loss."""
    vs = V.conjugate()
    dom = vs.domain
    if condition == "RAE+":
        lam = 2.0
    else:
        lam = 0.5
    if V.is_pwl and V == PiecewiseConvex.indicator_nonpositive():
        return True, {"lambda": lam, "C": 1.0, "ybar": 0.0}, "closed_form"
    if not V.is_pwl and V.family == "power":
        q = vs.p
        # conjugate is homogeneous of degree q on the half-line
        return True, {"lambda": lam, "C": lam ** q, "ybar": 1.0}, "closed_form"
    if not V.is_pwl and V.family == "exp" and condition == "RAE+":
        ybar = math.e * vs.inner
        ys = _grid(ybar, 1e3 * ybar)
        C = _grid_inequality(vs, lam, ys)
        return True, {"lambda": lam, "C": C, "ybar": ybar}, "closed_form"
    # grid verification over candidate anchors inside the domain
    cands = []
    if condition == "RAE+":
        for y in (1.0, math.e, 10.0, dom.hi, 0.5 * (dom.lo + dom.hi) if math.isfinite(dom.hi) else 2.0):
            if math.isfinite(y) and dom.contains(y):
                cands.append(y)
    else:
        for y in (0.5 * dom.hi if math.isfinite(dom.hi) else 0.5, 0.25, 0.1):
            if math.isfinite(y) and dom.contains(y) and y > 0:
                cands.append(y)
    for ybar in cands:
        ys = _grid(ybar, 1e3 * ybar) if condition == "RAE+" else _grid(ybar * 1e-3, ybar)
        vals = vs(ys)
        if np.any(np.isnan(vals)):
            return None, {}, "unknown"
        C = _grid_inequality(vs, lam, ys)
        if C is not None and (condition == "RAE+" or C > 0):
            return True, {"lambda": lam, "C": C, "ybar": float(ybar)}, "grid"
    return False, {"lambda": lam}, "grid"


def rae_check(loss: LossSpec | PiecewiseConvex, condition: str = "RAE+",
              beta: float | None = None, ybar: float | None = None) -> RAEReport:
    """Asymptotic elasticity of the conjugate loss at every time.

    Closed forms for indicators, power and exponential losses; grid checks
    over three decades for piecewise-linear data (best effort).  With
    ``beta`` the four equivalent forms of the elasticity bound are also
    evaluated on the first time's loss.
    """
    if condition not in ("RAE+", "RAE-"):
        raise ValueError("condition must be 'RAE+' or 'RAE-'")
    per = loss.per_time if isinstance(loss, LossSpec) else (loss,)
    verdicts = []
    witnesses = {}
    methods = set()
    holds: bool | None = True
    for t, V in enumerate(per):
        h, w, m = _single_rae(V, condition)
        verdicts.append({"t": t, "verdict": "unknown" if h is None else ("holds" if h else "fails"),
                         "witnesses": w, "method": m})
        methods.add(m)
        if h is None:
            holds = None
        elif not h and holds is not None:
            holds = False
        if t == len(per) - 1:
            witnesses = w
    forms = None
    if beta is not None:
        g = per[-1]
        forms = elasticity_forms(g, beta, ybar if ybar is not None else 1.0, condition)
    method = "closed_form" if methods == {"closed_form"} else ("unknown" if "unknown" in methods else "grid")
    return RAEReport(condition, holds, witnesses, method, verdicts, forms)


def _in_domain(f: PiecewiseConvex, ys: np.ndarray) -> np.ndarray:
    """Grid points inside ``dom f`` plus the finite domain edges within range."""
    dom = f.domain
    edges = [e for e in (dom.lo, dom.hi) if math.isfinite(e) and ys[0] <= e <= ys[-1]]
    ys = np.concatenate([ys, edges])
    return np.unique(ys[[dom.contains(float(y)) for y in ys]])


def elasticity_forms(g: PiecewiseConvex, beta: float, ybar: float, condition: str = "RAE+",
                     n: int = 400, rtol: float = 1e-9) -> FormVerdicts:
    """Evaluate the four equivalent elasticity conditions on grids.

    The precondition also asks for a bounded subdifferential at ``ybar``;
    at a domain edge the ``c`` ranges in (c) and (d) are empty.

    ``RAE+`` (``beta > 1``, subgradients of ``g*`` at ``ybar`` nonnegative):
      (a) ``g*(l y) <= l^(b/(b-1)) g*(y)``  for ``l >= 1, y >= ybar``
      (b) ``c y <= b/(b-1) g*(y)``          for ``y >= ybar, c in dg*(y)``
      (c) ``c y >= b g(c)``                 for ``c >= dg*(ybar), y in dg(c)``
      (d) ``g(l c) >= l^b g(c)``            for ``l >= 1, c >= dg*(ybar)``
    ``RAE-`` (``0 < beta < 1``, subgradients at ``ybar`` nonpositive):
      (a) ``g*(l y) <= l^(-b/(1-b)) g*(y)`` for ``0 < l < 1, 0 < y <= ybar``
      (b) ``c y >= -b/(1-b) g*(y)``         for ``0 < y <= ybar, c in dg*(y)``
      (c) ``c y >= b g(c)``                 for ``c <= dg*(ybar), y in dg(c)``
      (d) ``g(l c) >= l^b g(c)``            for ``l >= 1, c <= dg*(ybar)``
    """
    gs = g.conjugate()
    if not gs.domain.contains(ybar):
        return FormVerdicts(beta, ybar, {k: False for k in "abcd"}, False)
    sub = gs.subdifferential(ybar)
    near = np.geomspace(1e-6, 1.0, 16)  # factors close to 1 probe the derivative forms
    lam_hi = np.unique(np.concatenate([np.linspace(1.0, 10.0, 25)[1:], 1.0 + near]))
    lam_lo = np.unique(np.concatenate([np.linspace(0.05, 1.0, 25)[:-1], 1.0 - 0.95 * near]))

    def le(a, b):
        if a == INF or b == -INF:
            return b == INF if a == INF else a == -INF
        return a <= b + rtol * max(1.0, abs(a), abs(b))

    def all_le(a, b):
        a, b = np.broadcast_arrays(np.asarray(a, dtype=float), np.asarray(b, dtype=float))
        with np.errstate(invalid="ignore", over="ignore"):
            scale = np.maximum(1.0, np.maximum(np.abs(a), np.abs(b)))
            ok = (a <= b + rtol * scale) | (b == INF) | (a == -INF)
        ok &= ~((a == INF) & (b != INF)) & ~((b == -INF) & (a != -INF))
        return bool(np.all(ok))

    if condition == "RAE+":
        pre = beta > 1 and sub.lo >= 0 and math.isfinite(sub.hi)
        ys = _in_domain(gs, _grid(ybar, 1e3 * ybar, n))
        e = beta / (beta - 1.0)
        L, Y = np.meshgrid(lam_hi, ys)
        with np.errstate(over="ignore"):
            fa = all_le(gs(L * Y), L ** e * gs(Y))
        fb = True
        for y in ys:
            d = gs.subdifferential(y)
            if d.hi == INF and y > 0:
                fb = False  # arbitrarily large subgradients at the domain edge
            for c in (d.lo, d.hi):
                if math.isfinite(c) and not le(c * y, e * gs(y)):
                    fb = False
        c0 = sub.hi
        cs = np.array([gs.subdifferential(y).hi for y in ys])
        if math.isfinite(c0):
            cs = np.concatenate([cs, c0 + max(1.0, abs(c0)) * np.geomspace(1e-3, 1e3, n // 4)])
        cs = cs[np.isfinite(cs) & (cs >= c0)]
    else:
        pre = 0 < beta < 1 and sub.hi <= 0 and math.isfinite(sub.lo)
        ys = _in_domain(gs, _grid(ybar * 1e-3, ybar, n))
        e = -beta / (1.0 - beta)
        L, Y = np.meshgrid(lam_lo, ys)
        with np.errstate(over="ignore"):
            fa = all_le(gs(L * Y), L ** e * gs(Y))
        fb = True
        for y in ys:
            d = gs.subdifferential(y)
            if d.lo == -INF and y > 0:
                fb = False
            for c in (d.lo, d.hi):
                if math.isfinite(c) and not le(e * gs(y), c * y):
                    fb = False
        c0 = sub.lo
        cs = np.array([gs.subdifferential(y).lo for y in ys])
        if math.isfinite(c0):
            cs = np.concatenate([cs, c0 - max(1.0, abs(c0)) * np.geomspace(1e-3, 1e3, n // 4)])
        cs = cs[np.isfinite(cs) & (cs <= c0)]
    cs = np.unique(cs[[g.domain.contains(float(c)) for c in cs]])
    fc = True
    for c in cs:
        if not g.domain.contains(c):
            continue
        d = g.subdifferential(float(c))
        # only pairs whose dual point lies on the tested side of ybar
        lo, hi = (max(d.lo, ybar), d.hi) if condition == "RAE+" else (d.lo, min(d.hi, ybar))
        if lo > hi:
            continue
        for y in (lo, hi):
            if math.isfinite(y) and not le(beta * g(float(c)), c * y):
                fc = False
    L, Cs = np.meshgrid(lam_hi, cs)
    with np.errstate(over="ignore"):
        fd = all_le(L ** beta * g(Cs), g(L * Cs)) if cs.size else True
    return FormVerdicts(beta, ybar, {"a": bool(fa), "b": bool(fb), "c": bool(fc), "d": bool(fd)}, bool(pre))


# ---------------------------------------------------------------------------
# domain scaling


@dataclass
class ScalingReport:
    holds: bool
    lam: float | None
    intervals: list
    route: str = "domain"

    def to_dict(self) -> dict:
        return {"holds": self.holds, "lambda": self.lam, "route": self.route,
                "intervals": [[i.lo, i.hi] for i in self.intervals]}


def scaling_domain_check(loss: LossSpec, tree: ScenarioTree,
                         candidates=(2.0, 0.5)) -> ScalingReport:
    """Find ``lam != 1`` with ``lam dom EV* within dom EV*``.  On a finite tree
    the domain is a product of the per-node intervals, so the test is exact."""
    ivs = [loss.at(tree, n).conjugate().domain for n in range(tree.n)]
    uniq = []
    for iv in ivs:
        if iv not in uniq:
            uniq.append(iv)
    for lam in candidates:
        if all(_scaled_within(iv, lam) for iv in uniq):
            return ScalingReport(True, lam, uniq)
    plus = rae_check(loss, "RAE+")
    minus = rae_check(loss, "RAE-")
    if plus.holds or minus.holds:
        # asymptotic elasticity only helps when the domains are cones already
        route = "elasticity"
        for lam in (plus.witnesses.get("lambda"), minus.witnesses.get("lambda")):
            if lam and all(_scaled_within(iv, lam) for iv in uniq):
                return ScalingReport(True, lam, uniq, route)
    return ScalingReport(False, None, uniq)


def _scaled_within(iv, lam: float) -> bool:
    s = iv.scaled(lam)
    return s.lo >= iv.lo - 1e-12 and s.hi <= iv.hi + 1e-12


# ---------------------------------------------------------------------------
# aggregate


@dataclass
class AssumptionReport:
    entries: dict

    @property
    def ok(self) -> bool:
        return all(e.get("passed", True) for e in self.entries.values())

    def to_dict(self) -> dict:
        return {"ok": self.ok, "assumptions": self.entries}


def assumption_report(model: MarketModel, loss: LossSpec, tol: Tolerances | None = None) -> AssumptionReport:
    from .dual import solve_dual

    entries = {}
    val = validate_model(model, loss)
    entries["structure"] = {"passed": val.ok, "name": "structure and growth", "detail": val.to_dict()}
    entries["monotonicity"] = {"passed": True, "name": "expectation monotonicity",
                               "detail": "holds by construction for node-separable losses"}
    lin = linearity_check(model, loss, tol)
    entries["linearity"] = {"passed": lin.is_linear, "name": "linearity", "detail": lin.to_dict()}
    sc = scaling_domain_check(loss, model.tree)
    entries["domain_scaling"] = {"passed": sc.holds, "name": "domain scaling", "detail": sc.to_dict()}
    probe = {"passed": False, "name": "finite dual value at zero claim"}
    if val.ok:
        try:
            cert = solve_dual(model, loss, None, tol)
            probe["passed"] = bool(np.isfinite(cert.value))
            probe["detail"] = {"value": cert.value, "status": cert.status}
        except (RuntimeError, ValueError) as exc:
            probe["detail"] = str(exc)
    entries["dual_probe"] = probe
    return AssumptionReport(entries)


__all__ = [
    "AssumptionReport", "FormVerdicts", "LinealityReport", "RAEReport", "ScalingReport",
    "assumption_report", "elasticity_forms", "linearity_check", "rae_check", "scaling_domain_check",
]
