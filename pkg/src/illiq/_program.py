"""Linear programs with univariate convex epigraph constraints.

``t >= f(a @ z + b)`` and ``t >= s * f(e / s)`` (perspective) constraints are
added as exact rows for piecewise-linear ``f`` and as tangent cuts
(outer linearization, refined until the violation drops below the cut
tolerance) for smooth families.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .config import Tolerances, default_tolerances
from .kernel import PiecewiseConvex
from .lp import INFEASIBLE, NUMERICAL, OPTIMAL, UNBOUNDED, LinearProgram, LPSolution, solve_lp

INF = math.inf


@dataclass
class Expr:
    idx: np.ndarray
    coef: np.ndarray
    const: float = 0.0

    def value(self, z: np.ndarray) -> float:
        return float(self.coef @ z[self.idx]) + self.const


@dataclass
class Group:
    f: PiecewiseConvex
    expr: Expr
    t: int
    scale_var: int = -1              # perspective denominator variable, -1 if none
    rows: list = field(default_factory=list)   # (row id, slope, kind) with kind in piece/lo/hi


@dataclass
class ProgramResult:
    status: str
    z: np.ndarray | None
    objective: float
    lp: LPSolution
    program: "Program"
    cuts: int = 0

    def row_price(self, row: int) -> float:
        return float(self.lp.y_ineq[row])

    def group_mass(self, g: Group) -> tuple[float, float]:
        """(sum of multipliers on piece rows, slope-weighted multiplier mass
        including domain rows)."""
        w = 0.0
        m = 0.0
        y = self.lp.y_ineq
        for row, slope, kind in g.rows:
            mu = float(y[row])
            if kind == "piece":
                w += mu
                m += mu * slope
            elif kind == "hi":
                m += mu
            else:
                m -= mu
        return w, m


class Program:
    def __init__(self, tol: Tolerances | None = None):
        self.tol = tol or default_tolerances()
        self.c: list[float] = []
        self.lo: list[float] = []
        self.hi: list[float] = []
        self.le_rows: list[tuple[np.ndarray, np.ndarray, float]] = []
        self.eq_rows: list[tuple[np.ndarray, np.ndarray, float]] = []
        self.groups: list[Group] = []
        self.smooth: list[Group] = []

    @property
    def n(self) -> int:
        return len(self.c)

    def var(self, k: int = 1, lo: float = -INF, hi: float = INF, cost: float = 0.0) -> np.ndarray:
        start = len(self.c)
        self.c.extend([float(cost)] * k)
        self.lo.extend([float(lo)] * k)
        self.hi.extend([float(hi)] * k)
        return np.arange(start, start + k)

    def set_cost(self, j: int, cost: float) -> None:
        self.c[j] = float(cost)

    def le(self, idx, coef, rhs: float) -> int:
        self.le_rows.append((np.asarray(idx, dtype=int), np.asarray(coef, dtype=float), float(rhs)))
        return len(self.le_rows) - 1

    def eq(self, idx, coef, rhs: float) -> int:
        self.eq_rows.append((np.asarray(idx, dtype=int), np.asarray(coef, dtype=float), float(rhs)))
        return len(self.eq_rows) - 1

    # ---- epigraphs ------------------------------------------------------

    def epigraph(self, f: PiecewiseConvex, idx, coef, const: float, t: int) -> Group:
        """``z[t] >= f(coef @ z[idx] + const)``."""
        e = Expr(np.asarray(idx, dtype=int), np.asarray(coef, dtype=float), float(const))
        g = Group(f, e, int(t))
        dom = f.domain
        if math.isfinite(dom.hi):
            g.rows.append((self.le(e.idx, e.coef, dom.hi - e.const), 1.0, "hi"))
        if math.isfinite(dom.lo):
            g.rows.append((self.le(e.idx, -e.coef, e.const - dom.lo), -1.0, "lo"))
        if f.is_pwl:
            for s, b in f.affine_pieces():
                g.rows.append((self._piece_row(e, t, s, b), s, "piece"))
        else:
            for y in _initial_points(f):
                self._add_cut(g, y)
            floor = f.infimum()
            if math.isfinite(floor):
                g.rows.append((self.le([t], [-1.0], -floor), 0.0, "piece"))
            self.smooth.append(g)
        self.groups.append(g)
        return g

    def perspective(self, f: PiecewiseConvex, idx, coef, svar: int, t: int) -> Group:
        """``z[t] >= s f(e / s)`` with ``s = z[svar] >= 0`` and ``e = coef @ z[idx]``;
        for ``s = 0`` this is the recession function of ``f`` at ``e``."""
        e = Expr(np.asarray(idx, dtype=int), np.asarray(coef, dtype=float), 0.0)
        g = Group(f, e, int(t), scale_var=int(svar))
        dom = f.domain
        if math.isfinite(dom.hi):
            g.rows.append((self.le(np.append(e.idx, svar), np.append(e.coef, -dom.hi), 0.0), 1.0, "hi"))
        if math.isfinite(dom.lo):
            g.rows.append((self.le(np.append(e.idx, svar), np.append(-e.coef, dom.lo), 0.0), -1.0, "lo"))
        if f.is_pwl:
            for s, b in f.affine_pieces():
                row = self.le(np.concatenate([e.idx, [svar, t]]), np.concatenate([s * e.coef, [b, -1.0]]), 0.0)
                g.rows.append((row, s, "piece"))
        else:
            for y in _initial_points(f):
                self._add_cut(g, y)
            self.smooth.append(g)
        self.groups.append(g)
        return g

    def _piece_row(self, e: Expr, t: int, s: float, b: float) -> int:
        # s * (coef z + const) + b - t <= 0
        return self.le(np.append(e.idx, t), np.append(s * e.coef, -1.0), -(s * e.const + b))

    def _add_cut(self, g: Group, y: float) -> None:
        s, b = g.f.tangent(y)
        if g.scale_var < 0:
            row = self._piece_row(g.expr, g.t, s, b)
        else:
            row = self.le(np.concatenate([g.expr.idx, [g.scale_var, g.t]]),
                          np.concatenate([s * g.expr.coef, [b, -1.0]]), 0.0)
        g.rows.append((row, s, "piece"))

    # ---- solving ---------------------------------------------------------

    def to_lp(self) -> LinearProgram:
        n = self.n
        F = np.zeros((len(self.le_rows), n))
        gv = np.zeros(len(self.le_rows))
        for i, (idx, coef, rhs) in enumerate(self.le_rows):
            np.add.at(F[i], idx, coef)
            gv[i] = rhs
        E = np.zeros((len(self.eq_rows), n))
        dv = np.zeros(len(self.eq_rows))
        for i, (idx, coef, rhs) in enumerate(self.eq_rows):
            np.add.at(E[i], idx, coef)
            dv[i] = rhs
        return LinearProgram(np.asarray(self.c), E, dv, F, gv, np.asarray(self.lo), np.asarray(self.hi))

    def solve(self) -> ProgramResult:
        cuts = 0
        probes = 0
        while True:
            lp = self.to_lp()
            sol = solve_lp(lp, self.tol)
            if sol.status == UNBOUNDED and self.smooth and probes < 60:
                if self._cut_along_ray(sol.ray):
                    probes += 1
                    continue
            if sol.status != OPTIMAL or not self.smooth:
                return ProgramResult(sol.status, sol.x, sol.objective, sol, self, cuts)
            added = 0
            for g in self.smooth:
                y, val, t = self._group_point(g, sol.x)
                if y is None:
                    continue
                if val - t > self.tol.cut_tol * max(1.0, abs(val)):
                    self._add_cut(g, y)
                    added += 1
            cuts += added
            if added == 0 or cuts >= self.tol.max_cuts:
                res = ProgramResult(sol.status, sol.x, sol.objective, sol, self, cuts)
                if added:
                    res.status = "cut_limit"
                return res

    def _group_point(self, g: Group, z: np.ndarray):
        ev = g.expr.value(z)
        t = float(z[g.t])
        if g.scale_var < 0:
            return ev, g.f(ev), t
        s = float(z[g.scale_var])
        if s <= 1e-12:
            if abs(ev) <= 1e-12:
                return None, 0.0, t
            y = math.copysign(1e12, ev)
            dom = g.f.domain
            y = min(max(y, dom.lo + 1e-9), dom.hi - 1e-9) if math.isfinite(dom.lo) or math.isfinite(dom.hi) else y
            return y, INF, t
        y = ev / s
        dom = g.f.domain
        if not dom.contains(y):
            return None, 0.0, t
        if dom.lo == y and not math.isfinite(g.f.subdifferential(y).hi):
            y += 1e-12
        if not math.isfinite(g.f.subdifferential(y).hi):
            y = y + 1e-9 if y == dom.lo else y
        return y, s * g.f(y), t

    def _cut_along_ray(self, ray: np.ndarray) -> bool:
        added = False
        for g in self.smooth:
            direction = float(g.expr.coef @ ray[g.expr.idx])
            if g.scale_var >= 0:
                sdir = float(ray[g.scale_var])
                direction = direction / sdir if sdir > 1e-12 else direction * 1e6
            if abs(direction) < 1e-12:
                continue
            rec = g.f.recession()(math.copysign(1.0, direction))
            if not math.isfinite(rec) or rec > 0:
                # steep cut far out along the ray direction
                last = [r for r in g.rows if r[2] == "piece"]
                mag = 10.0 ** min(12, 1 + len(last))
                y = math.copysign(mag, direction)
                dom = g.f.domain
                y = min(max(y, dom.lo if math.isfinite(dom.lo) else -INF), dom.hi if math.isfinite(dom.hi) else INF)
                if g.f.domain.lo == y and not math.isfinite(g.f.subdifferential(y).hi):
                    continue
                try:
                    self._add_cut(g, y)
                except ValueError:
                    continue
                added = True
        return added


def _initial_points(f: PiecewiseConvex) -> list[float]:
    dom = f.domain
    s = f.inner or 1.0
    if math.isfinite(dom.lo):
        return [dom.lo + 0.5 * s, dom.lo + s, dom.lo + 2 * s]
    return [-2 * s, 0.0, 2 * s]


__all__ = ["Program", "ProgramResult", "Group", "Expr", "OPTIMAL", "INFEASIBLE", "UNBOUNDED", "NUMERICAL"]
