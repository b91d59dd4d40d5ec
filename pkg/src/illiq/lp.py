"""Dense revised simplex with dual multipliers and certificates.

Problem form::

    minimize    c @ x
    subject to  E @ x == d
                F @ x <= g
                lo <= x <= hi        (extended reals)

Multiplier conventions (all reported in :class:`LPSolution`): with
``y_eq`` free and ``y_ineq, z_lo, z_hi >= 0``,

    c + E.T @ y_eq + F.T @ y_ineq - z_lo + z_hi == 0
    dual objective = -d @ y_eq - g @ y_ineq + lo @ z_lo - hi @ z_hi

so ``y_ineq`` is the price of tightening ``F x <= g``.  An infeasibility
certificate uses the same fields with ``c`` dropped and a strictly positive
dual objective; an unboundedness certificate is a primal ray.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from ._kernels import eta_update, ratio_test
from .config import Tolerances, default_tolerances

OPTIMAL = "optimal"
INFEASIBLE = "infeasible"
UNBOUNDED = "unbounded"
NUMERICAL = "numerical_error"


@dataclass
class LinearProgram:
    c: np.ndarray
    E: np.ndarray | None = None
    d: np.ndarray | None = None
    F: np.ndarray | None = None
    g: np.ndarray | None = None
    lo: np.ndarray | None = None
    hi: np.ndarray | None = None

    def __post_init__(self):
        self.c = np.asarray(self.c, dtype=float).ravel()
        n = self.c.shape[0]
        self.E = np.zeros((0, n)) if self.E is None else np.asarray(self.E, dtype=float).reshape(-1, n)
        self.d = np.zeros(0) if self.d is None else np.asarray(self.d, dtype=float).ravel()
        self.F = np.zeros((0, n)) if self.F is None else np.asarray(self.F, dtype=float).reshape(-1, n)
        self.g = np.zeros(0) if self.g is None else np.asarray(self.g, dtype=float).ravel()
        self.lo = np.full(n, -np.inf) if self.lo is None else np.asarray(self.lo, dtype=float).ravel()
        self.hi = np.full(n, np.inf) if self.hi is None else np.asarray(self.hi, dtype=float).ravel()
        if self.E.shape[0] != self.d.shape[0] or self.F.shape[0] != self.g.shape[0]:
            raise ValueError("constraint blocks and right-hand sides disagree in length")
        if self.lo.shape[0] != n or self.hi.shape[0] != n:
            raise ValueError("bounds have the wrong length")
        for name in ("c", "E", "d", "F", "g"):
            if not np.all(np.isfinite(getattr(self, name))):
                raise ValueError(f"{name} must be finite")
        if np.any(self.lo > self.hi) or np.any(self.lo == np.inf) or np.any(self.hi == -np.inf):
            raise ValueError("inconsistent variable bounds")

    @property
    def n(self) -> int:
        return self.c.shape[0]

    def to_lp_format(self) -> str:
        """Human-readable dump in CPLEX-like LP text format (debugging aid)."""
        def expr(row):
            terms = [f"{v:+.17g} x{j}" for j, v in enumerate(row) if v != 0.0]
            return " ".join(terms) if terms else "0 x0"
        lines = ["Minimize", f" obj: {expr(self.c)}", "Subject To"]
        for i, row in enumerate(self.E):
            lines.append(f" e{i}: {expr(row)} = {self.d[i]:.17g}")
        for i, row in enumerate(self.F):
            lines.append(f" f{i}: {expr(row)} <= {self.g[i]:.17g}")
        lines.append("Bounds")
        for j in range(self.n):
            lo = "-inf" if self.lo[j] == -np.inf else f"{self.lo[j]:.17g}"
            hi = "+inf" if self.hi[j] == np.inf else f"{self.hi[j]:.17g}"
            lines.append(f" {lo} <= x{j} <= {hi}")
        lines.append("End")
        return "\n".join(lines)


@dataclass
class LPSolution:
    status: str
    x: np.ndarray | None = None
    objective: float = math.nan
    y_eq: np.ndarray | None = None
    y_ineq: np.ndarray | None = None
    z_lo: np.ndarray | None = None
    z_hi: np.ndarray | None = None
    ray: np.ndarray | None = None
    farkas: dict | None = None
    iterations: int = 0
    message: str = ""
    residuals: dict = field(default_factory=dict)

    @property
    def ok(self) -> bool:
        return self.status == OPTIMAL


def dual_objective(lp: LinearProgram, y_eq, y_ineq, z_lo, z_hi, with_costs: bool = True) -> float:
    val = -float(lp.d @ y_eq) - float(lp.g @ y_ineq)
    m_lo = z_lo != 0
    m_hi = z_hi != 0
    val += float(lp.lo[m_lo] @ z_lo[m_lo]) - float(lp.hi[m_hi] @ z_hi[m_hi])
    return val


def _bound_multipliers(lp: LinearProgram, r: np.ndarray):
    """Split ``r = z_lo - z_hi`` using only finite bounds; leftover is a
    dual residual."""
    z_lo = np.where(np.isfinite(lp.lo), np.maximum(r, 0.0), 0.0)
    z_hi = np.where(np.isfinite(lp.hi), np.maximum(-r, 0.0), 0.0)
    resid = r - z_lo + z_hi
    return z_lo, z_hi, resid


def verify_ray(lp: LinearProgram, ray: np.ndarray, tol: float = 1e-8) -> bool:
    """Unbounded direction: feasible direction with negative cost."""
    scale = max(1.0, float(np.max(np.abs(ray))))
    r = ray / scale
    ok = np.all(np.abs(lp.E @ r) <= tol) if lp.E.shape[0] else True
    ok = ok and (np.all(lp.F @ r <= tol) if lp.F.shape[0] else True)
    ok = ok and np.all(r[np.isfinite(lp.lo)] >= -tol) and np.all(r[np.isfinite(lp.hi)] <= tol)
    return bool(ok and float(lp.c @ r) < -tol)


def verify_farkas(lp: LinearProgram, cert: dict, tol: float = 1e-8) -> bool:
    """Infeasibility certificate: multipliers with zero combination and a
    positive dual objective."""
    y, mu, zl, zh = cert["y_eq"], cert["y_ineq"], cert["z_lo"], cert["z_hi"]
    if np.any(mu < -tol) or np.any(zl < -tol) or np.any(zh < -tol):
        return False
    comb = lp.E.T @ y + lp.F.T @ mu - zl + zh
    scale = max(1.0, float(np.max(np.abs(np.concatenate([y, mu, zl, zh])))) if
                (y.size + mu.size + zl.size + zh.size) else 1.0)
    if np.max(np.abs(comb), initial=0.0) > tol * scale:
        return False
    return dual_objective(lp, y, mu, zl, zh) > tol * scale


class _Standard:
    """Standard-form image ``A z = b, z >= 0`` of a LinearProgram."""

    def __init__(self, lp: LinearProgram):
        n = lp.n
        cols = []  # (x index, sign)
        shift = np.zeros(n)
        ub_rows = []
        for j in range(n):
            lo, hi = lp.lo[j], lp.hi[j]
            if np.isfinite(lo):
                shift[j] = lo
                cols.append((j, 1.0))
                if np.isfinite(hi):
                    ub_rows.append((len(cols) - 1, hi - lo))
            elif np.isfinite(hi):
                shift[j] = hi
                cols.append((j, -1.0))
            else:
                cols.append((j, 1.0))
                cols.append((j, -1.0))
        nz = len(cols)
        # partner column of each half of a split free variable
        self.twin = np.full(nz, -1, dtype=np.int64)
        for k in range(nz - 1):
            if cols[k][0] == cols[k + 1][0]:
                self.twin[k], self.twin[k + 1] = k + 1, k
        T = np.zeros((n, nz))
        for k, (j, s) in enumerate(cols):
            T[j, k] = s
        me, mi, mu = lp.E.shape[0], lp.F.shape[0], len(ub_rows)
        m = me + mi + mu
        nslack = mi + mu
        A = np.zeros((m, nz + nslack))
        b = np.zeros(m)
        A[:me, :nz] = lp.E @ T
        b[:me] = lp.d - lp.E @ shift
        A[me:me + mi, :nz] = lp.F @ T
        b[me:me + mi] = lp.g - lp.F @ shift
        for k, (col, width) in enumerate(ub_rows):
            A[me + mi + k, col] = 1.0
            b[me + mi + k] = width
        for k in range(nslack):
            A[me + k, nz + k] = 1.0
        sign = np.where(b < 0, -1.0, 1.0)
        # equilibrate rows; multipliers are mapped back through ``rscale``
        rmax = np.max(np.abs(A), axis=1, initial=0.0)
        rscale = sign / np.where(rmax > 0, rmax, 1.0)
        A *= rscale[:, None]
        b *= rscale
        self.A, self.b, self.sign, self.rscale = A, b, sign, rscale
        self.T, self.shift = T, shift
        self.nz, self.me, self.mi, self.mu = nz, me, mi, mu
        self.cost = np.concatenate([lp.c @ T, np.zeros(nslack)])
        self.const = float(lp.c @ shift)

    def to_x(self, z: np.ndarray) -> np.ndarray:
        return self.shift + self.T @ z[: self.nz]

    def ray_to_x(self, z: np.ndarray) -> np.ndarray:
        return self.T @ z[: self.nz]

    def row_multipliers(self, pi: np.ndarray):
        """Map standard-form row prices to (y_eq, y_ineq)."""
        p = pi * self.rscale
        return -p[: self.me], -p[self.me:self.me + self.mi]


def _simplex(A, b, cost, basis, binv, allowed, tol: Tolerances, max_iter: int, twin=None):
    """Revised simplex iterations from a feasible basis.

    Dantzig pricing with a Harris ratio test; after ``lp_stall_limit``
    iterations without progress, Bland's rule with the exact ratio test.
    ``twin[j]`` names the other half of a split free variable; a half may
    not enter while its twin is basic (its exact reduced cost is zero, so
    only rounding could select it, and the basis would become singular).
    Returns (status, basis, binv, xb, iterations, entering column).
    """
    m, N = A.shape
    xb = binv @ b
    if twin is None:
        twin = np.full(N, -1, dtype=np.int64)
    elif twin.shape[0] < N:
        twin = np.concatenate([twin, np.full(N - twin.shape[0], -1, dtype=np.int64)])
    has_twin = twin >= 0
    nonbasic = np.ones(N, dtype=bool)
    nonbasic[basis] = False
    use_bland = False
    best_obj = math.inf
    stall = 0
    since_refactor = 0
    opt_tol = tol.lp_optimality * max(1.0, float(np.max(np.abs(cost), initial=0.0)))
    harris = 0.1 * tol.lp_feasibility
    it = 0
    while it < max_iter:
        it += 1
        pi = binv.T @ cost[basis]
        red = cost - A.T @ pi
        cand = nonbasic & allowed & (red < -opt_tol)
        cand[has_twin] &= nonbasic[twin[has_twin]]
        if not cand.any():
            return "optimal", basis, binv, xb, it, -1
        if use_bland:
            j = int(np.flatnonzero(cand)[0])
        else:
            idx = np.flatnonzero(cand)
            j = int(idx[np.argmin(red[idx])])
        dcol = binv @ A[:, j]
        ptol = max(tol.lp_pivot, 1e-9 * float(np.max(np.abs(dcol))))
        r = ratio_test(xb, dcol, basis, ptol, 0.0 if use_bland else harris)
        if r < 0:
            return "unbounded", basis, binv, xb, it, j
        theta = max(xb[r], 0.0) / dcol[r]
        xb = xb - theta * dcol
        xb[r] = theta
        nonbasic[basis[r]] = True
        nonbasic[j] = False
        basis[r] = j
        eta_update(binv, dcol, r)
        since_refactor += 1
        if since_refactor >= tol.lp_refactor_every:
            try:
                binv = np.ascontiguousarray(np.linalg.inv(A[:, basis]))
            except np.linalg.LinAlgError:
                return "numerical_error", basis, binv, xb, it, -1
            xb = binv @ b
            since_refactor = 0
        obj = float(cost[basis] @ xb)
        if obj < best_obj - 1e-12 * max(1.0, abs(best_obj) if math.isfinite(best_obj) else 1.0):
            best_obj = obj
            stall = 0
        else:
            stall += 1
            if stall >= tol.lp_stall_limit:
                use_bland = True
    return "numerical_error", basis, binv, xb, it, -1


def _settle(A, b, cost, basis, binv, allowed, tol, max_iter, twin=None):
    """Run the simplex, then refactor and re-price until a fresh basis
    inverse confirms the terminal status."""
    total = 0
    for _ in range(4):
        status, basis, binv, xb, it, enter = _simplex(A, b, cost, basis, binv, allowed, tol, max_iter, twin)
        total += it
        if status != "optimal":
            return status, basis, binv, xb, total, enter
        try:
            fresh = np.ascontiguousarray(np.linalg.inv(A[:, basis]))
        except np.linalg.LinAlgError:
            return "numerical_error", basis, binv, xb, total, -1
        binv = fresh
        if it == 1:
            break
    return status, basis, binv, binv @ b, total, enter


def solve_lp(lp: LinearProgram, tol: Tolerances | None = None) -> LPSolution:
    """Solve ``lp``; deterministic for a fixed input."""
    tol = tol or default_tolerances()
    st = _Standard(lp)
    A, b = st.A, st.b
    m, N = A.shape
    max_iter = 50 * (m + N) + 1000

    if m == 0:
        return _solve_trivial(lp, st)

    # phase 1: slack columns start basic where possible, artificials elsewhere
    basis = np.empty(m, dtype=np.int64)
    need_art = []
    slack0 = st.nz
    for i in range(m):
        if i >= st.me and st.sign[i] > 0:
            basis[i] = slack0 + (i - st.me)
        else:
            need_art.append(i)
    na = len(need_art)
    A1 = np.hstack([A, np.zeros((m, na))])
    for k, i in enumerate(need_art):
        A1[i, N + k] = 1.0
        basis[i] = N + k
    cost1 = np.concatenate([np.zeros(N), np.ones(na)])
    binv = np.ascontiguousarray(np.eye(m))
    allowed = np.ones(N + na, dtype=bool)
    iters = 0
    if na:
        status, basis, binv, xb, it, _ = _settle(A1, b, cost1, basis, binv, allowed, tol, max_iter, st.twin)
        iters += it
        if status != "optimal":
            return LPSolution(NUMERICAL, message=f"phase 1 ended with {status}", iterations=iters)
        infeas = float(cost1[basis] @ xb)
        if infeas > tol.lp_feasibility * max(1.0, float(np.max(np.abs(b)))):
            pi = binv.T @ cost1[basis]
            return _infeasible(lp, st, pi, iters)
        # pivot remaining artificials out of the basis where possible
        for r in range(m):
            if basis[r] >= N:
                row = binv[r] @ A
                row[basis[basis < N]] = 0.0
                cands = np.flatnonzero(np.abs(row) > 1e-7)
                if cands.size:
                    j = int(cands[0])
                    dcol = binv @ A1[:, j]
                    basis[r] = j
                    eta_update(binv, dcol, r)
        allowed[N:] = False
    else:
        xb = b.copy()

    cost2 = np.concatenate([st.cost, np.zeros(na)])
    status, basis, binv, xb, it, enter = _settle(A1, b, cost2, basis, binv, allowed, tol, max_iter, st.twin)
    iters += it
    if status == "numerical_error":
        return LPSolution(NUMERICAL, message="simplex did not converge", iterations=iters)
    if status == "unbounded":
        dcol = binv @ A1[:, enter]
        zr = np.zeros(N + na)
        zr[enter] = 1.0
        zr[basis] -= dcol
        ray = st.ray_to_x(zr)
        return LPSolution(UNBOUNDED, ray=ray, objective=-math.inf, iterations=iters,
                          message="objective unbounded below")

    # polish: refactor and recompute from the final basis
    try:
        binv = np.linalg.inv(A1[:, basis])
    except np.linalg.LinAlgError:
        return LPSolution(NUMERICAL, message="singular final basis", iterations=iters)
    xb = binv @ b
    z = np.zeros(N + na)
    z[basis] = np.maximum(xb, 0.0)
    x = st.to_x(z)
    pi = binv.T @ cost2[basis]
    y_eq, y_ineq = st.row_multipliers(pi)
    y_ineq = np.maximum(y_ineq, 0.0)
    r = lp.c + lp.E.T @ y_eq + lp.F.T @ y_ineq
    z_lo, z_hi, dres = _bound_multipliers(lp, r)
    obj = float(lp.c @ x)
    sol = LPSolution(OPTIMAL, x=x, objective=obj, y_eq=y_eq, y_ineq=y_ineq,
                     z_lo=z_lo, z_hi=z_hi, iterations=iters)
    sol.residuals = residuals(lp, sol, dual_resid=dres)
    scale = 1.0 + float(np.max(np.abs(np.concatenate([lp.d, lp.g, [0.0]]))))
    if sol.residuals["primal"] > 100 * tol.lp_feasibility * scale:
        sol.status = NUMERICAL
        sol.message = f"primal residual {sol.residuals['primal']:.3g} after polishing"
    return sol


def residuals(lp: LinearProgram, sol: LPSolution, dual_resid=None) -> dict:
    x = sol.x
    pr = 0.0
    if lp.E.shape[0]:
        pr = max(pr, float(np.max(np.abs(lp.E @ x - lp.d))))
    if lp.F.shape[0]:
        pr = max(pr, float(np.max(lp.F @ x - lp.g, initial=0.0)))
    pr = max(pr, float(np.max(lp.lo - x, initial=0.0)), float(np.max(x - lp.hi, initial=0.0)))
    if dual_resid is None:
        r = lp.c + lp.E.T @ sol.y_eq + lp.F.T @ sol.y_ineq - sol.z_lo + sol.z_hi
    else:
        r = dual_resid
    dr = float(np.max(np.abs(r), initial=0.0))
    slack = lp.g - lp.F @ x if lp.F.shape[0] else np.zeros(0)
    cs = float(np.max(np.abs(slack * sol.y_ineq), initial=0.0))
    fin_lo = np.isfinite(lp.lo)
    fin_hi = np.isfinite(lp.hi)
    cs = max(cs, float(np.max(np.abs((x - lp.lo)[fin_lo] * sol.z_lo[fin_lo]), initial=0.0)))
    cs = max(cs, float(np.max(np.abs((lp.hi - x)[fin_hi] * sol.z_hi[fin_hi]), initial=0.0)))
    dual_obj = dual_objective(lp, sol.y_eq, sol.y_ineq, sol.z_lo, sol.z_hi)
    return {"primal": pr, "dual": dr, "complementarity": cs,
            "gap": abs(float(lp.c @ x) - dual_obj), "dual_objective": dual_obj}


def _infeasible(lp: LinearProgram, st: _Standard, pi: np.ndarray, iters: int) -> LPSolution:
    y_eq, y_ineq = st.row_multipliers(pi)
    y_ineq = np.maximum(y_ineq, 0.0)
    r = lp.E.T @ y_eq + lp.F.T @ y_ineq
    z_lo, z_hi, _ = _bound_multipliers(lp, r)
    cert = {"y_eq": y_eq, "y_ineq": y_ineq, "z_lo": z_lo, "z_hi": z_hi}
    cert["value"] = dual_objective(lp, y_eq, y_ineq, z_lo, z_hi)
    return LPSolution(INFEASIBLE, farkas=cert, objective=math.inf, iterations=iters,
                      message="constraints are inconsistent")


def _solve_trivial(lp: LinearProgram, st: _Standard) -> LPSolution:
    """No constraint rows at all: each variable sits at its cheaper bound."""
    x = np.zeros(lp.n)
    for j in range(lp.n):
        cj = lp.c[j]
        if cj > 0:
            x[j] = lp.lo[j]
        elif cj < 0:
            x[j] = lp.hi[j]
        else:
            x[j] = lp.lo[j] if np.isfinite(lp.lo[j]) else (lp.hi[j] if np.isfinite(lp.hi[j]) else 0.0)
        if not np.isfinite(x[j]):
            ray = np.zeros(lp.n)
            ray[j] = -np.sign(cj)
            return LPSolution(UNBOUNDED, ray=ray, objective=-math.inf, message="objective unbounded below")
    z_lo = np.where(lp.c > 0, lp.c, 0.0)
    z_hi = np.where(lp.c < 0, -lp.c, 0.0)
    sol = LPSolution(OPTIMAL, x=x, objective=float(lp.c @ x), y_eq=np.zeros(0), y_ineq=np.zeros(0),
                     z_lo=z_lo, z_hi=z_hi)
    sol.residuals = residuals(lp, sol)
    return sol
