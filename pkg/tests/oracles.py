"""Independent reference solvers used to cross-check the LP-based code.

Neither oracle touches the package's LP machinery: the primal oracle is a
projected subgradient method on the strategy (finished by a log-sum-exp
smoothing polish), the superhedging oracle enumerates every vertex of the
feasible polyhedron.
"""

from __future__ import annotations

import itertools
import math

import numpy as np
from scipy.optimize import minimize
from scipy.special import logsumexp, softmax


def _box(model, n):
    """Per-asset bounds at node ``n`` from position-limit rows ``+-e_j x <= b``."""
    J = model.J
    lo = np.full(J, -np.inf)
    hi = np.full(J, np.inf)
    for a, b in zip(model.A[n], model.b[n]):
        nz = np.flatnonzero(a)
        if len(nz) != 1:
            raise ValueError("oracle handles position limits only")
        j = nz[0]
        if a[j] > 0:
            hi[j] = min(hi[j], b / a[j])
        else:
            lo[j] = max(lo[j], b / a[j])
    return lo, hi


def _pieces(f, width):
    """Finite convex pwl ``f`` as ``max_k (s_k y + b_k)``, padded to ``width``."""
    pc = f.affine_pieces()
    if not f.is_pwl or any(not math.isfinite(s) for s, _ in pc) or len(f.slopes) != len(pc):
        raise ValueError("oracle needs finite piecewise-linear functions")
    pc = pc + [pc[-1]] * (width - len(pc))
    return np.array([s for s, _ in pc]), np.array([b for _, b in pc])


class _Compiled:
    """Vectorized objective and subgradient of ``E V(S(dx) + c)``."""

    def __init__(self, model, loss, c):
        tree = model.tree
        self.tree, self.J = tree, model.J
        w = max(len(f.affine_pieces()) for row in model.costs for f in row)
        w = max(w, max(len(loss.at(tree, n).affine_pieces()) for n in range(tree.n)))
        cs = [[_pieces(f, w) for f in row] for row in model.costs]
        self.cs = np.array([[p[0] for p in row] for row in cs])      # (n, J, w)
        self.cb = np.array([[p[1] for p in row] for row in cs])
        vs = [_pieces(loss.at(tree, n), w) for n in range(tree.n)]
        self.vs = np.array([v[0] for v in vs])                          # (n, w)
        self.vb = np.array([v[1] for v in vs])
        self.c = np.asarray(c, dtype=float)
        self.parent = np.asarray(tree.parent)
        self.prob = np.asarray(tree.prob)

    def delta(self, x):
        dx = x.copy()
        dx[1:] -= x[self.parent[1:]]
        return dx

    def value(self, x):
        dx = self.delta(x)
        cost = np.max(self.cs * dx[:, :, None] + self.cb, axis=2).sum(axis=1)
        return float(self.prob @ np.max(self.vs * (cost + self.c)[:, None] + self.vb, axis=1))

    def subgradient(self, x):
        dx = self.delta(x)
        aff = self.cs * dx[:, :, None] + self.cb
        k = np.argmax(aff, axis=2)
        cost = np.take_along_axis(aff, k[:, :, None], axis=2)[:, :, 0].sum(axis=1)
        ds = np.take_along_axis(self.cs, k[:, :, None], axis=2)[:, :, 0]
        arg = cost + self.c
        kv = np.argmax(self.vs * arg[:, None] + self.vb, axis=1)
        dv = self.vs[np.arange(len(kv)), kv]
        gd = (self.prob * dv)[:, None] * ds
        g = gd.copy()
        np.add.at(g, self.parent[1:], -gd[1:])
        return g


    def smoothed(self, x, mu):
        """Value and gradient with every max replaced by ``mu * logsumexp(./mu)``.

        Valid as a convex surrogate because the loss slopes are nonnegative;
        it overestimates the true objective by at most ``mu * log(width) *
        (1 + max loss slope * J)``.
        """
        dx = self.delta(x)
        aff = (self.cs * dx[:, :, None] + self.cb) / mu
        cost = mu * logsumexp(aff, axis=2)
        ds = (softmax(aff, axis=2) * self.cs).sum(axis=2)
        arg = cost.sum(axis=1) + self.c
        av = (self.vs * arg[:, None] + self.vb) / mu
        val = float(self.prob @ (mu * logsumexp(av, axis=1)))
        dv = (softmax(av, axis=1) * self.vs).sum(axis=1)
        gd = (self.prob * dv)[:, None] * ds
        g = gd.copy()
        np.add.at(g, self.parent[1:], -gd[1:])
        return val, g


def alm_objective(model, loss, c, x):
    return _Compiled(model, loss, c).value(np.asarray(x, dtype=float))


def projected_subgradient(model, loss, c, iters=50_000):
    """Minimize ``E V(S(dx) + c)`` over boxed strategies (finite pwl data)
    with normalized steps shrinking geometrically and restarts from the
    best iterate; the best point is then polished on smoothed surrogates."""
    tree = model.tree
    J = model.J
    prob = _Compiled(model, loss, c)
    lo = np.full((tree.n, J), -np.inf)
    hi = np.full((tree.n, J), np.inf)
    for n in range(tree.n):
        if tree.is_leaf(n):
            lo[n] = hi[n] = 0.0
        else:
            lo[n], hi[n] = _box(model, n)
    x = np.zeros((tree.n, J))
    best_x, best_f = x.copy(), prob.value(x)
    rounds = 5
    per = iters // rounds
    step0 = 1.0
    for _ in range(rounds):
        x = best_x.copy()
        gamma = (1e-10 / step0) ** (1.0 / per)
        step = step0
        for _ in range(per):
            g = prob.subgradient(x)
            g[lo == hi] = 0.0
            norm = float(np.linalg.norm(g))
            if norm == 0.0:
                break
            x = np.clip(x - step * g / norm, lo, hi)
            fx = prob.value(x)
            if fx < best_f:
                best_f, best_x = fx, x.copy()
            step *= gamma
        step0 *= 0.1
    # polish: smoothed surrogates with shrinking temperature, warm-started
    bounds = [(a if math.isfinite(a) else None, b if math.isfinite(b) else None)
              for a, b in zip(lo.ravel(), hi.ravel())]
    x = best_x.copy()
    for mu in (1e-2, 1e-3, 1e-4, 1e-5, 1e-6, 1e-7, 1e-8):
        res = minimize(lambda v: _flat(prob.smoothed(v.reshape(x.shape), mu)), x.ravel(), jac=True,
                       method="L-BFGS-B", bounds=bounds, options={"maxiter": 5000, "gtol": 1e-14, "ftol": 1e-16})
        x = np.clip(res.x.reshape(x.shape), lo, hi)
        fx = prob.value(x)
        if fx < best_f:
            best_f, best_x = fx, x.copy()
    return best_f, best_x


def _flat(vg):
    return vg[0], vg[1].ravel()


def superhedge_by_vertices(model, c, p, side="sup"):
    """Optimal ``alpha`` of the superhedging LP by enumerating the vertices of
    ``{(alpha, x) | sum_j piece_j(dx_nj) + c_n - alpha p_n <= 0, A x <= b}``
    (with ``-c`` and ``-alpha`` for ``side="inf"``).

    Costs must be finite piecewise-linear; every inner node must carry a box
    on all assets so the polyhedron is pointed and bounded in ``x``.
    """
    tree = model.tree
    J = model.J
    inner = [n for n in range(tree.n) if not tree.is_leaf(n)]
    pos = {n: 1 + k * J for k, n in enumerate(inner)}
    nv = 1 + len(inner) * J
    sgn = 1.0 if side == "sup" else -1.0
    rows, rhs = [], []
    for n in range(tree.n):
        pieces = [f.affine_pieces() for f in model.costs[n]]
        for combo in itertools.product(*pieces):
            r = np.zeros(nv)
            const = sgn * c[n]
            for j, (s, b) in enumerate(combo):
                if n in pos:
                    r[pos[n] + j] += s
                par = int(tree.parent[n])
                if par >= 0:
                    r[pos[par] + j] -= s
                const += b
            r[0] = -sgn * p[n]
            rows.append(r)
            rhs.append(-const)
    for n in inner:
        for a, b in zip(model.A[n], model.b[n]):
            r = np.zeros(nv)
            r[pos[n]:pos[n] + J] = a
            rows.append(r)
            rhs.append(b)
    M = np.array(rows)
    h = np.array(rhs)
    # ``sup`` minimizes alpha; ``inf`` (rows written for -c) maximizes it
    best = math.inf if side == "sup" else -math.inf
    combos = itertools.combinations(range(M.shape[0]), nv)
    while True:
        idx = np.array(list(itertools.islice(combos, 50_000)), dtype=np.intp)
        if idx.size == 0:
            break
        sub = M[idx]
        ok = np.abs(np.linalg.det(sub)) > 1e-12
        if not ok.any():
            continue
        z = np.linalg.solve(sub[ok], h[idx[ok]][:, :, None])[:, :, 0]
        feas = np.all(z @ M.T <= h + 1e-9, axis=1)
        if feas.any():
            a = z[feas, 0]
            best = min(best, a.min()) if side == "sup" else max(best, a.max())
    return float(best)
