"""Finite filtered probability spaces as scenario trees, plus adapted processes."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Mapping, Sequence

import numpy as np

PROB_TOL = 1e-12


class TreeError(ValueError):
    pass


class ScenarioTree:
    """Validated scenario tree.

    Nodes are stored in breadth-first order (sorted by time); ``index`` maps
    user ids to positions.  Every node carries its conditional probability
    ``cond[n]`` and its unconditional probability ``prob[n]``.
    """

    def __init__(self, ids, times, parents, cond):
        self.ids = tuple(ids)
        self.t = np.asarray(times, dtype=int)
        self.parent = np.asarray(parents, dtype=int)
        self.cond = np.asarray(cond, dtype=float)
        self.n = len(self.ids)
        self.T = int(self.t.max())
        self.index = {nid: i for i, nid in enumerate(self.ids)}
        self.children: list[list[int]] = [[] for _ in range(self.n)]
        for i in range(1, self.n):
            self.children[self.parent[i]].append(i)
        prob = np.empty(self.n)
        prob[0] = 1.0
        for i in range(1, self.n):
            prob[i] = prob[self.parent[i]] * self.cond[i]
        self.prob = prob
        self.layers = [np.flatnonzero(self.t == s) for s in range(self.T + 1)]
        self.leaves = self.layers[self.T]
        for arr in (self.t, self.parent, self.cond, self.prob):
            arr.setflags(write=False)

    def __repr__(self):
        return f"ScenarioTree(nodes={self.n}, T={self.T})"

    def is_leaf(self, n: int) -> bool:
        return not self.children[n]

    @property
    def inner_nodes(self) -> np.ndarray:
        """Nodes with children (times 0..T-1)."""
        return np.flatnonzero(self.t < self.T)

    def path(self, n: int) -> list[int]:
        """Node indices from the root to ``n``."""
        out = [n]
        while self.parent[out[-1]] >= 0:
            out.append(int(self.parent[out[-1]]))
        return out[::-1]

    def ancestor_at(self, n: int, s: int) -> int:
        while self.t[n] > s:
            n = int(self.parent[n])
        return n

    def to_dict(self) -> dict:
        return {
            "nodes": [
                {
                    "id": self.ids[i],
                    "t": int(self.t[i]),
                    "parent": None if self.parent[i] < 0 else self.ids[self.parent[i]],
                    "prob": float(self.cond[i]),
                }
                for i in range(self.n)
            ]
        }


def build_tree(spec) -> ScenarioTree:
    """Validate a node list (``[{"id", "t", "parent", "prob"}, ...]`` or a
    dict with key ``"nodes"``) and return a :class:`ScenarioTree`."""
    nodes = spec["nodes"] if isinstance(spec, Mapping) else spec
    if not nodes:
        raise TreeError("empty tree")
    by_id = {}
    for nd in nodes:
        nid = nd["id"]
        if nid in by_id:
            raise TreeError(f"duplicate node id {nid!r}")
        by_id[nid] = nd
    for nd in nodes:
        par = nd.get("parent")
        if par is not None and par not in by_id:
            raise TreeError(f"orphan node {nd['id']!r}")

    # walk up from every node: detects cycles
    for nd in nodes:
        seen = set()
        cur = nd["id"]
        while cur is not None:
            if cur in seen:
                raise TreeError(f"cycle detected at node {cur!r}")
            seen.add(cur)
            cur = by_id[cur].get("parent")

    roots = [nd["id"] for nd in nodes if nd.get("parent") is None]
    if len(roots) != 1:
        raise TreeError("orphan node: a tree has exactly one root (forests are rejected)")

    root = roots[0]
    if int(by_id[root]["t"]) != 0:
        raise TreeError("root must have t = 0")
    kids: dict = {nid: [] for nid in by_id}
    for nd in nodes:
        if nd.get("parent") is not None:
            kids[nd["parent"]].append(nd["id"])

    order = [root]
    head = 0
    while head < len(order):
        order.extend(kids[order[head]])
        head += 1

    times, parents, cond = [], [], []
    pos = {nid: i for i, nid in enumerate(order)}
    for nid in order:
        nd = by_id[nid]
        t = int(nd["t"])
        par = nd.get("parent")
        if par is None:
            pr = float(nd.get("prob", 1.0))
            if abs(pr - 1.0) > PROB_TOL:
                raise TreeError("probabilities do not sum to 1 (root probability must be 1)")
            parents.append(-1)
            cond.append(1.0)
        else:
            if t != int(by_id[par]["t"]) + 1:
                raise TreeError(f"node {nid!r}: time must equal parent time + 1")
            pr = float(nd["prob"])
            if not pr > 0.0:
                raise TreeError(f"node {nid!r}: zero-probability branches are not allowed")
            if pr > 1.0 + PROB_TOL:
                raise TreeError(f"node {nid!r}: conditional probability exceeds 1")
            parents.append(pos[par])
            cond.append(pr)
        times.append(t)

    horizon = max(times)
    for nid in order:
        ch = kids[nid]
        if not ch and int(by_id[nid]["t"]) != horizon:
            raise TreeError(f"leaf at wrong depth: node {nid!r}")
        if ch:
            total = sum(float(by_id[c]["prob"]) for c in ch)
            if abs(total - 1.0) > PROB_TOL:
                raise TreeError(f"probabilities do not sum to 1 at node {nid!r} (sum {total!r})")
    return ScenarioTree(order, times, parents, cond)


@dataclass(frozen=True)
class ClaimProcess:
    """Adapted process: one real vector of length ``dim`` per node."""

    tree: ScenarioTree
    values: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        if v.ndim == 1:
            v = v[:, None]
        if v.shape[0] != self.tree.n:
            raise ValueError(f"process needs {self.tree.n} node values, got {v.shape[0]}")
        v = v.copy()
        v.setflags(write=False)
        object.__setattr__(self, "values", v)

    @property
    def dim(self) -> int:
        return self.values.shape[1]

    @property
    def scalar(self) -> np.ndarray:
        if self.dim != 1:
            raise ValueError("process is not scalar")
        return self.values[:, 0]

    def __add__(self, other):
        return ClaimProcess(self.tree, self.values + _vals(other))

    def __sub__(self, other):
        return ClaimProcess(self.tree, self.values - _vals(other))

    def __neg__(self):
        return ClaimProcess(self.tree, -self.values)

    def __mul__(self, a: float):
        return ClaimProcess(self.tree, self.values * float(a))

    __rmul__ = __mul__

    @classmethod
    def zeros(cls, tree: ScenarioTree, dim: int = 1) -> "ClaimProcess":
        return cls(tree, np.zeros((tree.n, dim)))

    @classmethod
    def from_ids(cls, tree: ScenarioTree, mapping: Mapping, dim: int = 1) -> "ClaimProcess":
        v = np.zeros((tree.n, dim))
        for nid, val in mapping.items():
            v[tree.index[_coerce_id(tree, nid)]] = val
        return cls(tree, v)


def _vals(x):
    return x.values if isinstance(x, ClaimProcess) else np.asarray(x, dtype=float)


def _coerce_id(tree: ScenarioTree, nid):
    if nid in tree.index:
        return nid
    for cand in (str(nid),):
        if cand in tree.index:
            return cand
    try:
        k = int(nid)
    except (TypeError, ValueError):
        raise KeyError(f"unknown node id {nid!r}") from None
    if k in tree.index:
        return k
    raise KeyError(f"unknown node id {nid!r}")


# a strategy is stored exactly like a claim; the alias documents intent
PortfolioProcess = ClaimProcess


def unconditional_expectation(tree: ScenarioTree, values: np.ndarray) -> float:
    """``E[sum_t c_t]`` for a scalar node process."""
    return float(np.dot(tree.prob, np.asarray(values, dtype=float)))


def conditional_expectation(tree: ScenarioTree, proc, s: int, t: int) -> np.ndarray:
    """Expectation at the time-``t`` nodes of a time-``s`` quantity.

    ``proc`` is either a :class:`ClaimProcess` (its time-``s`` values are used)
    or an array aligned with ``tree.layers[s]``.  The result is aligned with
    ``tree.layers[t]`` and has the process dimension as trailing axis.
    """
    if t > s:
        raise ValueError("anticipating expectation")
    if isinstance(proc, ClaimProcess):
        vals_s = proc.values[tree.layers[s]]
    else:
        vals_s = np.asarray(proc, dtype=float)
        if vals_s.ndim == 1:
            vals_s = vals_s[:, None]
        if vals_s.shape[0] != len(tree.layers[s]):
            raise ValueError("values do not match the time-s layer")
    full = np.zeros((tree.n, vals_s.shape[1]))
    full[tree.layers[s]] = vals_s * tree.prob[tree.layers[s]][:, None]
    for r in range(s, t, -1):
        for n in tree.layers[r]:
            full[tree.parent[n]] += full[n]
    layer = tree.layers[t]
    return full[layer] / tree.prob[layer][:, None]


def expect_children(tree: ScenarioTree, values: np.ndarray, n: int) -> np.ndarray:
    """One-step conditional expectation at node ``n`` of a node-indexed array."""
    ch = tree.children[n]
    w = tree.cond[ch]
    return np.tensordot(w, np.asarray(values)[ch], axes=1)


def adapted_projection(tree: ScenarioTree, raw) -> ClaimProcess:
    """Adapted projection of a path-indexed payment stream.

    ``raw`` has shape ``(n_leaves, T+1)`` (scalar) or ``(n_leaves, T+1, d)``:
    row ``k`` is the payment sequence along the path ending at
    ``tree.leaves[k]``.  The time-``t`` node value is the conditional
    expectation of the time-``t`` payment given that node.
    """
    arr = np.asarray(raw, dtype=float)
    if arr.ndim == 2:
        arr = arr[:, :, None]
    nl = len(tree.leaves)
    if arr.shape[0] != nl or arr.shape[1] != tree.T + 1 or np.isnan(arr).any():
        raise ValueError("missing path value")
    out = np.zeros((tree.n, arr.shape[2]))
    mass = np.zeros(tree.n)
    for k, leaf in enumerate(tree.leaves):
        pl = tree.prob[leaf]
        for n in tree.path(int(leaf)):
            out[n] += pl * arr[k, tree.t[n]]
            mass[n] += pl
    return ClaimProcess(tree, out / mass[:, None])


def leaf_paths(tree: ScenarioTree) -> list[list[int]]:
    return [tree.path(int(leaf)) for leaf in tree.leaves]


def binomial_tree(T: int, p_up: float = 0.5) -> ScenarioTree:
    """Recombination-free binomial tree with integer ids in BFS order."""
    nodes = [{"id": 0, "t": 0, "parent": None, "prob": 1.0}]
    frontier = [0]
    nxt = 1
    for t in range(1, T + 1):
        new = []
        for par in frontier:
            for pr in (p_up, 1.0 - p_up):
                nodes.append({"id": nxt, "t": t, "parent": par, "prob": pr})
                new.append(nxt)
                nxt += 1
        frontier = new
    return build_tree(nodes)


def random_tree(rng: np.random.Generator, max_T: int = 4, max_nodes: int = 30,
                max_branch: int = 3) -> ScenarioTree:
    """Random tree with positive conditional probabilities."""
    while True:
        T = int(rng.integers(1, max_T + 1))
        nodes = [{"id": 0, "t": 0, "parent": None, "prob": 1.0}]
        frontier = [0]
        ok = True
        for t in range(1, T + 1):
            new = []
            for par in frontier:
                k = int(rng.integers(1, max_branch + 1))
                w = rng.uniform(0.2, 1.0, size=k)
                w = w / w.sum()
                w[-1] = 1.0 - w[:-1].sum()
                for pr in w:
                    nodes.append({"id": len(nodes), "t": t, "parent": par, "prob": float(pr)})
                    new.append(len(nodes) - 1)
            frontier = new
            if len(nodes) > max_nodes:
                ok = False
                break
        if ok:
            return build_tree(nodes)


def as_node_array(tree: ScenarioTree, values: Sequence[float] | np.ndarray) -> np.ndarray:
    v = np.asarray(values, dtype=float)
    if v.shape[0] != tree.n:
        raise ValueError("wrong number of node values")
    return v
