"""JSON model files: schema validation and conversion to model objects."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from importlib import resources

import jsonschema
import numpy as np

from .kernel import PiecewiseConvex
from .market import LossSpec, MarketModel, ModelError
from .tree import ScenarioTree, TreeError, _coerce_id, build_tree


class ModelFileError(ModelError):
    """Unreadable file or schema violation; ``location`` is a JSON path."""

    def __init__(self, message: str, location: str = ""):
        super().__init__(f"{location}: {message}" if location else message)
        self.location = location


@dataclass
class ModelFile:
    version: int
    model: MarketModel
    losses: dict
    claims: dict
    description: str = ""
    raw: dict = field(default_factory=dict, repr=False)

    def loss(self, name: str | None) -> LossSpec:
        if name is None:
            return next(iter(self.losses.values()))
        if name not in self.losses:
            raise ModelFileError(f"unknown loss {name!r}; defined: {sorted(self.losses)}")
        return self.losses[name]

    def claim(self, name: str | None) -> np.ndarray:
        if name is None or name == "zero":
            return np.zeros(self.model.tree.n)
        if name == "cash0":
            c = np.zeros(self.model.tree.n)
            c[0] = 1.0
            return c
        if name not in self.claims:
            raise ModelFileError(f"unknown claim {name!r}; defined: {sorted(self.claims)}")
        return self.claims[name]


def schema() -> dict:
    text = resources.files("illiq").joinpath("data/model.schema.json").read_text()
    return json.loads(text)


def _validate(data) -> None:
    validator = jsonschema.Draft202012Validator(schema())
    errors = sorted(validator.iter_errors(data), key=lambda e: list(e.absolute_path))
    if errors:
        err = errors[0]
        loc = "$" + "".join(f"[{p!r}]" if isinstance(p, str) else f"[{p}]" for p in err.absolute_path)
        raise ModelFileError(f"schema violation: {err.message}", loc)


def _num(v) -> float:
    if isinstance(v, str):
        return {"+inf": math.inf, "inf": math.inf, "-inf": -math.inf}[v]
    return float(v)


def parse_function(d: dict) -> PiecewiseConvex:
    kind = d["kind"]
    if kind == "linear":
        return PiecewiseConvex.linear(float(d.get("slope", 1.0)))
    if kind == "indicator_interval":
        return PiecewiseConvex.indicator_interval(_num(d.get("lo", "-inf")), _num(d.get("hi", "+inf")))
    return PiecewiseConvex.from_dict(d)


def _node_map(tree: ScenarioTree, mapping: dict, where: str) -> dict:
    out = {}
    for key, val in mapping.items():
        try:
            out[tree.index[_coerce_id(tree, key)]] = val
        except KeyError:
            raise ModelFileError(f"unknown node id {key!r}", f"{where}[{key!r}]") from None
    return out


def _per_node(tree: ScenarioTree, section: dict, where: str, default=None):
    """Expand a ``per_time``/``per_node`` section to a node list."""
    if "per_time" in section:
        rows = section["per_time"]
        if len(rows) != tree.T + 1:
            raise ModelFileError(f"need {tree.T + 1} entries, got {len(rows)}", f"{where}['per_time']")
        return [rows[int(tree.t[n])] for n in range(tree.n)], True
    m = _node_map(tree, section["per_node"], f"{where}['per_node']")
    return [m.get(n, default) for n in range(tree.n)], False


def parse_model(data: dict) -> ModelFile:
    _validate(data)
    try:
        tree = build_tree(data["tree"]["nodes"])
    except TreeError as exc:
        raise ModelFileError(str(exc), "$['tree']") from exc
    mk = data["market"]
    assets = mk["assets"]
    J = len(assets)
    liquid = bool(mk.get("liquid_cash", False))
    rows, cost_bc = _per_node(tree, mk["costs"], "$['market']['costs']")
    costs = []
    for n, row in enumerate(rows):
        if row is None:
            raise ModelFileError(f"no costs for node {tree.ids[n]!r}", "$['market']['costs']")
        if len(row) != J:
            raise ModelFileError(f"node {tree.ids[n]!r}: {len(row)} cost functions for {J} assets",
                                 "$['market']['costs']")
        costs.append([None if f is None else parse_function(f) for f in row])
    cons, con_bc = None, False
    if "constraints" in mk:
        polys, con_bc = _per_node(tree, mk["constraints"], "$['market']['constraints']")
        cons = [None if p is None else (np.asarray(p["A"], dtype=float).reshape(-1, J),
                                        np.asarray(p["b"], dtype=float)) for p in polys]
    theta = None
    if "theta" in mk:
        theta = np.zeros((tree.n, J))
        for n, v in _node_map(tree, mk["theta"]["per_node"], "$['market']['theta']['per_node']").items():
            if len(v) != J:
                raise ModelFileError(f"theta needs {J} entries", "$['market']['theta']")
            theta[n] = v
    model = MarketModel.build(tree, costs, cons, theta, liquid_cash=liquid, assets=assets,
                              broadcast={"costs": cost_bc, "constraints": con_bc})
    losses = {}
    for name, spec in data["loss"].items():
        if "per_time" in spec:
            fs = [parse_function(f) for f in spec["per_time"]]
            if len(fs) != tree.T + 1:
                raise ModelFileError(f"need {tree.T + 1} entries", f"$['loss'][{name!r}]['per_time']")
            losses[name] = LossSpec(fs)
        elif "all_times" in spec:
            losses[name] = LossSpec.broadcast(parse_function(spec["all_times"]), tree.T)
        else:
            losses[name] = LossSpec.terminal(parse_function(spec["terminal"]), tree.T)
    claims = {}
    for name, spec in data.get("claims", {}).items():
        c = np.zeros(tree.n)
        if "per_time" in spec:
            vals = spec["per_time"]
            if len(vals) != tree.T + 1:
                raise ModelFileError(f"need {tree.T + 1} entries", f"$['claims'][{name!r}]['per_time']")
            c = np.array([vals[int(tree.t[n])] for n in range(tree.n)], dtype=float)
        else:
            for n, v in _node_map(tree, spec["per_node"], f"$['claims'][{name!r}]['per_node']").items():
                c[n] = v
        claims[name] = c
    return ModelFile(data["version"], model, losses, claims, data.get("description", ""), data)


def load_model(path) -> ModelFile:
    try:
        with open(path) as fh:
            data = json.load(fh)
    except OSError as exc:
        raise ModelFileError(f"cannot read model file: {exc.strerror}", str(path)) from exc
    except json.JSONDecodeError as exc:
        raise ModelFileError(f"invalid JSON: {exc.msg} (line {exc.lineno})", str(path)) from exc
    return parse_model(data)


def example_path(name: str):
    """Path of a bundled example model (``bin1``, ``arbitrage``, ...)."""
    return resources.files("illiq").joinpath(f"data/examples/{name}.json")


__all__ = ["ModelFile", "ModelFileError", "example_path", "load_model", "parse_function",
           "parse_model", "schema"]
