"""Centralized numerical tolerances.

Defaults can be overridden by a JSON file named in the ``ILLIQ_CONFIG``
environment variable, e.g. ``{"lp_feasibility": 1e-9, "max_cuts": 800}``.
"""

from __future__ import annotations

import json
import os
from dataclasses import asdict, dataclass, fields, replace


@dataclass(frozen=True)
class Tolerances:
    lp_feasibility: float = 1e-8
    lp_pivot: float = 1e-10
    lp_optimality: float = 1e-9
    lp_refactor_every: int = 60
    lp_stall_limit: int = 40
    cut_tol: float = 1e-7
    max_cuts: int = 500
    optimality_check: float = 1e-7
    dual_feasibility: float = 1e-6
    bisection: float = 1e-9
    golden: float = 1e-9
    max_expansions: int = 200

    def to_dict(self) -> dict:
        return asdict(self)


class ConfigError(ValueError):
    pass


def load_tolerances(path: str | None = None, **overrides) -> Tolerances:
    """Defaults, then the ``ILLIQ_CONFIG`` file (or ``path``), then keywords."""
    tol = Tolerances()
    path = path or os.environ.get("ILLIQ_CONFIG")
    if path:
        try:
            with open(path) as fh:
                data = json.load(fh)
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read config {path!r}: {exc}") from exc
        tol = _apply(tol, data)
    return _apply(tol, overrides)


def _apply(tol: Tolerances, data: dict) -> Tolerances:
    names = {f.name: f.type for f in fields(Tolerances)}
    clean = {}
    for key, val in data.items():
        if key not in names:
            raise ConfigError(f"unknown tolerance {key!r}")
        clean[key] = int(val) if key in ("lp_refactor_every", "lp_stall_limit", "max_cuts",
                                         "max_expansions") else float(val)
    return replace(tol, **clean)


_DEFAULT: Tolerances | None = None


def default_tolerances() -> Tolerances:
    """Process-wide tolerances (read once from the environment)."""
    global _DEFAULT
    if _DEFAULT is None:
        _DEFAULT = load_tolerances()
    return _DEFAULT


def set_default_tolerances(tol: Tolerances | None) -> None:
    global _DEFAULT
    _DEFAULT = tol
