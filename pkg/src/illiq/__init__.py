"""Asset-liability management, hedging and valuation in illiquid markets on
finite scenario trees.

The hedging problem and its dual are solved exactly for piecewise-linear
data, with outer linearization for the smooth loss families. On top of the
solvers sit assumption checks and valuation by superhedging, accounting
values and indifference swap rates.
"""

from ._kernels import BACKEND
from .config import Tolerances, default_tolerances, load_tolerances
from .diagnostics import assumption_report, linearity_check, rae_check, scaling_domain_check
from .dual import (
    DualCertificate,
    OptimalityReport,
    ShadowPrices,
    check_optimality,
    conjugate_phi,
    shadow_prices,
    solve_dual,
    support_C,
)
from .kernel import Interval, PiecewiseConvex, conjugate, recession, scale_epi, subdifferential
from .lp import LinearProgram, LPSolution, solve_lp
from .market import LossSpec, MarketModel, ModelError, recession_model, trading_cost, validate_model
from .modelfile import ModelFile, ModelFileError, load_model
from .primal import PrimalSolution, phi, solve_alm, superhedge
from .tree import ClaimProcess, PortfolioProcess, ScenarioTree, TreeError, build_tree
from .valuation import (
    ValuationResult,
    accounting_value,
    arbitrage_bounds,
    dual_valuation_bound,
    indifference_swap_rate,
    support_A,
    support_B,
)

__version__ = "0.1.0"

__all__ = [
    "BACKEND", "ClaimProcess", "DualCertificate", "Interval", "LPSolution", "LinearProgram",
    "LossSpec", "MarketModel", "ModelError", "ModelFile", "ModelFileError", "OptimalityReport",
    "PiecewiseConvex", "PortfolioProcess", "PrimalSolution", "ScenarioTree", "ShadowPrices",
    "Tolerances", "TreeError", "ValuationResult", "accounting_value", "arbitrage_bounds",
    "assumption_report", "build_tree", "check_optimality", "conjugate", "conjugate_phi",
    "default_tolerances", "dual_valuation_bound", "indifference_swap_rate", "linearity_check",
    "load_model", "load_tolerances", "phi", "rae_check", "recession", "recession_model",
    "scale_epi", "scaling_domain_check", "shadow_prices", "solve_alm", "solve_dual", "solve_lp",
    "subdifferential", "superhedge", "support_A", "support_B", "support_C", "trading_cost",
    "validate_model",
]
