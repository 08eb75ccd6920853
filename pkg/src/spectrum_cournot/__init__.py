"""Cournot equilibria for two service providers sharing one band over partially overlapping coverage."""

from .analysis import SweepSpec, SweepTable, compare_cooperation, monotonicity_report, sweep
from .equilibrium import (
    BestResponseProblem,
    EquilibriumResult,
    Method,
    Regime,
    best_response,
    closed_form_symmetric,
    lemma_deviation,
    solve_cooperation,
    solve_numeric,
    verify_nash,
)
from .errors import ConfigError, FeasibilityError, NotApplicableError, ScenarioError, SolverError
from .model import (
    Allocation,
    MarketConfig,
    MarketOutcome,
    consumer_surplus,
    delivered_prices,
    evaluate,
    latency_costs,
    revenues,
)
from .potential import PotentialForm, build_matrix, is_positive_definite, potential_identity_check, potential_value

__version__ = "0.1.0"
