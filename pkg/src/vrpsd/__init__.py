"""Exact toolkit for vehicle routing with stochastic demands under
restocking recourse: route-evaluation dynamic programs, a Monte Carlo
execution simulator, and a branch-cut-and-price solver for optimal
multi-vehicle planned routes under the switch policy."""

__version__ = "0.1.0"

from .instance import (
    DemandDistribution,
    Instance,
    ParseError,
    adjust_capacity,
    generate_random_instance,
    load_cvrplib,
    make_distribution,
)
from .policy import (
    DecisionTable,
    Evaluator,
    best_orientation,
    eval_detour_to_depot,
    eval_optimal_restocking,
    eval_switch,
    expected_failures,
    gamma_trips,
    phi_direct,
    phi_restock,
    phi_star,
)
from .simulate import ScenarioResult, SimulationSummary, execute, simulate

__all__ = [
    "DemandDistribution",
    "Instance",
    "ParseError",
    "adjust_capacity",
    "generate_random_instance",
    "load_cvrplib",
    "make_distribution",
    "DecisionTable",
    "Evaluator",
    "best_orientation",
    "eval_detour_to_depot",
    "eval_optimal_restocking",
    "eval_switch",
    "expected_failures",
    "gamma_trips",
    "phi_direct",
    "phi_restock",
    "phi_star",
    "ScenarioResult",
    "SimulationSummary",
    "execute",
    "simulate",
]
