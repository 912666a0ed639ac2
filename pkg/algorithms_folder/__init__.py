from dataclasses import dataclass, field
from typing import TYPE_CHECKING, Dict, Optional, Tuple

import numpy as np

from market import EquilibriumReport, FractionalAllocation, IntegralAllocation, PriceVector

if TYPE_CHECKING:
    from .rounding import RootedForest


@dataclass(frozen=True, eq=False)
class Outcome:
    """A market outcome (x, p) and how well it meets the equilibrium conditions."""

    alloc: FractionalAllocation
    prices: PriceVector
    residual: float
    iterations_used: int
    objective: float = float("nan")
    trace: Tuple[float, ...] = ()      # Accepted objective values, when recorded


@dataclass(frozen=True)
class BudgetWitness:
    """Good that explains why an agent's new budget moved away from the old one.

    deficit: a good the agent spent on but lost, with e_i <= e'_i + p_g.
    surplus: a good the agent kept, with e'_i <= e_i + p_g.
    """

    agent: int
    kind: str
    good: Optional[int]
    budget: float
    budget_new: float


@dataclass(frozen=True, eq=False)
class RoundingResult:

    alloc: IntegralAllocation
    budgets_new: np.ndarray
    prices: PriceVector
    perturbation_inf: float         # ||e' - e||_inf
    price_inf: float                # ||p||_inf
    budget_sum_delta: float         # |sum e' - sum e|
    witnesses: Tuple[BudgetWitness, ...] = ()
    forest: Optional["RootedForest"] = None

    @property
    def perturbation_ratio(self) -> float:
        return self.perturbation_inf / self.price_inf if self.price_inf > 0 else 0.0


@dataclass(frozen=True)
class PriceCertificate:
    """Per-agent price facts behind the equal-budget fairness guarantees.

    added: a good with p(x'_i + g) >= e_i (None when x'_i already costs e_i or more).
    removed: a good of x'_i with p(x'_i - g) <= e_i (None when x'_i costs e_i or less).
    """

    agent: int
    added: Optional[int]
    removed: Optional[int]
    reaches_budget: bool
    within_budget: bool


@dataclass(frozen=True, eq=False)
class CertificationReport:

    passed: bool
    perturbation_ok: bool
    sum_ok: bool
    exhaustion_ok: bool
    equilibrium: EquilibriumReport
    fpo_certified: bool
    certificates_ok: bool
    certificates: Tuple[PriceCertificate, ...] = ()
    violations: Dict[str, float] = field(default_factory=dict)


from .eg_solver import (DidNotConverge, SolverConfig, eg_gradient, eg_objective, extract_prices,
                        project_feasible, solve_equilibrium)
from .spending_forest import (InvalidCycle, Node, NodeKind, NotAnEquilibrium, SpendingGraph,
                              agent_node, build_spending_graph, cancel_cycle, find_cycle,
                              forest_edge_bound, good_node, is_forest, rearrange_to_forest,
                              rearrange_with_count)
from .rounding import (CyclicInput, NotAForest, RootedForest, certify_rounding, price_certificates,
                       root_forest, round_to_pure)

__all__ = [
    'Outcome', 'BudgetWitness', 'RoundingResult', 'PriceCertificate', 'CertificationReport',
    'SolverConfig', 'DidNotConverge', 'eg_objective', 'eg_gradient', 'project_feasible',
    'extract_prices', 'solve_equilibrium',
    'Node', 'NodeKind', 'agent_node', 'good_node',
    'SpendingGraph', 'InvalidCycle', 'NotAnEquilibrium', 'build_spending_graph',
    'find_cycle', 'cancel_cycle', 'rearrange_to_forest', 'rearrange_with_count', 'is_forest',
    'forest_edge_bound',
    'RootedForest', 'CyclicInput', 'NotAForest', 'root_forest', 'round_to_pure', 'certify_rounding',
    'price_certificates',
]
