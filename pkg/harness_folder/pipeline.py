import logging
import time
from dataclasses import dataclass
from typing import Optional

import numpy as np

from fairness import FairnessProfile, fairness_profile, is_envy_free_fractional
from market import EquilibriumReport, FractionalAllocation, Market, ToleranceConfig, check_equilibrium
from algorithms_folder import (CertificationReport, DidNotConverge, Outcome, RoundingResult,
                               SolverConfig, certify_rounding, rearrange_with_count, round_to_pure,
                               solve_equilibrium)

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class StageTimings:
    """Wall-clock seconds per stage."""

    solver: float = 0.0
    forest: float = 0.0
    rounding: float = 0.0
    certification: float = 0.0
    fairness: float = 0.0


@dataclass(frozen=True, eq=False)
class PipelineResult:

    outcome: Outcome                    # Solver output
    forest_alloc: FractionalAllocation  # Same prices, spending graph a forest
    cancellations: int
    equilibrium: EquilibriumReport      # Check of (forest_alloc, prices) against e
    rounding: RoundingResult
    certification: CertificationReport
    fairness: FairnessProfile
    fractional_ef: Optional[bool]       # Only for equal budgets
    converged: bool
    timings: StageTimings


def _solve(market: Market, solver_config: SolverConfig, tol: ToleranceConfig):
    try:
        return solve_equilibrium(market, solver_config), True
    except DidNotConverge as err:
        report = check_equilibrium(market, err.outcome.alloc, err.outcome.prices, tol)
        if not report.is_equilibrium:
            raise
        logger.warning("Solver stopped at residual %.3g; best iterate passes the equilibrium check",
                       err.outcome.residual)
        return err.outcome, False


def run_pipeline(market: Market, solver_config: SolverConfig = SolverConfig(),
                 tol: Optional[ToleranceConfig] = None) -> PipelineResult:
    """Solve, rearrange to a forest, round, certify and score fairness, timing each stage."""
    tol = tol or solver_config.tolerance

    start = time.perf_counter()
    outcome, converged = _solve(market, solver_config, tol)
    solved = time.perf_counter()

    forest_alloc, cancellations = rearrange_with_count(market, outcome.alloc, outcome.prices, tol)
    rearranged = time.perf_counter()

    rounding = round_to_pure(market, forest_alloc, outcome.prices, tol)
    rounded = time.perf_counter()

    certification = certify_rounding(market, rounding, tol)
    certified = time.perf_counter()

    fairness = fairness_profile(market, rounding.alloc)
    scored = time.perf_counter()

    equal_budgets = bool(np.all(market.budgets == market.budgets[0]))
    fractional_ef = is_envy_free_fractional(market, outcome.alloc, tol.rel) if equal_budgets else None

    timings = StageTimings(
        solver=solved - start,
        forest=rearranged - solved,
        rounding=rounded - rearranged,
        certification=certified - rounded,
        fairness=scored - certified,
    )
    logger.info("Pipeline on %d agents, %d goods: certified=%s, EF=%s, Prop1=%s, EF1-1=%s (%.3fs solving)",
                market.n_agents, market.n_goods, certification.passed, fairness.ef, fairness.prop1,
                fairness.ef11, timings.solver)
    return PipelineResult(
        outcome=outcome,
        forest_alloc=forest_alloc,
        cancellations=cancellations,
        equilibrium=check_equilibrium(market, forest_alloc, outcome.prices, tol),
        rounding=rounding,
        certification=certification,
        fairness=fairness,
        fractional_ef=fractional_ef,
        converged=converged,
        timings=timings,
    )
