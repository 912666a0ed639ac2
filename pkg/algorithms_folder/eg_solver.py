import logging
from dataclasses import dataclass
from typing import List, Optional, Tuple

import numpy as np

from market import (FractionalAllocation, Market, PriceVector, ToleranceConfig, ZeroBundleValue,
                    check_equilibrium)
from . import Outcome

logger = logging.getLogger(__name__)

MIN_OBJECTIVE = -np.inf     # Objective when some agent gets nothing it values
ASCENT_SLACK = 1e-13        # Relative float resolution when comparing objectives
MIN_STEP = 1e-18            # Backtracking gives up below this step


class DidNotConverge(RuntimeError):
    """Raised with the best iterate found; callers may still use `outcome`."""

    def __init__(self, outcome: Outcome, message: Optional[str] = None):
        self.outcome = outcome
        super().__init__(message or (f"Equilibrium residual {outcome.residual:.3g} after "
                                     f"{outcome.iterations_used} iterations"))


@dataclass(frozen=True)
class SolverConfig:

    max_iters: int = 50_000
    step_size: Optional[float] = None       # None: 0.1 * n / max normalised valuation
    step_decay: float = 0.5                 # Backtracking factor; accepted steps grow by its inverse
    convergence_tol: float = 1e-7           # Stop once the equilibrium residual is this small
    check_every: int = 1                    # Accepted steps between equilibrium checks
    seed: Optional[int] = None              # None: uniform start x_ij = 1/n
    max_step: float = 1e6
    record_trace: bool = False
    tolerance: ToleranceConfig = ToleranceConfig()

    def __post_init__(self):
        if self.max_iters < 1:
            raise ValueError(f"max_iters must be at least 1, got {self.max_iters}")
        if self.step_size is not None and not self.step_size > 0:
            raise ValueError(f"step_size must be positive, got {self.step_size}")
        if not 0 < self.step_decay < 1:
            raise ValueError(f"step_decay must lie in (0, 1), got {self.step_decay}")
        if not self.convergence_tol > 0:
            raise ValueError(f"convergence_tol must be positive, got {self.convergence_tol}")
        if self.check_every < 1:
            raise ValueError(f"check_every must be at least 1, got {self.check_every}")
        if not self.max_step > 0:
            raise ValueError(f"max_step must be positive, got {self.max_step}")


def _utilities(valuations: np.ndarray, shares: np.ndarray) -> np.ndarray:
    return (valuations * shares).sum(axis=1)


def _objective(market: Market, shares: np.ndarray) -> float:
    utilities = _utilities(market.valuations, shares)
    if np.any(utilities <= 0):
        return MIN_OBJECTIVE
    return float(np.dot(market.budgets, np.log(utilities)))


def _gradient(market: Market, shares: np.ndarray) -> np.ndarray:
    utilities = _utilities(market.valuations, shares)
    starved = np.flatnonzero(utilities <= 0)
    if starved.size:
        raise ZeroBundleValue(f"Agent {starved[0]} values its bundle at zero")
    return (market.budgets / utilities)[:, None] * market.valuations


def _simplex_columns(z: np.ndarray) -> np.ndarray:
    # Sort-based projection of every column onto {y >= 0, sum(y) = 1}
    n = z.shape[0]
    s = np.sort(z, axis=0)[::-1]
    css = np.cumsum(s, axis=0) - 1.0
    ranks = np.arange(1, n + 1)[:, None]
    positive = s - css / ranks > 0
    rho = n - 1 - np.argmax(positive[::-1], axis=0)
    theta = css[rho, np.arange(z.shape[1])] / (rho + 1)
    return np.maximum(z - theta, 0.0)


def _project_columns(raw: np.ndarray) -> np.ndarray:
    z = np.asarray(raw, dtype=float)
    projected = np.clip(z, 0.0, 1.0)
    # Columns still over capacity touch the sum constraint; there the cap of 1 is implied
    over = projected.sum(axis=0) > 1.0
    if np.any(over):
        projected[:, over] = _simplex_columns(z[:, over])
    return projected


def eg_objective(market: Market, alloc: FractionalAllocation) -> float:
    """Eisenberg-Gale objective sum_i e_i log v_i(x_i); MIN_OBJECTIVE if some v_i(x_i) = 0."""
    return _objective(market, alloc.shares)


def eg_gradient(market: Market, alloc: FractionalAllocation) -> np.ndarray:
    return _gradient(market, alloc.shares)


def project_feasible(raw: np.ndarray) -> FractionalAllocation:
    """Euclidean projection of each column onto {y in [0, 1]^n : sum(y) <= 1}."""
    raw = np.asarray(raw, dtype=float)
    if raw.ndim != 2:
        raise ValueError(f"Expected an n x m matrix, got shape {raw.shape}")
    return FractionalAllocation(_project_columns(raw))


def _kkt_prices(market: Market, shares: np.ndarray) -> np.ndarray:
    return _gradient(market, shares).max(axis=0)


def extract_prices(market: Market, alloc: FractionalAllocation) -> PriceVector:
    """KKT prices p_j = max_i e_i v_ij / v_i(x_i)."""
    return PriceVector(_kkt_prices(market, alloc.shares))


def _normalised_prices(market: Market, shares: np.ndarray) -> np.ndarray:
    # Clearing plus exhaustion force sum(p) = sum(e); scaling keeps every MBB set
    prices = _kkt_prices(market, shares)
    return prices * (market.total_budget / prices.sum())


def _initial_shares(n_agents: int, n_goods: int, seed: Optional[int]) -> np.ndarray:
    if seed is None:
        return np.full((n_agents, n_goods), 1.0 / n_agents)
    rng = np.random.default_rng(seed)
    weights = rng.uniform(0.5, 1.5, size=(n_agents, n_goods))
    return weights / weights.sum(axis=0)


def _residual(market: Market, shares: np.ndarray, prices: np.ndarray,
              tol: ToleranceConfig) -> Tuple[bool, float]:
    # Sort key: iterates passing the equilibrium check first, then by residual
    report = check_equilibrium(market, FractionalAllocation(shares), PriceVector(prices), tol)
    return not report.is_equilibrium, report.worst_violation


def solve_equilibrium(market: Market, config: SolverConfig = SolverConfig()) -> Outcome:
    """Projected gradient ascent on the Eisenberg-Gale program.

    Goods nobody values are left out of the ascent and come back unallocated
    at price zero. Rows are normalised to a maximum of 1, which leaves the
    optimum and the prices unchanged.

    The ascent stops at the first checked iterate whose residual is at most
    convergence_tol or which passes check_equilibrium at config.tolerance.
    """
    valuations = market.valuations
    valued = valuations.max(axis=0) > 0
    if not np.all(valued):
        logger.info("Setting aside %d goods nobody values", int((~valued).sum()))

    reduced = Market(valuations[:, valued] / valuations.max(axis=1, keepdims=True), market.budgets)
    tol = config.tolerance

    shares = _initial_shares(reduced.n_agents, reduced.n_goods, config.seed)
    objective = _objective(reduced, shares)
    step = config.step_size or 0.1 * reduced.n_agents / float(reduced.valuations.max())
    trace: List[float] = [objective] if config.record_trace else []

    def converged(key: Tuple[bool, float]) -> bool:
        failing, residual = key
        return not failing or residual <= config.convergence_tol

    best_prices = _normalised_prices(reduced, shares)
    best_key = _residual(reduced, shares, best_prices, tol)
    best_shares, best_iteration = shares, 0
    iteration = 0

    while not converged(best_key) and iteration < config.max_iters:
        iteration += 1
        gradient = _gradient(reduced, shares)

        # Backtrack until the objective does not drop
        while True:
            candidate = _project_columns(shares + step * gradient)
            value = _objective(reduced, candidate)
            if value >= objective - ASCENT_SLACK * max(1.0, abs(objective)):
                break
            step *= config.step_decay
            if step < MIN_STEP:
                break
        if step < MIN_STEP:
            logger.warning("Step size collapsed after %d iterations", iteration)
            break

        shares, objective = candidate, value
        step = min(step / config.step_decay, config.max_step)
        if config.record_trace:
            trace.append(objective)

        if iteration % config.check_every and iteration < config.max_iters:
            continue
        prices = _normalised_prices(reduced, shares)
        key = _residual(reduced, shares, prices, tol)
        if key < best_key:
            best_key, best_iteration, best_shares, best_prices = key, iteration, shares, prices

    full_shares = np.zeros(valuations.shape)
    full_shares[:, valued] = best_shares
    full_prices = np.zeros(market.n_goods)
    full_prices[valued] = best_prices

    alloc = FractionalAllocation(full_shares)
    price_vector = PriceVector(full_prices)
    report = check_equilibrium(market, alloc, price_vector, tol)
    residual = report.worst_violation
    outcome = Outcome(alloc=alloc, prices=price_vector, residual=residual,
                      iterations_used=iteration, objective=eg_objective(market, alloc),
                      trace=tuple(trace))

    if not converged((not report.is_equilibrium, residual)):
        logger.warning("Gradient ascent stopped at residual %.3g (best iterate %d of %d)",
                       residual, best_iteration, iteration)
        raise DidNotConverge(outcome)
    logger.info("Gradient ascent converged: residual %.3g after %d iterations", residual, iteration)
    return outcome
