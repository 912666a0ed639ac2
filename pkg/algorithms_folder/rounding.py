import heapq
import logging
from collections import deque
from dataclasses import dataclass
from typing import Dict, List, Optional, Set, Tuple

import numpy as np

from market import (UNASSIGNED, FractionalAllocation, IntegralAllocation, Market, MarketError,
                    PriceVector, ToleranceConfig, check_equilibrium, mbb, mbb_gap_matrix)
from . import BudgetWitness, CertificationReport, PriceCertificate, RoundingResult
from .spending_forest import (Node, NodeKind, NotAnEquilibrium, SpendingGraph, agent_node,
                              build_spending_graph, find_cycle)

logger = logging.getLogger(__name__)

SUM_RTOL = 1e-9         # Allowed relative drift of the total budget
COST_RTOL = 1e-12       # Allowed drift between e'_i and the price of x'_i


class CyclicInput(MarketError):
    pass


class NotAForest(MarketError):
    pass


@dataclass(frozen=True)
class RootedForest:

    parent: Dict[Node, Optional[Node]]
    children: Dict[Node, Tuple[Node, ...]]
    roots: Tuple[Node, ...]

    def nodes(self) -> List[Node]:
        return list(self.parent)


def root_forest(graph: SpendingGraph) -> RootedForest:
    """Root every tree at its lowest-index agent; children in ascending index order."""
    parent: Dict[Node, Optional[Node]] = {}
    children: Dict[Node, Tuple[Node, ...]] = {}
    roots = []

    for agent in range(graph.n_agents):
        root = agent_node(agent)
        if root in parent:
            continue
        parent[root] = None
        roots.append(root)

        frontier = deque([root])
        while frontier:
            node = frontier.popleft()
            kids = []
            for neighbor in graph.neighbors(node):
                if neighbor == parent[node]:
                    continue
                if neighbor in parent:
                    raise CyclicInput(f"Spending graph has a cycle through {neighbor.kind.name.lower()} {neighbor.index}")
                parent[neighbor] = node
                kids.append(neighbor)
                frontier.append(neighbor)
            children[node] = tuple(kids)

    return RootedForest(parent=parent, children=children, roots=tuple(roots))


def _snap_integral(alloc: FractionalAllocation, spend_tol: float) -> FractionalAllocation:
    # Goods held to within spend_tol of a full unit count as integrally held
    shares = alloc.shares.copy()
    holders = shares.argmax(axis=0)
    whole = shares[holders, np.arange(alloc.n_goods)] >= 1 - spend_tol
    for good in np.flatnonzero(whole):
        shares[:, good] = 0.0
        shares[holders[good], good] = 1.0
    return FractionalAllocation(shares)


def _check_agent_ends(forest: RootedForest, alive: Set[Node]) -> None:
    # In the working forest every root and every leaf is an agent
    for node in alive:
        if node.kind is not NodeKind.GOOD:
            continue
        up = forest.parent[node]
        if up is None or up not in alive:
            raise RuntimeError(f"Good {node.index} became a root of the working forest")
        if not any(child in alive for child in forest.children[node]):
            raise RuntimeError(f"Good {node.index} became a leaf of the working forest")


def _budget_witnesses(market: Market, support: FractionalAllocation, owner: np.ndarray,
                      budgets_new: np.ndarray, prices: PriceVector,
                      tol: ToleranceConfig) -> Tuple[BudgetWitness, ...]:
    p = prices.prices
    witnesses = []
    for agent in range(market.n_agents):
        budget = float(market.budgets[agent])
        budget_new = float(budgets_new[agent])
        slack = tol.budget_slack(budget)

        if budget_new < budget - slack:
            kind = "deficit"
            candidates = [good for good in support.support(agent, tol.spend)
                          if owner[good] != agent and budget <= budget_new + p[good] + slack]
        elif budget_new > budget + slack:
            kind = "surplus"
            candidates = [good for good in np.flatnonzero(owner == agent).tolist()
                          if budget_new <= budget + p[good] + slack]
        else:
            continue

        good = candidates[0] if candidates else None
        if good is None:
            logger.warning("No %s witness for agent %d (e=%.6g, e'=%.6g)", kind, agent, budget, budget_new)
        witnesses.append(BudgetWitness(agent, kind, good, budget, budget_new))
    return tuple(witnesses)


def round_to_pure(market: Market, alloc: FractionalAllocation, prices: PriceVector,
                  tol: ToleranceConfig = ToleranceConfig()) -> RoundingResult:
    """Round an equilibrium with a spending forest to an integral equilibrium of nearby budgets.

    Roots take child goods while the original budget allows, leftover child
    goods pass to their lowest-index child agent, then the root is deleted.
    New budgets are the prices of the final bundles.
    """
    report = check_equilibrium(market, alloc, prices, tol)
    if not report.is_equilibrium:
        raise NotAnEquilibrium(report, "Rounding needs an equilibrium")

    support = _snap_integral(alloc, tol.spend)
    graph = build_spending_graph(support, prices, tol.spend)
    if find_cycle(graph) is not None:
        raise NotAForest("Spending graph is not a forest; rearrange spending first")
    forest = root_forest(graph)

    p = prices.prices
    budgets = market.budgets
    owner = np.full(market.n_goods, UNASSIGNED, dtype=int)
    spent = np.zeros(market.n_agents)
    alive = set(forest.nodes())

    def assign(good: Node, agent: int) -> None:
        owner[good.index] = agent
        spent[agent] += p[good.index]
        alive.discard(good)

    # Goods with a single buyer stay with it
    leaves = [node for node, kids in forest.children.items() if node.kind is NodeKind.GOOD and not kids]
    for good in leaves:
        assign(good, forest.parent[good].index)

    roots = [node.index for node in forest.roots]
    heapq.heapify(roots)
    inherited = 0
    iterations = 0

    while roots:
        agent = heapq.heappop(roots)
        node = agent_node(agent)
        _check_agent_ends(forest, alive)
        iterations += 1

        pending = [good for good in forest.children[node] if good in alive]
        for good in pending:
            if spent[agent] + p[good.index] <= budgets[agent] + tol.abs:
                assign(good, agent)

        for good in pending:
            if good in alive:
                heir = forest.children[good][0]
                assign(good, heir.index)
                inherited += 1

        for good in forest.children[node]:
            for grandchild in forest.children[good]:
                heapq.heappush(roots, grandchild.index)
        alive.discard(node)

    # Goods outside the forest: zero-priced ones go to agent 0
    gaps = None
    for good in np.flatnonzero(owner == UNASSIGNED).tolist():
        if p[good] == 0:
            owner[good] = 0
            continue
        if gaps is None:
            gaps = mbb_gap_matrix(market, prices)
        takers = np.flatnonzero(gaps[:, good] <= tol.rel)
        if not takers.size:
            raise RuntimeError(f"Good {good} is priced but nobody can take it")
        owner[good] = int(takers[0])

    integral = IntegralAllocation(owner, market.n_agents)
    budgets_new = np.array([prices.cost(integral.bundle(agent)) for agent in range(market.n_agents)])
    witnesses = _budget_witnesses(market, support, owner, budgets_new, prices, tol)

    result = RoundingResult(
        alloc=integral,
        budgets_new=budgets_new,
        prices=prices,
        perturbation_inf=float(np.max(np.abs(budgets_new - budgets))),
        price_inf=prices.norm_inf,
        budget_sum_delta=abs(float(sum(budgets_new.tolist())) - market.total_budget),
        witnesses=witnesses,
        forest=forest,
    )
    logger.info("Rounded %d goods (%d at leaves, %d inherited) in %d root visits; ||e'-e|| = %.4g <= ||p|| = %.4g",
                market.n_goods, len(leaves), inherited, iterations, result.perturbation_inf, result.price_inf)
    return result


def price_certificates(market: Market, result: RoundingResult,
                       tol: ToleranceConfig = ToleranceConfig()) -> Tuple[PriceCertificate, ...]:
    """Check, per agent, that one MBB good lifts x'_i to the old budget and one
    good of x'_i can be dropped to get back under it."""
    prices = result.prices
    p = prices.prices
    certificates = []
    for agent in range(market.n_agents):
        budget = float(market.budgets[agent])
        bundle = result.alloc.bundle(agent)
        cost = prices.cost(bundle)
        slack = tol.budget_slack(budget)

        added = None
        reaches = cost >= budget - slack
        if not reaches:
            try:
                _, best = mbb(market, agent, prices, tol.rel)
            except MarketError:
                best = frozenset()
            outside = sorted(set(best) - set(bundle), key=lambda good: (-p[good], good))
            if outside:
                added = outside[0]
                reaches = cost + p[added] >= budget - slack

        removed = None
        within = cost <= budget + slack
        if not within and bundle:
            removed = min(bundle, key=lambda good: (-p[good], good))
            within = prices.cost(set(bundle) - {removed}) <= budget + slack

        certificates.append(PriceCertificate(agent, added, removed, bool(reaches), bool(within)))
    return tuple(certificates)


def certify_rounding(market: Market, result: RoundingResult,
                     tol: ToleranceConfig = ToleranceConfig()) -> CertificationReport:
    """Audit a rounding from its raw fields: budget bounds, integral equilibrium, fPO."""
    budgets = market.budgets
    budgets_new = np.asarray(result.budgets_new, dtype=float)
    prices = result.prices
    violations: Dict[str, float] = {}

    perturbation = float(np.max(np.abs(budgets_new - budgets)))
    perturbation_ok = perturbation <= prices.norm_inf + tol.budget_slack(float(np.max(budgets)))
    if not perturbation_ok:
        violations["perturbation"] = perturbation - prices.norm_inf

    sum_delta = abs(float(sum(budgets_new.tolist())) - market.total_budget)
    sum_ok = sum_delta <= SUM_RTOL * market.total_budget
    if not sum_ok:
        violations["budget_sum"] = sum_delta

    costs = np.array([prices.cost(result.alloc.bundle(agent)) for agent in range(market.n_agents)])
    cost_gap = float(np.max(np.abs(costs - budgets_new)))
    exhaustion_ok = cost_gap <= COST_RTOL * max(1.0, float(np.max(np.abs(budgets_new))))
    if not exhaustion_ok:
        violations["exhaustion"] = cost_gap

    equilibrium = check_equilibrium(market, result.alloc.to_fractional(), prices, tol, budgets=budgets_new)
    if not equilibrium.market_clearing_ok:
        violations["clearing"] = equilibrium.clearing_violation
    if not equilibrium.budget_exhaustion_ok:
        violations["budgets"] = float(equilibrium.budget_residuals.max())
    if not equilibrium.mbb_ok:
        violations["mbb"] = equilibrium.mbb_gap

    certificates = price_certificates(market, result, tol)
    certificates_ok = all(item.reaches_budget and item.within_budget for item in certificates)
    if not certificates_ok:
        violations["certificates"] = float(sum(
            1 for item in certificates if not (item.reaches_budget and item.within_budget)))

    passed = perturbation_ok and sum_ok and exhaustion_ok and equilibrium.is_equilibrium and certificates_ok
    if not passed:
        logger.warning("Rounding failed certification: %s", violations)
    return CertificationReport(
        passed=passed,
        perturbation_ok=perturbation_ok,
        sum_ok=sum_ok,
        exhaustion_ok=exhaustion_ok,
        equilibrium=equilibrium,
        fpo_certified=equilibrium.is_equilibrium,
        certificates_ok=certificates_ok,
        certificates=certificates,
        violations=violations,
    )
