import logging
from dataclasses import dataclass
from enum import Enum
from typing import Dict, List, NamedTuple, Optional, Sequence, Tuple

import networkx as nx
import numpy as np

from market import (EquilibriumReport, FractionalAllocation, Market, MarketError, PriceVector,
                    ToleranceConfig, check_equilibrium)

logger = logging.getLogger(__name__)


class NodeKind(Enum):

    AGENT = 0
    GOOD = 1


class Node(NamedTuple):

    kind: NodeKind
    index: int


def agent_node(index: int) -> Node:
    return Node(NodeKind.AGENT, index)


def good_node(index: int) -> Node:
    return Node(NodeKind.GOOD, index)


class InvalidCycle(MarketError):
    pass


class NotAnEquilibrium(MarketError):

    def __init__(self, report: EquilibriumReport, message: str = "Outcome is not an equilibrium"):
        self.report = report
        super().__init__(f"{message}: {report.summary()}")


@dataclass(frozen=True)
class SpendingGraph:
    """Bipartite agent-good graph; edge (i, j) carries the money x_ij * p_j."""

    n_agents: int
    n_goods: int
    edges: Tuple[Tuple[int, int, float], ...]           # (agent, good, weight), ascending
    agent_neighbors: Tuple[Tuple[int, ...], ...]        # Goods each agent spends on
    good_neighbors: Tuple[Tuple[int, ...], ...]         # Agents spending on each good
    weights: Dict[Tuple[int, int], float]

    @property
    def edge_count(self) -> int:
        return len(self.edges)

    def neighbors(self, node: Node) -> List[Node]:
        # Ascending index order
        if node.kind is NodeKind.AGENT:
            return [good_node(good) for good in self.agent_neighbors[node.index]]
        return [agent_node(agent) for agent in self.good_neighbors[node.index]]

    def to_networkx(self) -> nx.Graph:
        graph = nx.Graph()
        graph.add_nodes_from(agent_node(agent) for agent in range(self.n_agents))
        graph.add_nodes_from(good_node(good) for good in range(self.n_goods))
        graph.add_weighted_edges_from(
            (agent_node(agent), good_node(good), weight) for agent, good, weight in self.edges)
        return graph


def build_spending_graph(alloc: FractionalAllocation, prices: PriceVector,
                         spend_tol: float = 1e-9) -> SpendingGraph:
    """Edges where x_ij > spend_tol; zero-priced goods carry no money and stay isolated."""
    if prices.n_goods != alloc.n_goods:
        raise MarketError(f"{prices.n_goods} prices for {alloc.n_goods} goods")

    x = alloc.shares
    p = prices.prices
    agents, goods = np.nonzero((x > spend_tol) & (p > 0)[None, :])

    edges = tuple((int(i), int(j), float(x[i, j] * p[j])) for i, j in zip(agents, goods))
    agent_neighbors = [[] for _ in range(alloc.n_agents)]
    good_neighbors = [[] for _ in range(alloc.n_goods)]
    for agent, good, _ in edges:
        agent_neighbors[agent].append(good)
        good_neighbors[good].append(agent)

    return SpendingGraph(
        n_agents=alloc.n_agents,
        n_goods=alloc.n_goods,
        edges=edges,
        agent_neighbors=tuple(tuple(goods) for goods in agent_neighbors),
        good_neighbors=tuple(tuple(agents) for agents in good_neighbors),
        weights={(agent, good): weight for agent, good, weight in edges},
    )


def _reconstruct_cycle(parent: Dict[Node, Optional[Node]], node: Node, ancestor: Node) -> List[Node]:
    path = [node]
    current = node
    while current != ancestor:
        current = parent[current]
        path.append(current)
    path.reverse()

    # Start the cycle at its first agent node
    if path[0].kind is NodeKind.GOOD:
        path = path[1:] + path[:1]
    return path


def find_cycle(graph: SpendingGraph) -> Optional[List[Node]]:
    """Depth-first search from the lowest-index agent, neighbours in ascending order.

    Returns the cycle as an alternating agent/good node list, or None for a forest.
    """
    parent: Dict[Node, Optional[Node]] = {}

    for start_index in range(graph.n_agents):
        start = agent_node(start_index)
        if start in parent:
            continue
        parent[start] = None
        frontier = [(start, iter(graph.neighbors(start)))]

        while frontier:
            node, pending = frontier[-1]
            for neighbor in pending:
                if neighbor == parent[node]:
                    continue
                if neighbor in parent:
                    # Non-tree edge in an undirected DFS: neighbor is an ancestor
                    return _reconstruct_cycle(parent, node, neighbor)
                parent[neighbor] = node
                frontier.append((neighbor, iter(graph.neighbors(neighbor))))
                break
            else:
                frontier.pop()

    return None


def _cycle_edges(cycle: Sequence[Node]) -> List[Tuple[int, int]]:
    if len(cycle) < 4 or len(cycle) % 2:
        raise InvalidCycle(f"A bipartite cycle has even length of at least 4, got {len(cycle)}")
    if len(set(cycle)) != len(cycle):
        raise InvalidCycle("Cycle visits a node twice")

    edges = []
    for position, node in enumerate(cycle):
        following = cycle[(position + 1) % len(cycle)]
        if node.kind is following.kind:
            raise InvalidCycle(f"Cycle does not alternate between agents and goods at position {position}")
        if node.kind is NodeKind.AGENT:
            edges.append((node.index, following.index))
        else:
            edges.append((following.index, node.index))
    return edges


def cancel_cycle(alloc: FractionalAllocation, prices: PriceVector,
                 cycle: Sequence[Node]) -> FractionalAllocation:
    """Shift money around a cycle until its lightest edge is empty.

    Every agent's spending and every good's consumption stay the same.
    """
    edges = _cycle_edges(cycle)
    x = alloc.shares
    p = prices.prices
    for agent, good in edges:
        if not (0 <= agent < alloc.n_agents and 0 <= good < alloc.n_goods):
            raise InvalidCycle(f"Edge ({agent}, {good}) is outside the allocation")
        if p[good] <= 0:
            raise InvalidCycle(f"Good {good} is priced at zero and carries no spending")

    weights = [x[agent, good] * p[good] for agent, good in edges]
    # Lightest edge, ties broken by the lowest (agent, good)
    lightest = min(range(len(edges)), key=lambda k: (weights[k], edges[k]))
    amount = weights[lightest]

    shares = x.copy()
    for position, (agent, good) in enumerate(edges):
        if position == lightest:
            updated = 0.0
        elif (position - lightest) % 2 == 0:
            updated = max(weights[position] - amount, 0.0)
        else:
            updated = weights[position] + amount
        shares[agent, good] = updated / p[good]

    logger.debug("Cancelled cycle of length %d, moved %.3g along it, removed edge %s",
                 len(edges), amount, edges[lightest])
    return FractionalAllocation(shares)


def rearrange_with_count(market: Market, alloc: FractionalAllocation, prices: PriceVector,
                         tol: ToleranceConfig = ToleranceConfig()) -> Tuple[FractionalAllocation, int]:
    """Cancel cycles until the spending graph is a forest; also return how many were cancelled."""
    report = check_equilibrium(market, alloc, prices, tol)
    if not report.is_equilibrium:
        raise NotAnEquilibrium(report, "Cannot rearrange spending of a non-equilibrium")

    limit = market.n_agents * market.n_goods
    cancelled = 0
    while True:
        graph = build_spending_graph(alloc, prices, tol.spend)
        cycle = find_cycle(graph)
        if cycle is None:
            break
        if cancelled >= limit:
            raise RuntimeError(f"Spending graph still has a cycle after {limit} cancellations")
        alloc = cancel_cycle(alloc, prices, cycle)
        cancelled += 1

    report = check_equilibrium(market, alloc, prices, tol)
    if not report.is_equilibrium:
        raise NotAnEquilibrium(report, "Rearranged spending lost the equilibrium")
    logger.info("Spending graph is a forest after %d cycle cancellations (%d edges left)",
                cancelled, graph.edge_count)
    return alloc, cancelled


def rearrange_to_forest(market: Market, alloc: FractionalAllocation, prices: PriceVector,
                        tol: ToleranceConfig = ToleranceConfig()) -> FractionalAllocation:
    return rearrange_with_count(market, alloc, prices, tol)[0]


def is_forest(graph: SpendingGraph) -> bool:
    return nx.is_forest(graph.to_networkx())


def forest_edge_bound(graph: SpendingGraph) -> int:
    """Most edges a forest on these nodes can have: nodes minus connected components."""
    nx_graph = graph.to_networkx()
    return nx_graph.number_of_nodes() - nx.number_connected_components(nx_graph)
