import numpy as np
import pytest

from market import FractionalAllocation, IntegralAllocation, Market, PriceVector, check_equilibrium
from algorithms_folder import (InvalidCycle, NotAnEquilibrium, agent_node, build_spending_graph,
                               cancel_cycle, find_cycle, forest_edge_bound, good_node, is_forest,
                               rearrange_to_forest, rearrange_with_count)


def square(shares, prices=(1.0, 1.0)):
    return FractionalAllocation(shares), PriceVector(list(prices))


def identical_buyers_equilibrium(seed):
    """Every agent values goods at their prices, so any full allocation is an equilibrium
    once budgets equal what each agent spends."""
    rng = np.random.default_rng(seed)
    n, m = int(rng.integers(2, 5)), int(rng.integers(2, 7))
    prices = rng.uniform(0.5, 2.0, size=m)
    shares = rng.dirichlet(np.ones(n), size=m).T
    market = Market(np.tile(prices, (n, 1)), shares @ prices)
    return market, FractionalAllocation(shares), PriceVector(prices)


def test_footnote_graph(footnote_market):
    graph = build_spending_graph(FractionalAllocation([[0.5], [0.5]]), PriceVector([2]))
    assert graph.edges == ((0, 0, 1.0), (1, 0, 1.0))
    assert graph.neighbors(good_node(0)) == [agent_node(0), agent_node(1)]


def test_integral_graph_has_one_edge_per_good():
    alloc = IntegralAllocation([1, 0, 1], 2).to_fractional()
    graph = build_spending_graph(alloc, PriceVector([3, 1, 2]))
    assert graph.edges == ((0, 1, 1.0), (1, 0, 3.0), (1, 2, 2.0))


def test_empty_bundle_leaves_an_isolated_agent():
    graph = build_spending_graph(FractionalAllocation([[1, 1], [0, 0]]), PriceVector([1, 1]))
    assert graph.neighbors(agent_node(1)) == []


def test_free_goods_stay_out_of_the_graph():
    graph = build_spending_graph(FractionalAllocation([[1, 1]]), PriceVector([1, 0]))
    assert graph.edge_count == 1
    assert graph.good_neighbors[1] == ()


def test_forest_has_no_cycle(footnote_market):
    graph = build_spending_graph(FractionalAllocation([[0.5], [0.5]]), PriceVector([2]))
    assert find_cycle(graph) is None
    assert is_forest(graph)


def test_full_square_cycle():
    alloc, prices = square([[0.5, 0.5], [0.5, 0.5]])
    graph = build_spending_graph(alloc, prices)
    assert find_cycle(graph) == [agent_node(0), good_node(0), agent_node(1), good_node(1)]
    assert not is_forest(graph)


def test_cycle_through_lowest_agent_is_found_first():
    shares = np.zeros((4, 4))
    shares[2:, 2:] = 0.5
    shares[:2, :2] = 0.5
    graph = build_spending_graph(FractionalAllocation(shares), PriceVector([1, 1, 1, 1]))
    assert find_cycle(graph) == [agent_node(0), good_node(0), agent_node(1), good_node(1)]


def test_cancel_symmetric_square():
    alloc, prices = square([[0.5, 0.5], [0.5, 0.5]], prices=(2.0, 2.0))
    cycle = [agent_node(0), good_node(0), agent_node(1), good_node(1)]
    result = cancel_cycle(alloc, prices, cycle)
    # Edge weights in cycle order: (0,0), (1,0), (1,1), (0,1)
    assert result.shares.tolist() == [[0.0, 1.0], [1.0, 0.0]]
    assert (result.shares @ prices.prices).tolist() == [2.0, 2.0]


def test_cancel_uneven_square():
    alloc, prices = square([[0.2, 0.5], [0.5, 0.3]])
    cycle = [agent_node(0), good_node(0), agent_node(1), good_node(1)]
    result = cancel_cycle(alloc, prices, cycle)
    assert result.shares.ravel().tolist() == pytest.approx([0.0, 0.7, 0.7, 0.1])


def test_cancel_with_zero_weight_edge_changes_nothing():
    alloc, prices = square([[0.0, 0.5], [0.5, 0.5]])
    cycle = [agent_node(0), good_node(0), agent_node(1), good_node(1)]
    result = cancel_cycle(alloc, prices, cycle)
    assert result == alloc


@pytest.mark.parametrize("cycle", [
    [agent_node(0), good_node(0)],
    [agent_node(0), good_node(0), agent_node(1)],
    [agent_node(0), agent_node(1), good_node(0), good_node(1)],
    [agent_node(0), good_node(0), agent_node(0), good_node(1)],
    [agent_node(0), good_node(0), agent_node(5), good_node(1)],
])
def test_invalid_cycles(cycle):
    alloc, prices = square([[0.5, 0.5], [0.5, 0.5]])
    with pytest.raises(InvalidCycle):
        cancel_cycle(alloc, prices, cycle)


def test_rearrange_identical_square():
    market = Market([[1, 1], [1, 1]], [1, 1])
    alloc, prices = square([[0.5, 0.5], [0.5, 0.5]])
    result, cancelled = rearrange_with_count(market, alloc, prices)
    graph = build_spending_graph(result, prices)
    assert cancelled == 1
    # All four weights tie, so two edges empty at once
    assert graph.edge_count == 2
    assert result.shares.tolist() == [[0.0, 1.0], [1.0, 0.0]]
    assert is_forest(graph)
    assert check_equilibrium(market, result, prices).is_equilibrium


def test_forest_input_is_a_fixpoint(footnote_market):
    alloc, prices = FractionalAllocation([[0.5], [0.5]]), PriceVector([2])
    assert rearrange_to_forest(footnote_market, alloc, prices) == alloc


def test_rearrange_needs_an_equilibrium(footnote_market):
    with pytest.raises(NotAnEquilibrium) as caught:
        rearrange_to_forest(footnote_market, FractionalAllocation([[1.0], [0.0]]), PriceVector([2]))
    assert not caught.value.report.budget_exhaustion_ok


@pytest.mark.parametrize("seed", range(100))
def test_rearrangement_preserves_spending(seed):
    market, alloc, prices = identical_buyers_equilibrium(seed)
    result, cancelled = rearrange_with_count(market, alloc, prices)

    assert np.allclose(result.shares @ prices.prices, alloc.shares @ prices.prices, rtol=0, atol=1e-12)
    assert np.allclose(result.consumption(), alloc.consumption(), rtol=0, atol=1e-12)
    assert cancelled <= market.n_agents * market.n_goods

    graph = build_spending_graph(result, prices)
    assert find_cycle(graph) is None
    assert is_forest(graph)
    assert graph.edge_count <= forest_edge_bound(graph)
    # Support only shrinks
    assert np.all((result.shares > 1e-9) <= (alloc.shares > 1e-9))


@pytest.mark.parametrize("seed", range(10))
def test_each_cancellation_removes_an_edge(seed):
    market, alloc, prices = identical_buyers_equilibrium(seed)
    graph = build_spending_graph(alloc, prices)
    cycle = find_cycle(graph)
    while cycle is not None:
        alloc = cancel_cycle(alloc, prices, cycle)
        smaller = build_spending_graph(alloc, prices)
        assert smaller.edge_count < graph.edge_count
        graph, cycle = smaller, find_cycle(smaller)


def test_rearrange_uneven_square_keeps_three_edges():
    market = Market([[1, 1], [1, 1]], [0.7, 1.3])
    alloc, prices = square([[0.2, 0.5], [0.8, 0.5]])
    result = rearrange_to_forest(market, alloc, prices)
    assert result.shares.tolist() == pytest.approx([[0.0, 0.7], [1.0, 0.3]])
    assert build_spending_graph(result, prices).edge_count == 3
