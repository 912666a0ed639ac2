from dataclasses import replace

import numpy as np
import pytest

from market import FractionalAllocation, IntegralAllocation, Market, PriceVector, check_equilibrium
from algorithms_folder import (CyclicInput, NotAForest, NotAnEquilibrium, agent_node,
                               build_spending_graph, certify_rounding, good_node,
                               price_certificates, rearrange_to_forest, root_forest, round_to_pure)
from test_spending_forest import identical_buyers_equilibrium


def test_root_path():
    graph = build_spending_graph(FractionalAllocation([[0.5], [0.5]]), PriceVector([2]))
    forest = root_forest(graph)
    assert forest.roots == (agent_node(0),)
    assert forest.children[agent_node(0)] == (good_node(0),)
    assert forest.children[good_node(0)] == (agent_node(1),)
    assert forest.parent[agent_node(1)] == good_node(0)


def test_root_isolated_agent():
    graph = build_spending_graph(FractionalAllocation([[1.0], [0.0]]), PriceVector([1]))
    forest = root_forest(graph)
    assert forest.roots == (agent_node(0), agent_node(1))
    assert forest.children[agent_node(1)] == ()


def test_root_star():
    graph = build_spending_graph(FractionalAllocation([[1, 1, 1], [0, 0, 0]]), PriceVector([1, 1, 1]))
    forest = root_forest(graph)
    assert forest.children[agent_node(0)] == (good_node(0), good_node(1), good_node(2))


def test_root_cyclic_graph():
    graph = build_spending_graph(FractionalAllocation([[0.5, 0.5], [0.5, 0.5]]), PriceVector([1, 1]))
    with pytest.raises(CyclicInput):
        root_forest(graph)


def test_symmetric_market_rounding(symmetric_market):
    prices = PriceVector([2 / 3] * 3)
    alloc = FractionalAllocation([[1, 0.5, 0], [0, 0.5, 1]])
    result = round_to_pure(symmetric_market, alloc, prices)

    assert result.alloc.bundles() == ((0,), (1, 2))
    assert result.budgets_new.tolist() == pytest.approx([2 / 3, 4 / 3])
    assert result.perturbation_inf == pytest.approx(1 / 3)
    assert result.price_inf == pytest.approx(2 / 3)
    assert result.budget_sum_delta <= 1e-9 * 2

    witnesses = {witness.agent: witness for witness in result.witnesses}
    assert (witnesses[0].kind, witnesses[0].good) == ("deficit", 1)
    assert (witnesses[1].kind, witnesses[1].good) == ("surplus", 1)
    assert certify_rounding(symmetric_market, result).passed


def test_footnote_market_rounding(footnote_market):
    result = round_to_pure(footnote_market, FractionalAllocation([[0.5], [0.5]]), PriceVector([2]))
    assert result.alloc.owner.tolist() == [1]
    assert result.budgets_new.tolist() == [0.0, 2.0]
    assert result.perturbation_inf == 1.0
    assert result.perturbation_ratio == 0.5

    report = certify_rounding(footnote_market, result)
    assert report.passed
    assert report.fpo_certified


def test_integral_equilibrium_is_a_fixpoint():
    market = Market([[2, 1], [1, 2]], [1, 1])
    alloc = FractionalAllocation([[1, 0], [0, 1]])
    result = round_to_pure(market, alloc, PriceVector([1, 1]))
    assert result.alloc.owner.tolist() == [0, 1]
    assert result.budgets_new.tolist() == [1.0, 1.0]
    assert result.perturbation_inf == 0
    assert result.witnesses == ()


def test_free_goods_go_to_the_first_agent():
    market = Market([[1, 0], [1, 0]], [1, 1])
    result = round_to_pure(market, FractionalAllocation([[0.5, 0], [0.5, 0]]), PriceVector([2, 0]))
    assert result.alloc.owner.tolist() == [1, 0]
    assert result.alloc.is_complete()


def test_cyclic_spending_is_rejected():
    market = Market([[1, 1], [1, 1]], [1, 1])
    with pytest.raises(NotAForest):
        round_to_pure(market, FractionalAllocation([[0.5, 0.5], [0.5, 0.5]]), PriceVector([1, 1]))


def test_non_equilibrium_is_rejected(footnote_market):
    with pytest.raises(NotAnEquilibrium):
        round_to_pure(footnote_market, FractionalAllocation([[1.0], [0.0]]), PriceVector([2]))


def test_tampered_budgets_fail_certification(footnote_market):
    result = round_to_pure(footnote_market, FractionalAllocation([[0.5], [0.5]]), PriceVector([2]))
    budgets = result.budgets_new.copy()
    budgets[0] += 10 * result.price_inf
    report = certify_rounding(footnote_market, replace(result, budgets_new=budgets))
    assert not report.passed
    assert not report.perturbation_ok
    assert "perturbation" in report.violations


def test_moving_a_good_off_mbb_fails_certification():
    market = Market([[2, 1], [1, 2]], [1, 1])
    result = round_to_pure(market, FractionalAllocation([[1, 0], [0, 1]]), PriceVector([1, 1]))
    report = certify_rounding(market, replace(result, alloc=IntegralAllocation([1, 1], 2)))
    assert not report.passed
    assert not report.equilibrium.mbb_ok
    assert not report.exhaustion_ok


def test_certificates_name_the_goods(symmetric_market):
    prices = PriceVector([2 / 3] * 3)
    result = round_to_pure(symmetric_market, FractionalAllocation([[1, 0.5, 0], [0, 0.5, 1]]), prices)
    low, high = price_certificates(symmetric_market, result)
    assert low.added == 1 and low.removed is None
    assert high.removed == 1 and high.added is None
    assert low.reaches_budget and low.within_budget
    assert high.reaches_budget and high.within_budget


def test_spending_just_short_of_the_budget_certifies():
    # Agent 0 holds its only MBB good and spends 5e-7 less than its budget
    market = Market([[1, 0], [0, 1]], [1 + 5e-7, 1 - 5e-7])
    result = round_to_pure(market, FractionalAllocation([[1, 0], [0, 1]]), PriceVector([1, 1]))
    assert result.budgets_new.tolist() == [1.0, 1.0]
    assert result.witnesses == ()

    first, second = price_certificates(market, result)
    assert first.added is None and first.reaches_budget
    assert second.removed is None and second.within_budget
    assert certify_rounding(market, result).passed


@pytest.mark.parametrize("seed", range(100))
def test_rounding_bounds_on_random_equilibria(seed):
    market, alloc, prices = identical_buyers_equilibrium(seed)
    forest = rearrange_to_forest(market, alloc, prices)
    result = round_to_pure(market, forest, prices)

    assert result.perturbation_inf <= result.price_inf + 1e-7
    assert result.budget_sum_delta <= 1e-9 * market.total_budget
    assert result.alloc.is_complete()
    assert check_equilibrium(market, result.alloc.to_fractional(), prices,
                             budgets=result.budgets_new).is_equilibrium

    for agent in range(market.n_agents):
        # Bundles come from the agent's spending support
        assert set(result.alloc.bundle(agent)) <= set(forest.support(agent, 1e-9))
        held = np.flatnonzero(forest.shares[agent] >= 1 - 1e-9)
        assert set(held.tolist()) <= set(result.alloc.bundle(agent))

    assert all(witness.good is not None for witness in result.witnesses)
    assert certify_rounding(market, result).passed
