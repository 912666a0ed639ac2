import numpy as np
import pytest

from market import Market, ToleranceConfig
from algorithms_folder import DidNotConverge, SolverConfig, is_forest, build_spending_graph
from harness_folder import GeneratorConfig, generate_instance, run_pipeline
from oracles_folder import brute_force_integral_po


def test_footnote_market_pipeline(footnote_market):
    result = run_pipeline(footnote_market)
    assert result.converged
    assert result.cancellations == 0
    assert result.rounding.alloc.owner.tolist() == [1]
    assert result.rounding.budgets_new.tolist() == pytest.approx([0.0, 2.0])
    assert result.certification.passed
    assert not result.fairness.ef
    assert result.fairness.ef1
    assert result.fairness.prop1
    assert result.fractional_ef


def test_symmetric_market_pipeline(symmetric_market):
    result = run_pipeline(symmetric_market)
    assert result.equilibrium.is_equilibrium
    assert is_forest(build_spending_graph(result.forest_alloc, result.outcome.prices))
    assert result.rounding.perturbation_inf <= 2 / 3 + 1e-6
    assert result.certification.passed
    assert result.fairness.prop1 and result.fairness.ef11


def test_unequal_budgets_skip_fractional_envy():
    market = Market([[2, 1, 1], [1, 2, 1]], [1, 2])
    result = run_pipeline(market)
    assert result.fractional_ef is None
    assert result.certification.passed


def test_stage_timings_are_recorded(symmetric_market):
    timings = run_pipeline(symmetric_market).timings
    assert min(timings.solver, timings.forest, timings.rounding,
               timings.certification, timings.fairness) >= 0


def test_unusable_iterate_is_reraised():
    market = Market([[2, 1], [1, 2]], [1, 1])
    with pytest.raises(DidNotConverge):
        run_pipeline(market, SolverConfig(max_iters=1))


@pytest.mark.parametrize("n_agents, goods_factor", [(2, 5), (3, 2)])
@pytest.mark.parametrize("trial", range(10))
def test_generated_markets_round_to_fair_pareto_optimal_bundles(n_agents, goods_factor, trial):
    config = GeneratorConfig(n_agents=n_agents, goods_factor=goods_factor, value_exponent_levels=3)
    market = generate_instance(config, trial)
    result = run_pipeline(market)

    assert result.certification.passed
    assert result.rounding.perturbation_inf <= result.rounding.price_inf + ToleranceConfig().budget_slack(1.0)
    assert result.rounding.alloc.is_complete()
    # Equal budgets: Prop1 and EF1-1 always hold
    assert result.fairness.prop1
    assert result.fairness.ef11

    dominated, dominator = brute_force_integral_po(market, result.rounding.alloc)
    assert not dominated, f"dominated by {dominator.owner.tolist()}"


def test_rounded_bundles_come_from_spending(symmetric_market):
    result = run_pipeline(symmetric_market)
    shares = result.forest_alloc.shares
    for agent, bundle in enumerate(result.rounding.alloc.bundles()):
        assert np.all(shares[agent, list(bundle)] > 1e-9)


@pytest.mark.parametrize("trial", range(3))
def test_solver_output_with_eight_agents_certifies(trial):
    market = generate_instance(GeneratorConfig(n_agents=8), trial)
    result = run_pipeline(market)
    assert result.converged
    assert result.certification.passed
    assert all(witness.good is not None for witness in result.rounding.witnesses)
