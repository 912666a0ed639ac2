import json

import pytest

import harness_folder.experiment as experiment
from harness_folder import (ExperimentReport, ExperimentRow, GeneratorConfig, ReportColumns,
                            TrialRecord, run_experiment, run_trial)
from algorithms_folder import SolverConfig

SMALL = GeneratorConfig(goods_factor=2, value_exponent_levels=3, trials=3, seed=1)


@pytest.fixture(scope="module")
def small_report():
    return run_experiment(SMALL, agent_counts=(2, 3))


def test_rows_per_agent_count(small_report):
    assert [(row.n, row.m, row.trials) for row in small_report.rows] == [(2, 4, 3), (3, 6, 3)]
    assert len(small_report.records) == 6
    assert all(record.ok for record in small_report.records)


def test_small_run_meets_the_invariants(small_report):
    assert small_report.invariant_violations() == []
    for row in small_report.rows:
        assert row.prop1 == row.ef11 == row.succeeded
        assert row.max_pert_ratio <= 1 + experiment.RATIO_SLACK


def test_csv_columns(small_report):
    lines = small_report.to_csv().splitlines()
    assert lines[0] == ",".join(ReportColumns.CSV)
    assert len(lines) == 3
    assert lines[1].startswith("2,4,3,")


def test_csv_without_timings(small_report):
    header = small_report.to_csv(timings=False).splitlines()[0].split(",")
    assert not set(header) & set(ReportColumns.TIMING)
    assert header[:3] == ["n", "m", "trials"]


def test_markdown_table(small_report):
    table = small_report.to_markdown()
    assert table.startswith("|  | n=2 | n=3 |")
    assert "| Number of Prop1 allocations (out of 3) | 3 | 3 |" in table
    assert "| Failed trials | 0 | 0 |" in table
    assert " sec |" in table


def test_json_report(small_report):
    document = json.loads(small_report.to_json())
    assert document["kind"] == "experiment"
    assert [row["n"] for row in document["rows"]] == [2, 3]


def test_zero_trials_give_an_empty_report():
    report = run_experiment(GeneratorConfig(trials=0), agent_counts=(2,))
    assert report.rows == ()
    assert report.to_csv() == ",".join(ReportColumns.CSV) + "\n"
    assert "No trials" in report.to_markdown()


def test_workers_must_be_positive():
    with pytest.raises(ValueError):
        run_experiment(SMALL, workers=0)


def test_failed_trial_is_recorded(monkeypatch):
    def broken(market, solver_config):
        raise RuntimeError("boom")

    monkeypatch.setattr(experiment, "run_pipeline", broken)
    record = run_trial(SMALL, SolverConfig(), trial=0)
    assert not record.ok
    assert record.error == "RuntimeError: boom"

    row = ExperimentRow.from_records(2, 4, [record])
    assert (row.trials, row.failed, row.succeeded, row.prop1) == (1, 1, 0, 0)
    assert ExperimentReport(rows=(row,)).invariant_violations() == []


def test_violations_are_reported():
    records = [TrialRecord(n=2, m=4, trial=0, ok=True, certified=False, ef11=True, prop1=False,
                           pert_ratio=1.5)]
    report = ExperimentReport(rows=(ExperimentRow.from_records(2, 4, records),), records=tuple(records))
    problems = report.invariant_violations()
    assert any("Prop1" in problem for problem in problems)
    assert any("perturbation ratio" in problem for problem in problems)
    assert any("certification" in problem for problem in problems)


@pytest.mark.slow
def test_process_pool_matches_serial_run(small_report):
    pooled = run_experiment(SMALL, agent_counts=(2, 3), workers=2)
    keep = ("n", "trial", "ok", "ef", "ef1", "ef11", "prop", "prop1", "pert_ratio")
    assert ([[getattr(record, name) for name in keep] for record in pooled.records]
            == [[getattr(record, name) for name in keep] for record in small_report.records])


@pytest.mark.slow
def test_protocol_scale_run():
    config = GeneratorConfig(goods_factor=5, value_exponent_levels=5, trials=100, seed=0)
    report = run_experiment(config, agent_counts=(2, 4, 8), workers=4)
    assert report.invariant_violations() == []
    for row in report.rows:
        assert (row.trials, row.failed) == (100, 0)
        assert row.m == 5 * row.n
        assert row.max_pert_ratio <= 1 + experiment.RATIO_SLACK
        assert row.mean_round_s < row.mean_solver_s


@pytest.mark.slow
def test_sixteen_agents_are_mostly_envy_free():
    config = GeneratorConfig(goods_factor=5, value_exponent_levels=5, trials=100, seed=0)
    (row,) = run_experiment(config, agent_counts=(16,), workers=4).rows
    assert row.failed == 0
    assert row.prop1 == row.ef11 == 100
    assert row.ef >= 80
    assert row.mean_round_s < row.mean_solver_s
