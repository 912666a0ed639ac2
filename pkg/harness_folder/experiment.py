import csv
import io
import json
import logging
from dataclasses import asdict, dataclass, replace
from multiprocessing import Pool
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from market import MarketError
from algorithms_folder import DidNotConverge, SolverConfig
from .columns import ReportColumns
from .generator import GeneratorConfig, generate_instance
from .pipeline import run_pipeline

logger = logging.getLogger(__name__)

DEFAULT_AGENT_COUNTS = (2, 4, 8, 16, 32, 64)
RATIO_SLACK = 1e-4      # Perturbation ratio headroom for budgets the solver spends only approximately


@dataclass(frozen=True)
class TrialRecord:

    n: int
    m: int
    trial: int
    ok: bool
    converged: bool = False
    certified: bool = False
    error: Optional[str] = None
    solver_s: float = 0.0
    forest_s: float = 0.0
    round_s: float = 0.0
    ef: bool = False
    ef1: bool = False
    ef11: bool = False
    prop: bool = False
    prop1: bool = False
    pert_ratio: float = 0.0


def _stats(values: List[float]) -> Tuple[float, float]:
    if not values:
        return 0.0, 0.0
    return float(np.mean(values)), float(np.max(values))


@dataclass(frozen=True)
class ExperimentRow:
    """Aggregate of one agent count; fairness counts are over successful trials."""

    n: int
    m: int
    trials: int
    failed: int
    ef: int
    ef1: int
    ef11: int
    prop: int
    prop1: int
    mean_solver_s: float
    max_solver_s: float
    mean_forest_s: float
    max_forest_s: float
    mean_round_s: float
    max_round_s: float
    mean_pert_ratio: float
    max_pert_ratio: float

    @classmethod
    def from_records(cls, n: int, m: int, records: Sequence[TrialRecord]) -> "ExperimentRow":
        done = [record for record in records if record.ok]
        mean_solver, max_solver = _stats([record.solver_s for record in done])
        mean_forest, max_forest = _stats([record.forest_s for record in done])
        mean_round, max_round = _stats([record.round_s for record in done])
        mean_ratio, max_ratio = _stats([record.pert_ratio for record in done])
        return cls(
            n=n, m=m, trials=len(records), failed=len(records) - len(done),
            ef=sum(record.ef for record in done),
            ef1=sum(record.ef1 for record in done),
            ef11=sum(record.ef11 for record in done),
            prop=sum(record.prop for record in done),
            prop1=sum(record.prop1 for record in done),
            mean_solver_s=mean_solver, max_solver_s=max_solver,
            mean_forest_s=mean_forest, max_forest_s=max_forest,
            mean_round_s=mean_round, max_round_s=max_round,
            mean_pert_ratio=mean_ratio, max_pert_ratio=max_ratio,
        )

    @property
    def succeeded(self) -> int:
        return self.trials - self.failed


@dataclass(frozen=True)
class ExperimentReport:

    rows: Tuple[ExperimentRow, ...] = ()
    records: Tuple[TrialRecord, ...] = ()

    def to_csv(self, timings: bool = True) -> str:
        columns = [column for column in ReportColumns.CSV
                   if timings or column not in ReportColumns.TIMING]
        buffer = io.StringIO()
        writer = csv.DictWriter(buffer, fieldnames=columns, extrasaction="ignore", lineterminator="\n")
        writer.writeheader()
        for row in self.rows:
            writer.writerow(asdict(row))
        return buffer.getvalue()

    def to_markdown(self) -> str:
        if not self.rows:
            return "_No trials were run._\n"
        trials = max(row.trials for row in self.rows)
        lines = []
        header = ["", *(f"n={row.n}" for row in self.rows)]
        lines.append("| " + " | ".join(header) + " |")
        lines.append("|" + "|".join(["---"] * len(header)) + "|")
        for label, attribute, kind in ReportColumns.TABLE[1:]:
            cells = [_format_cell(getattr(row, attribute), kind) for row in self.rows]
            lines.append("| " + " | ".join([label.format(trials=trials), *cells]) + " |")
        return "\n".join(lines) + "\n"

    def to_json(self) -> str:
        return json.dumps({"kind": "experiment", "rows": [asdict(row) for row in self.rows]}, indent=2) + "\n"

    def invariant_violations(self) -> List[str]:
        """Count invariants every run must satisfy; an empty list means all hold."""
        problems = []
        for row in self.rows:
            if row.prop1 != row.succeeded:
                problems.append(f"n={row.n}: Prop1 in {row.prop1} of {row.succeeded} trials")
            if row.ef11 != row.succeeded:
                problems.append(f"n={row.n}: EF1-1 in {row.ef11} of {row.succeeded} trials")
            if not row.ef <= row.ef1 <= row.ef11:
                problems.append(f"n={row.n}: EF {row.ef}, EF1 {row.ef1}, EF1-1 {row.ef11} out of order")
            if row.max_pert_ratio > 1 + RATIO_SLACK:
                problems.append(f"n={row.n}: budget perturbation ratio {row.max_pert_ratio:.6g} exceeds 1")
        for record in self.records:
            if record.ok and not record.certified:
                problems.append(f"n={record.n} trial {record.trial}: rounding failed certification")
        return problems


def _format_cell(value, kind: str) -> str:
    if kind == "seconds":
        return f"{value:.4f} sec"
    if kind == "ratio":
        return f"{value:.4f}"
    return str(value)


def run_trial(config: GeneratorConfig, solver_config: SolverConfig, trial: int) -> TrialRecord:
    market = generate_instance(config, trial)
    n, m = market.n_agents, market.n_goods
    try:
        result = run_pipeline(market, solver_config)
    except (DidNotConverge, MarketError, RuntimeError) as err:
        logger.warning("n=%d trial %d failed: %s", n, trial, err)
        return TrialRecord(n=n, m=m, trial=trial, ok=False, error=f"{type(err).__name__}: {err}")

    fairness = result.fairness
    return TrialRecord(
        n=n, m=m, trial=trial, ok=True,
        converged=result.converged,
        certified=result.certification.passed,
        solver_s=result.timings.solver,
        forest_s=result.timings.forest,
        round_s=result.timings.rounding,
        ef=fairness.ef, ef1=fairness.ef1, ef11=fairness.ef11,
        prop=fairness.prop, prop1=fairness.prop1,
        pert_ratio=result.rounding.perturbation_ratio,
    )


def _run_trial_args(args) -> TrialRecord:
    return run_trial(*args)


def run_experiment(config: GeneratorConfig, solver_config: SolverConfig = SolverConfig(),
                   agent_counts: Sequence[int] = DEFAULT_AGENT_COUNTS,
                   workers: int = 1) -> ExperimentReport:
    """Run `config.trials` pipelines for every agent count and aggregate them per count.

    With workers > 1 trials run in a process pool; records are kept in trial order.
    """
    if workers < 1:
        raise ValueError(f"workers must be at least 1, got {workers}")
    if config.trials == 0:
        logger.info("No trials requested")
        return ExperimentReport()

    jobs = [(replace(config, n_agents=n), solver_config, trial)
            for n in agent_counts for trial in range(config.trials)]
    if workers == 1:
        records = [_run_trial_args(job) for job in jobs]
    else:
        with Pool(workers) as pool:
            records = pool.map(_run_trial_args, jobs)

    grouped: Dict[int, List[TrialRecord]] = {}
    for record in records:
        grouped.setdefault(record.n, []).append(record)
    rows = tuple(ExperimentRow.from_records(n, n * config.goods_factor, grouped[n]) for n in agent_counts)
    for row in rows:
        logger.info("n=%d: %d/%d trials ok, EF %d, Prop1 %d, EF1-1 %d",
                    row.n, row.succeeded, row.trials, row.ef, row.prop1, row.ef11)
    return ExperimentReport(rows=rows, records=tuple(records))
