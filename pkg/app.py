import argparse
import json
import logging
import sys
from dataclasses import replace
from pathlib import Path
from typing import List, Optional

from fairness import FairnessProfile
from market import EquilibriumReport, Market, MarketError, ToleranceConfig, check_equilibrium
from algorithms_folder import (CertificationReport, DidNotConverge, Outcome, RoundingResult,
                               SolverConfig, certify_rounding, rearrange_with_count, round_to_pure,
                               solve_equilibrium)
from oracles_folder import (PartitionInstance, comparative_expected_prices, comparative_instance,
                            comparative_perturbation_bound, comparative_threshold,
                            purity_oracle_partition_family)
from harness_folder import (DEFAULT_AGENT_COUNTS, GeneratorConfig, generate_instance, read_document,
                            run_experiment, run_pipeline, serialize)

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_INVALID = 1
EXIT_NOT_CONVERGED = 2
EXIT_NOT_CERTIFIED = 3


class MarketPipeline:

    def __init__(self, tolerance: ToleranceConfig = ToleranceConfig(),
                 solver: SolverConfig = SolverConfig(),
                 generator: GeneratorConfig = GeneratorConfig(),
                 out: Optional[Path] = None):
        """
        Args:
            tolerance: Slack used by every equilibrium check
            solver: Gradient ascent settings
            generator: Random instance settings
            out: Where documents and reports go (stdout when None)
        """
        self.tolerance = tolerance
        self.solver = replace(solver, tolerance=tolerance)
        self.generator = generator
        self.out = out

    def _emit(self, text: str) -> None:
        if self.out is None:
            sys.stdout.write(text)
        else:
            self.out.write_text(text, encoding="utf-8")
            print(f"✓ Wrote {self.out}")

    def _load(self, path: str, kind: type):
        document = read_document(path)
        if not isinstance(document, kind):
            raise MarketError(f"{path} holds a {type(document).__name__}, expected a {kind.__name__}")
        return document

    def generate(self, trial: int) -> int:
        market = generate_instance(self.generator, trial)
        self._emit(serialize(market))
        return EXIT_OK

    def solve(self, market_path: str) -> int:
        market = self._load(market_path, Market)
        try:
            outcome = solve_equilibrium(market, self.solver)
        except DidNotConverge as err:
            print(f"✗ Solver did not converge: {err}", file=sys.stderr)
            if self.out is not None:
                self._emit(serialize(err.outcome))
            return EXIT_NOT_CONVERGED
        self._emit(serialize(outcome))
        return EXIT_OK

    def forest(self, market_path: str, outcome_path: str) -> int:
        market = self._load(market_path, Market)
        outcome = self._load(outcome_path, Outcome)
        alloc, cancelled = rearrange_with_count(market, outcome.alloc, outcome.prices, self.tolerance)
        logger.info("Cancelled %d cycles", cancelled)
        self._emit(serialize(replace(outcome, alloc=alloc)))
        return EXIT_OK

    def round(self, market_path: str, outcome_path: str, rearrange: bool = False) -> int:
        market = self._load(market_path, Market)
        outcome = self._load(outcome_path, Outcome)
        alloc = outcome.alloc
        if rearrange:
            alloc, _ = rearrange_with_count(market, alloc, outcome.prices, self.tolerance)
        result = round_to_pure(market, alloc, outcome.prices, self.tolerance)
        self._emit(serialize(result))
        return EXIT_OK

    def check(self, market_path: str, document_path: str) -> int:
        market = self._load(market_path, Market)
        document = read_document(document_path)
        if isinstance(document, RoundingResult):
            report = certify_rounding(market, document, self.tolerance)
            self._print_certification(report)
            return EXIT_OK if report.passed else EXIT_NOT_CERTIFIED
        if isinstance(document, Outcome):
            report = check_equilibrium(market, document.alloc, document.prices, self.tolerance)
            self._print_equilibrium(report)
            return EXIT_OK if report.is_equilibrium else EXIT_NOT_CERTIFIED
        raise MarketError(f"{document_path} holds a market; expected an outcome or a rounding")

    def pipeline(self, market_path: str) -> int:
        market = self._load(market_path, Market)

        print(f"\n{'='*60}")
        print(f"Running pipeline on {market.n_agents} agents, {market.n_goods} goods...")
        print(f"{'='*60}")

        result = run_pipeline(market, self.solver, self.tolerance)
        rounding = result.rounding
        status = "✓ Converged" if result.converged else "✗ Not converged (best iterate is an equilibrium)"
        print(status)
        print(f"  Solver: {result.outcome.iterations_used} iterations, residual {result.outcome.residual:.3g}")
        print(f"  Cycles cancelled: {result.cancellations}")
        print(f"  ||e' - e||_inf = {rounding.perturbation_inf:.6g} <= ||p||_inf = {rounding.price_inf:.6g}")
        print(f"  |sum e' - sum e| = {rounding.budget_sum_delta:.3g}")
        print(f"  Bundles: {[list(bundle) for bundle in rounding.alloc.bundles()]}")
        self._print_certification(result.certification)
        self._print_fairness(result.fairness)
        if result.fractional_ef is not None:
            print(f"  {'✓' if result.fractional_ef else '✗'} Fractional equilibrium envy-free")
        timings = result.timings
        print(f"  Timings: solve {timings.solver:.4f}s, forest {timings.forest:.4f}s, "
              f"round {timings.rounding:.4f}s")

        if self.out is not None:
            self._emit(serialize(rounding))
        return EXIT_OK if result.certification.passed else EXIT_NOT_CERTIFIED

    def experiment(self, agent_counts: List[int], workers: int, fmt: str) -> int:
        report = run_experiment(self.generator, self.solver, agent_counts, workers)
        rendered = {"csv": report.to_csv, "md": report.to_markdown, "json-doc": report.to_json}[fmt]()
        self._emit(rendered)

        problems = report.invariant_violations()
        for problem in problems:
            print(f"✗ {problem}", file=sys.stderr)
        return EXIT_NOT_CERTIFIED if problems else EXIT_OK

    def oracle_partition(self, values: List[int]) -> int:
        instance = PartitionInstance(tuple(values))
        pure, witness = purity_oracle_partition_family(instance)
        if pure:
            first, second = witness
            print(f"✓ Pure: {[instance.values[good] for good in first]} | "
                  f"{[instance.values[good] for good in second]}")
            print(f"  Goods: {list(first)} | {list(second)}")
        else:
            print(f"✗ Not pure: no equal-sum split of {list(instance.values)}")
        return EXIT_OK

    def oracle_comparative(self, n: int, eps: float) -> int:
        market = comparative_instance(n, eps)
        expected = comparative_expected_prices(n, eps)
        bound = comparative_perturbation_bound(n)

        print(f"\n{'='*80}")
        print(f"COMPARATIVE FAMILY n={n}, eps={eps} ({market.n_agents} agents, {market.n_goods} goods)")
        print(f"  Closed-form prices hold for eps >= {comparative_threshold(n):.4g}")
        print(f"{'='*80}")

        result = run_pipeline(market, self.solver, self.tolerance)
        prices = result.outcome.prices.prices
        print(f"{'Good':<8} {'Expected':<15} {'Solver':<15} {'|Diff|':<15}")
        print(f"{'-'*80}")
        for good in range(market.n_goods):
            diff = abs(prices[good] - expected.prices[good])
            print(f"{good:<8} {expected.prices[good]:<15.6f} {prices[good]:<15.6f} {diff:<15.2e}")
        print(f"{'-'*80}")

        within = result.rounding.perturbation_inf <= bound + self.tolerance.abs
        mark = "✓" if within else "✗"
        print(f"{mark} ||e' - e||_inf = {result.rounding.perturbation_inf:.6g} (bound n/(2n-1) = {bound:.6g})")
        print(f"{'='*80}\n")
        return EXIT_OK if within and result.certification.passed else EXIT_NOT_CERTIFIED

    def _print_equilibrium(self, report: EquilibriumReport) -> None:
        print(f"\n{'─'*60}")
        print(f"{'✓' if report.is_equilibrium else '✗'} Equilibrium")
        print(f"  {report.summary()}")
        print(f"{'─'*60}\n")

    def _print_certification(self, report: CertificationReport) -> None:
        print(f"\n{'─'*60}")
        print("CERTIFICATION:")
        print(f"{'─'*60}")
        checks = [
            ("Budget perturbation within ||p||_inf", report.perturbation_ok),
            ("Total budget preserved", report.sum_ok),
            ("New budgets equal bundle prices", report.exhaustion_ok),
            ("Integral equilibrium at new budgets", report.equilibrium.is_equilibrium),
            ("fPO (equilibrium allocation)", report.fpo_certified),
            ("Price certificates", report.certificates_ok),
        ]
        for label, ok in checks:
            print(f"  {'✓' if ok else '✗'} {label}")
        for name, magnitude in report.violations.items():
            print(f"    {name}: {magnitude:.3g}")
        print(f"{'─'*60}\n")

    def _print_fairness(self, profile: FairnessProfile) -> None:
        print(f"{'Notion':<10} {'Holds':<8}")
        print(f"{'-'*20}")
        for name, holds in (("EF", profile.ef), ("EF1", profile.ef1), ("EF1-1", profile.ef11),
                            ("Prop", profile.prop), ("Prop1", profile.prop1)):
            print(f"{name:<10} {'Yes' if holds else 'No':<8}")


def _common_flags() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, help="Random seed for market generation")
    common.add_argument("--solver-seed", type=int, help="Seed a random solver start (default: uniform)")
    common.add_argument("--tol-abs", type=float, help="Absolute slack on clearing and spending")
    common.add_argument("--tol-rel", type=float, help="Relative slack on budgets and MBB ratios")
    common.add_argument("--tol-spend", type=float, help="Shares at or below this count as unspent")
    common.add_argument("--max-iters", type=int, help="Gradient ascent iteration limit")
    common.add_argument("--levels", type=int, help="Number of value levels K")
    common.add_argument("--goods-factor", type=int, help="Goods per agent")
    common.add_argument("--trials", type=int, help="Trials per agent count")
    common.add_argument("--workers", type=int, default=1, help="Worker processes for experiments")
    common.add_argument("--config", type=Path, help="JSON file with tolerance/solver/generator sections")
    common.add_argument("--out", type=Path, help="Output file (stdout when omitted)")
    common.add_argument("--format", choices=("csv", "md", "json-doc"), default="md",
                        help="Experiment report format")
    common.add_argument("-v", "--verbose", action="count", default=0, help="-v info, -vv debug")
    return common


def build_parser() -> argparse.ArgumentParser:
    common = _common_flags()
    parser = argparse.ArgumentParser(
        prog="app.py",
        description="Round Fisher market equilibria to integral equilibria of nearby budgets.")
    commands = parser.add_subparsers(dest="command", required=True)

    gen = commands.add_parser("gen", parents=[common], help="Generate a random equal-income market")
    gen.add_argument("--agents", type=int, help="Number of agents (default 2)")
    gen.add_argument("--trial", type=int, default=0)

    solve = commands.add_parser("solve", parents=[common], help="Compute an equilibrium")
    solve.add_argument("market")

    forest = commands.add_parser("forest", parents=[common], help="Rearrange spending into a forest")
    forest.add_argument("market")
    forest.add_argument("outcome")

    rounding = commands.add_parser("round", parents=[common], help="Round a forest equilibrium")
    rounding.add_argument("market")
    rounding.add_argument("outcome")
    rounding.add_argument("--rearrange", action="store_true", help="Rearrange spending first")

    check = commands.add_parser("check", parents=[common], help="Check an outcome or certify a rounding")
    check.add_argument("market")
    check.add_argument("document")

    pipeline = commands.add_parser("pipeline", parents=[common], help="Solve, rearrange, round and certify")
    pipeline.add_argument("market")

    experiment = commands.add_parser("experiment", parents=[common], help="Run the empirical protocol")
    experiment.add_argument("--agents", type=int, nargs="+", default=list(DEFAULT_AGENT_COUNTS))

    oracle = commands.add_parser("oracle", help="Ground-truth instance families")
    oracles = oracle.add_subparsers(dest="oracle", required=True)
    partition = oracles.add_parser("partition", parents=[common], help="Purity of a partition market")
    partition.add_argument("values", type=int, nargs="+")
    comparative = oracles.add_parser("comparative", parents=[common], help="Comparative family check")
    comparative.add_argument("--n", type=int, default=2)
    comparative.add_argument("--eps", type=float, default=0.01)

    return parser


def load_configs(args: argparse.Namespace):
    """Dataclass defaults, then the --config file, then flags."""
    sections = {}
    if args.config is not None:
        sections = json.loads(args.config.read_text(encoding="utf-8"))
        if not isinstance(sections, dict):
            raise MarketError(f"{args.config} must hold a JSON object")

    try:
        tolerance = ToleranceConfig(**sections.get("tolerance", {}))
        solver = SolverConfig(**sections.get("solver", {}))
        generator = GeneratorConfig(**sections.get("generator", {}))
    except TypeError as err:
        raise MarketError(f"Bad config section: {err}") from err

    flags = {"abs": args.tol_abs, "rel": args.tol_rel, "spend": args.tol_spend}
    tolerance = replace(tolerance, **{key: value for key, value in flags.items() if value is not None})
    if args.max_iters is not None:
        solver = replace(solver, max_iters=args.max_iters)
    if args.solver_seed is not None:
        solver = replace(solver, seed=args.solver_seed)
    if args.seed is not None:
        generator = replace(generator, seed=args.seed)

    flags = {"value_exponent_levels": args.levels, "goods_factor": args.goods_factor,
             "trials": args.trials, "n_agents": getattr(args, "agents", None)}
    flags = {key: value for key, value in flags.items() if value is not None and not isinstance(value, list)}
    generator = replace(generator, **flags)
    return tolerance, solver, generator


def run(args: argparse.Namespace) -> int:
    tolerance, solver, generator = load_configs(args)
    app = MarketPipeline(tolerance, solver, generator, args.out)

    if args.command == "gen":
        return app.generate(args.trial)
    if args.command == "solve":
        return app.solve(args.market)
    if args.command == "forest":
        return app.forest(args.market, args.outcome)
    if args.command == "round":
        return app.round(args.market, args.outcome, args.rearrange)
    if args.command == "check":
        return app.check(args.market, args.document)
    if args.command == "pipeline":
        return app.pipeline(args.market)
    if args.command == "experiment":
        return app.experiment(args.agents, args.workers, args.format)
    if args.oracle == "partition":
        return app.oracle_partition(args.values)
    return app.oracle_comparative(args.n, args.eps)


def main(argv: Optional[List[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    level = {0: logging.WARNING, 1: logging.INFO}.get(args.verbose, logging.DEBUG)
    logging.basicConfig(level=level, format="%(levelname)s %(name)s: %(message)s")

    try:
        return run(args)
    except DidNotConverge as err:
        print(f"✗ Solver did not converge: {err}", file=sys.stderr)
        return EXIT_NOT_CONVERGED
    except (ValueError, OSError) as err:
        # MarketError is a ValueError
        print(f"✗ {err}", file=sys.stderr)
        return EXIT_INVALID


if __name__ == "__main__":
    sys.exit(main())
