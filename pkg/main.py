import argparse
import logging
import os
import sys
from pathlib import Path
from typing import Optional, TextIO

from rules.rules import (
    BENCH_DEFAULT_ALPHABET_SIZE,
    BENCH_DEFAULT_LOCATIONS,
    BENCH_DEFAULT_MAX_CONSTANT,
    BENCH_DEFAULT_TARGETS,
    DEFAULT_MAX_ITERATIONS,
    DEFAULT_MAX_QUERIES,
    DEFAULT_MAX_STRATEGIES,
    LOG_LEVEL_ENV,
)
from rera.automaton import Rera, simulate
from rera.bench import format_bench_report, run_bench
from rera.equivalence import equivalent
from rera.learner import LearnResult, learn
from rera.observation import ObservationStructure
from rera.serialization import export_dot, load_automaton, serialize_automaton, tdg_to_dot, tog_to_dot
from rera.teacher import SimulatedTeacher, serve_lines
from rera.utils import format_label
from rera.validation import Limits, RunConfig, validate_run_config
from rera.words import TimedWord

EXIT_OK = 0
EXIT_LIMIT = 2


def format_report(config: RunConfig, result: LearnResult) -> str:
    lines = [
        f"target: {config.target_file}",
        f"K: {config.K}",
        f"seed: {config.seed}",
        f"success: {str(result.success).lower()}",
        f"reason: {result.reason}",
        f"iterations: {result.iterations}",
        f"membership_queries: {result.membership_count}",
        f"distinct_membership_queries: {result.distinct_membership_count}",
        f"equivalence_queries: {result.equivalence_count}",
    ]
    if result.hypothesis is not None:
        lines.append(f"hypothesis_locations: {len(result.hypothesis.locations)}")
        lines.append(f"hypothesis_transitions: {len(result.hypothesis.transitions)}")
    for name in sorted(result.statistics):
        lines.append(f"{name}: {result.statistics[name]}")
    return "\n".join(lines) + "\n"


def cmd_learn(config: RunConfig) -> int:
    target = load_automaton(config.target_file)
    validate_run_config(config, target)
    config.output_dir.mkdir(parents=True, exist_ok=True)

    def write_snapshot(iteration: int, structure: ObservationStructure, hypothesis: Rera) -> None:
        (config.output_dir / f"iter-{iteration}-tdg.dot").write_text(tdg_to_dot(structure), encoding="utf-8")
        (config.output_dir / f"iter-{iteration}-tog.dot").write_text(tog_to_dot(structure), encoding="utf-8")

    teacher = SimulatedTeacher(target, seed=config.seed)
    result = learn(
        teacher,
        target.alphabet,
        config.K,
        config.limits,
        snapshot_callback=write_snapshot if config.emit_dot else None,
    )
    if result.hypothesis is not None:
        (config.output_dir / "hypothesis.rera").write_text(serialize_automaton(result.hypothesis), encoding="utf-8")
    (config.output_dir / "report.txt").write_text(format_report(config, result), encoding="utf-8")
    print(f"{'learned' if result.success else 'stopped'}: {result.reason} (output in {config.output_dir})")
    return EXIT_OK if result.success else EXIT_LIMIT


def cmd_member(target_file: str, word: str) -> str:
    accepted = simulate(load_automaton(target_file), TimedWord.parse(word)).accepted
    return "accept" if accepted else "reject"


def cmd_equiv(first_file: str, second_file: str) -> str:
    result = equivalent(load_automaton(first_file), load_automaton(second_file))
    if result.equivalent:
        return "equivalent"
    return (
        f"counterexample: {result.counterexample.describe()}"
        f" first={format_label(result.in_first)} second={format_label(result.in_second)}"
    )


def cmd_export_dot(target_file: str) -> str:
    return export_dot(load_automaton(target_file))


def cmd_bench(
    n: int, locations: int, max_constant: int, alphabet_size: int, seed: int, workers: int, limits: Limits
) -> str:
    rows = run_bench(
        n=n,
        locations=locations,
        max_constant=max_constant,
        alphabet_size=alphabet_size,
        seed=seed,
        workers=workers,
        limits=limits,
    )
    return format_bench_report(rows)


def cmd_serve_teacher(target_file: str, source: TextIO, sink: TextIO) -> int:
    return serve_lines(SimulatedTeacher(load_automaton(target_file)), source, sink)


def configure_logging() -> None:
    level_name = os.environ.get(LOG_LEVEL_ENV, "WARNING").upper()
    level = getattr(logging, level_name, None)
    if not isinstance(level, int):
        raise ValueError(f"{LOG_LEVEL_ENV} must be a logging level name, got {level_name!r}")
    logging.basicConfig(level=level, format="%(levelname)s %(name)s: %(message)s")


def _add_limit_arguments(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--max-queries", type=int, default=DEFAULT_MAX_QUERIES, help="Membership query budget")
    parser.add_argument("--max-iterations", type=int, default=DEFAULT_MAX_ITERATIONS, help="Equivalence round budget")
    parser.add_argument(
        "--max-strategies", type=int, default=DEFAULT_MAX_STRATEGIES, help="Reset strategies tried per round"
    )


def _limits_from(args: argparse.Namespace) -> Limits:
    return Limits(max_queries=args.max_queries, max_iterations=args.max_iterations, max_strategies=args.max_strategies)


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(description="Learn reset-free event-recording automata from a simulated teacher")
    commands = parser.add_subparsers(dest="command", required=True)

    learn_parser = commands.add_parser("learn", help="Learn a hypothesis for a target automaton file")
    learn_parser.add_argument("--target", required=True, help="Path to the hidden target automaton")
    learn_parser.add_argument("-K", "--K", dest="K", type=int, required=True, help="Maximal constant used by the learner")
    learn_parser.add_argument("--seed", type=int, default=0, help="Seed for the teacher's counterexample choice")
    learn_parser.add_argument("--output-dir", default="out", help="Directory for hypothesis.rera and report.txt")
    learn_parser.add_argument("--emit-dot", action="store_true", help="Write TDG/TOG DOT snapshots per iteration")
    _add_limit_arguments(learn_parser)

    member_parser = commands.add_parser("member", help="Check whether an automaton accepts a timed word")
    member_parser.add_argument("target", help="Automaton file")
    member_parser.add_argument("word", help='Timed word such as "1.5:a 0:b"')

    equiv_parser = commands.add_parser("equiv", help="Check language equivalence of two automata")
    equiv_parser.add_argument("first", help="First automaton file")
    equiv_parser.add_argument("second", help="Second automaton file")

    dot_parser = commands.add_parser("export-dot", help="Print an automaton as DOT")
    dot_parser.add_argument("target", help="Automaton file")

    bench_parser = commands.add_parser("bench", help="Learn random targets and print a query-count table")
    bench_parser.add_argument("--n", type=int, default=BENCH_DEFAULT_TARGETS, help="Number of random targets")
    bench_parser.add_argument("--locations", type=int, default=BENCH_DEFAULT_LOCATIONS, help="Locations per target")
    bench_parser.add_argument(
        "-K", "--K", dest="max_constant", type=int, default=BENCH_DEFAULT_MAX_CONSTANT, help="Maximal guard constant"
    )
    bench_parser.add_argument("--alphabet-size", type=int, default=BENCH_DEFAULT_ALPHABET_SIZE, help="Actions per target")
    bench_parser.add_argument("--seed", type=int, default=0, help="Seed for targets and counterexample choice")
    bench_parser.add_argument("--workers", type=int, default=1, help="Worker processes")
    _add_limit_arguments(bench_parser)

    serve_parser = commands.add_parser("serve-teacher", help="Answer M/E protocol lines on stdin")
    serve_parser.add_argument("target", help="Hidden target automaton file")
    return parser


def main(argv: Optional[list[str]] = None) -> int:
    args = _build_parser().parse_args(argv)
    configure_logging()
    if args.command == "learn":
        config = RunConfig(
            target_file=Path(args.target),
            K=args.K,
            seed=args.seed,
            limits=_limits_from(args),
            output_dir=Path(args.output_dir),
            emit_dot=args.emit_dot,
        )
        return cmd_learn(config)
    if args.command == "member":
        print(cmd_member(args.target, args.word))
    elif args.command == "equiv":
        print(cmd_equiv(args.first, args.second))
    elif args.command == "export-dot":
        print(cmd_export_dot(args.target), end="")
    elif args.command == "bench":
        report = cmd_bench(
            args.n, args.locations, args.max_constant, args.alphabet_size, args.seed, args.workers, _limits_from(args)
        )
        print(report, end="")
    elif args.command == "serve-teacher":
        cmd_serve_teacher(args.target, sys.stdin, sys.stdout)
    return EXIT_OK


if __name__ == "__main__":
    try:
        raise SystemExit(main())
    except ValueError as exc:
        raise SystemExit(f"Error: {exc}")
