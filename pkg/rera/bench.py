import logging
import random
import string
from concurrent.futures import FIRST_COMPLETED, ProcessPoolExecutor, wait
from typing import Callable, Optional

from rules.rules import (
    BENCH_DEFAULT_ALPHABET_SIZE,
    BENCH_DEFAULT_LOCATIONS,
    BENCH_DEFAULT_MAX_CONSTANT,
    BENCH_DEFAULT_TARGETS,
)

from .automaton import Rera, Transition, validate
from .clocks import Guard
from .equivalence import equivalent
from .learner import learn
from .teacher import SimulatedTeacher
from .types import BenchRow, ProgressState
from .utils import clock_name
from .validation import Limits, validate_limits

logger = logging.getLogger(__name__)

BENCH_COLUMNS = (
    "index",
    "locations",
    "transitions",
    "success",
    "verified",
    "learned_locations",
    "iterations",
    "membership",
    "distinct_membership",
    "equivalence",
    "reason",
)


def random_rera(
    rng: random.Random,
    locations: int = BENCH_DEFAULT_LOCATIONS,
    alphabet_size: int = BENCH_DEFAULT_ALPHABET_SIZE,
    max_constant: int = BENCH_DEFAULT_MAX_CONSTANT,
) -> Rera:
    """A random deterministic RERA: each (location, action) has no edge, a true edge or a two-way split."""
    if locations < 1:
        raise ValueError("locations must be >= 1")
    if not 1 <= alphabet_size <= len(string.ascii_lowercase):
        raise ValueError(f"alphabet_size must be between 1 and {len(string.ascii_lowercase)}")
    if max_constant < 0:
        raise ValueError("max_constant must be >= 0")
    alphabet = tuple(string.ascii_lowercase[:alphabet_size])
    names = tuple(f"l{index}" for index in range(locations))
    clocks = [clock_name(action) for action in alphabet]
    transitions = []
    for source in names:
        for action in alphabet:
            shape = rng.random()
            if shape < 0.2:
                continue
            if shape < 0.55:
                guards = [Guard.true()]
            else:
                clock = rng.choice(clocks)
                constant = rng.randint(0, max_constant)
                lower_strict = rng.random() < 0.5
                guards = [
                    Guard.from_atoms([(clock, "<" if lower_strict else "<=", constant)]),
                    Guard.from_atoms([(clock, ">=" if lower_strict else ">", constant)]),
                ]
            for guard in guards:
                if not guard.is_satisfiable:
                    continue
                transitions.append(Transition(source, action, guard, rng.random() < 0.5, rng.choice(names)))
    accepting = frozenset(name for name in names if rng.random() < 0.4)
    automaton = Rera(alphabet, names, names[0], accepting, tuple(transitions), max_constant)
    violations = validate(automaton)
    if violations:
        raise RuntimeError("random automaton is invalid: " + "; ".join(violations))
    return automaton


def target_seed(seed: int, index: int) -> int:
    return seed * 1_000_003 + index


def bench_target_worker(
    index: int, seed: int, locations: int, alphabet_size: int, max_constant: int, limits: Limits
) -> BenchRow:
    target = random_rera(random.Random(target_seed(seed, index)), locations, alphabet_size, max_constant)
    teacher = SimulatedTeacher(target, seed=target_seed(seed, index))
    result = learn(teacher, target.alphabet, max_constant, limits)
    verified = result.hypothesis is not None and equivalent(target, result.hypothesis).equivalent
    return {
        "index": index,
        "locations": len(target.locations),
        "transitions": len(target.transitions),
        "success": result.success,
        "verified": verified,
        "learned_locations": len(result.hypothesis.locations) if result.hypothesis is not None else 0,
        "iterations": result.iterations,
        "membership": result.membership_count,
        "distinct_membership": result.distinct_membership_count,
        "equivalence": result.equivalence_count,
        "reason": result.reason,
    }


def guarded_target(item: tuple) -> BenchRow:
    """Run one bench target; any error becomes a failed row instead of ending the bench."""
    try:
        return bench_target_worker(*item)
    except Exception as exc:
        logger.error("bench target %d failed: %s", item[0], exc)
        return _failed_row(item[0], str(exc))


def run_bench(
    n: int = BENCH_DEFAULT_TARGETS,
    locations: int = BENCH_DEFAULT_LOCATIONS,
    max_constant: int = BENCH_DEFAULT_MAX_CONSTANT,
    alphabet_size: int = BENCH_DEFAULT_ALPHABET_SIZE,
    seed: int = 0,
    workers: int = 1,
    limits: Optional[Limits] = None,
    progress_callback: Optional[Callable[[ProgressState], None]] = None,
) -> list[BenchRow]:
    if n < 1:
        raise ValueError("n must be >= 1")
    if workers < 1:
        raise ValueError("workers must be >= 1")
    limits = validate_limits(limits or Limits())
    arguments = [(index, seed, locations, alphabet_size, max_constant, limits) for index in range(n)]

    if workers == 1:
        return _run_sequential(arguments, progress_callback)
    try:
        executor = ProcessPoolExecutor(max_workers=workers)
    except (PermissionError, OSError):
        logger.warning("process pool unavailable, running the bench sequentially")
        return _run_sequential(arguments, progress_callback)

    rows: list[BenchRow] = []
    with executor:
        futures = {executor.submit(guarded_target, item): item[0] for item in arguments}
        while futures:
            done, _ = wait(set(futures.keys()), timeout=0.1, return_when=FIRST_COMPLETED)
            for future in done:
                index = futures.pop(future)
                try:
                    rows.append(future.result())
                except Exception as exc:
                    # the worker process itself died
                    logger.error("bench target %d failed: %s", index, exc)
                    rows.append(_failed_row(index, str(exc)))
                if progress_callback is not None:
                    progress_callback({"completed": len(rows), "total": n})
    return sorted(rows, key=lambda row: row["index"])


def _run_sequential(arguments: list[tuple], progress_callback: Optional[Callable[[ProgressState], None]]) -> list[BenchRow]:
    rows = []
    for item in arguments:
        rows.append(guarded_target(item))
        if progress_callback is not None:
            progress_callback({"completed": len(rows), "total": len(arguments)})
    return rows


def _failed_row(index: int, reason: str) -> BenchRow:
    row: BenchRow = {column: 0 for column in BENCH_COLUMNS}
    row.update({"index": index, "success": False, "verified": False, "reason": f"error: {reason}"})
    return row


def format_bench_report(rows: list[BenchRow]) -> str:
    lines = ["\t".join(BENCH_COLUMNS)]
    for row in rows:
        lines.append("\t".join(str(row[column]) for column in BENCH_COLUMNS))
    successes = sum(1 for row in rows if row["success"])
    verified = sum(1 for row in rows if row["verified"])
    lines.append(f"# targets={len(rows)} success={successes} verified={verified}")
    return "\n".join(lines) + "\n"
