from dataclasses import dataclass, field
from pathlib import Path

from rules.rules import DEFAULT_MAX_ITERATIONS, DEFAULT_MAX_QUERIES, DEFAULT_MAX_STRATEGIES

from .automaton import Rera


@dataclass(frozen=True)
class Limits:
    max_queries: int = DEFAULT_MAX_QUERIES
    max_iterations: int = DEFAULT_MAX_ITERATIONS
    max_strategies: int = DEFAULT_MAX_STRATEGIES


@dataclass(frozen=True)
class RunConfig:
    target_file: Path
    K: int
    seed: int = 0
    limits: Limits = field(default_factory=Limits)
    output_dir: Path = Path("out")
    emit_dot: bool = False


def validate_limits(limits: Limits) -> Limits:
    if limits.max_queries < 1:
        raise ValueError("max_queries must be >= 1")
    if limits.max_iterations < 1:
        raise ValueError("max_iterations must be >= 1")
    if limits.max_strategies < 1:
        raise ValueError("max_strategies must be >= 1")
    return limits


def validate_max_constant(K: int, target: Rera) -> int:
    if K < 0:
        raise ValueError("K must be >= 0")
    if K < target.max_constant:
        raise ValueError(f"K={K} is below the target's max constant {target.max_constant}")
    return K


def validate_run_config(config: RunConfig, target: Rera) -> RunConfig:
    validate_max_constant(config.K, target)
    validate_limits(config.limits)
    if config.seed < 0:
        raise ValueError("seed must be >= 0")
    return config
