import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterable, Mapping, Optional

RELATIONS = ("<", "<=", "=", ">=", ">")
_RELATION_ALIASES = {"≤": "<=", "≥": ">=", "==": "="}
_NEGATED = {"<": ">=", "<=": ">", ">=": "<", ">": "<="}


@dataclass(frozen=True)
class ClockValuation:
    values: tuple[tuple[str, Fraction], ...]

    @classmethod
    def zero(cls, clocks: Iterable[str]) -> "ClockValuation":
        return cls(tuple((clock, Fraction(0)) for clock in sorted(clocks)))

    @classmethod
    def of(cls, values: Mapping[str, object]) -> "ClockValuation":
        converted = []
        for clock in sorted(values):
            value = Fraction(values[clock])
            if value < 0:
                raise ValueError(f"clock {clock} must be >= 0")
            converted.append((clock, value))
        return cls(tuple(converted))

    def __getitem__(self, clock: str) -> Fraction:
        for name, value in self.values:
            if name == clock:
                return value
        raise KeyError(clock)

    @property
    def clocks(self) -> tuple[str, ...]:
        return tuple(name for name, _ in self.values)

    def as_dict(self) -> dict[str, Fraction]:
        return dict(self.values)

    def __str__(self) -> str:
        return "(" + ", ".join(f"{name}={value}" for name, value in self.values) + ")"


def elapse(valuation: ClockValuation, delay: Fraction) -> ClockValuation:
    if delay < 0:
        raise ValueError("delay must be >= 0")
    return ClockValuation(tuple((name, value + delay) for name, value in valuation.values))


def reset(valuation: ClockValuation, clocks: Iterable[str]) -> ClockValuation:
    targets = set(clocks)
    unknown = targets.difference(valuation.clocks)
    if unknown:
        raise ValueError(f"unknown clock(s): {', '.join(sorted(unknown))}")
    if not targets:
        return valuation
    return ClockValuation(
        tuple((name, Fraction(0) if name in targets else value) for name, value in valuation.values)
    )


@dataclass(frozen=True, order=True)
class ClockClass:
    """One K-equivalence class of a single clock: a point n, an open unit interval (n, n+1) or above K."""

    kind: str
    n: int = 0

    def __str__(self) -> str:
        if self.kind == "point":
            return f"[{self.n}]"
        if self.kind == "open":
            return f"({self.n},{self.n + 1})"
        return ">K"

    @property
    def upper_end(self) -> Fraction:
        if self.kind == "point":
            return Fraction(self.n)
        return Fraction(self.n + 1)


def point(n: int) -> ClockClass:
    return ClockClass("point", n)


def open_between(n: int) -> ClockClass:
    return ClockClass("open", n)


def above_k() -> ClockClass:
    return ClockClass("above", 0)


def class_of_value(value: Fraction, max_constant: int) -> ClockClass:
    if value > max_constant:
        return above_k()
    if value.denominator == 1:
        return point(value.numerator)
    return open_between(math.floor(value))


@dataclass(frozen=True)
class KClass:
    per_clock: tuple[tuple[str, ClockClass], ...]

    def __getitem__(self, clock: str) -> ClockClass:
        for name, clock_class in self.per_clock:
            if name == clock:
                return clock_class
        raise KeyError(clock)

    @property
    def clocks(self) -> tuple[str, ...]:
        return tuple(name for name, _ in self.per_clock)

    def sort_key(self) -> tuple:
        return tuple((name, clock_class.kind != "point", clock_class) for name, clock_class in self.per_clock)

    def __str__(self) -> str:
        return " & ".join(f"{name}∈{clock_class}" for name, clock_class in self.per_clock)


def k_class_of(valuation: ClockValuation, max_constant: int) -> KClass:
    if max_constant < 0:
        raise ValueError("K must be >= 0")
    return KClass(tuple((name, class_of_value(value, max_constant)) for name, value in valuation.values))


def k_equivalent(first: Fraction, second: Fraction, max_constant: int) -> bool:
    if first > max_constant and second > max_constant:
        return True
    if first.denominator == 1 or second.denominator == 1:
        return first == second
    return math.floor(first) == math.floor(second)


@dataclass(frozen=True)
class Interval:
    lower: int = 0
    lower_strict: bool = False
    upper: Optional[int] = None
    upper_strict: bool = False

    @property
    def is_empty(self) -> bool:
        if self.upper is None:
            return False
        if self.lower < self.upper:
            return False
        if self.lower == self.upper:
            return self.lower_strict or self.upper_strict
        return True

    @property
    def is_unbounded(self) -> bool:
        return self.lower == 0 and not self.lower_strict and self.upper is None

    def contains(self, value: Fraction) -> bool:
        if value < self.lower or (self.lower_strict and value == self.lower):
            return False
        if self.upper is not None:
            if value > self.upper or (self.upper_strict and value == self.upper):
                return False
        return True

    def contains_class(self, clock_class: ClockClass) -> bool:
        if clock_class.kind == "point":
            return self.contains(Fraction(clock_class.n))
        if clock_class.kind == "open":
            upper_ok = self.upper is None or self.upper >= clock_class.n + 1
            return self.lower <= clock_class.n and upper_ok
        return self.upper is None

    def intersect(self, other: "Interval") -> "Interval":
        if (self.lower, self.lower_strict) >= (other.lower, other.lower_strict):
            lower, lower_strict = self.lower, self.lower_strict
        else:
            lower, lower_strict = other.lower, other.lower_strict
        if self.upper is None:
            upper, upper_strict = other.upper, other.upper_strict
        elif other.upper is None:
            upper, upper_strict = self.upper, self.upper_strict
        elif (self.upper, not self.upper_strict) <= (other.upper, not other.upper_strict):
            upper, upper_strict = self.upper, self.upper_strict
        else:
            upper, upper_strict = other.upper, other.upper_strict
        return Interval(lower, lower_strict, upper, upper_strict)

    def atoms(self, clock: str) -> list[tuple[str, str, int]]:
        if self.upper is not None and self.lower == self.upper and not self.is_empty:
            return [(clock, "=", self.lower)]
        found: list[tuple[str, str, int]] = []
        if self.lower > 0 or self.lower_strict:
            found.append((clock, ">" if self.lower_strict else ">=", self.lower))
        if self.upper is not None:
            found.append((clock, "<" if self.upper_strict else "<=", self.upper))
        return found


def normalize_relation(relation: str) -> str:
    relation = _RELATION_ALIASES.get(relation, relation)
    if relation not in RELATIONS:
        raise ValueError(f"relation must be one of: {', '.join(RELATIONS)}")
    return relation


def negate_atom(atom: tuple[str, str, int]) -> tuple[str, str, int]:
    clock, relation, constant = atom
    relation = normalize_relation(relation)
    if relation == "=":
        raise ValueError("an equality atom has no single-atom complement")
    return clock, _NEGATED[relation], constant


def _atom_interval(relation: str, constant: int) -> Interval:
    if relation == "<":
        return Interval(upper=constant, upper_strict=True)
    if relation == "<=":
        return Interval(upper=constant)
    if relation == "=":
        return Interval(lower=constant, upper=constant)
    if relation == ">=":
        return Interval(lower=constant)
    return Interval(lower=constant, lower_strict=True)


@dataclass(frozen=True)
class Guard:
    """Conjunction of per-clock interval constraints, at most one lower and one upper atom per clock."""

    bounds: tuple[tuple[str, Interval], ...] = field(default=())

    @classmethod
    def true(cls) -> "Guard":
        return cls(())

    @classmethod
    def from_atoms(cls, atoms: Iterable[tuple[str, str, int]]) -> "Guard":
        intervals: dict[str, Interval] = {}
        for clock, relation, constant in atoms:
            relation = normalize_relation(relation)
            if not isinstance(constant, int) or isinstance(constant, bool) or constant < 0:
                raise ValueError(f"guard constant for {clock} must be a nonnegative integer")
            current = intervals.get(clock, Interval())
            intervals[clock] = current.intersect(_atom_interval(relation, constant))
        return cls.from_intervals(intervals)

    @classmethod
    def from_intervals(cls, intervals: Mapping[str, Interval]) -> "Guard":
        return cls(tuple((clock, intervals[clock]) for clock in sorted(intervals) if not intervals[clock].is_unbounded))

    def interval(self, clock: str) -> Interval:
        for name, interval in self.bounds:
            if name == clock:
                return interval
        return Interval()

    @property
    def is_true(self) -> bool:
        return not self.bounds

    @property
    def is_satisfiable(self) -> bool:
        return all(not interval.is_empty for _, interval in self.bounds)

    @property
    def max_constant(self) -> int:
        constants = [0]
        for _, interval in self.bounds:
            constants.append(interval.lower)
            if interval.upper is not None:
                constants.append(interval.upper)
        return max(constants)

    def conjoin(self, other: "Guard") -> "Guard":
        intervals = dict(self.bounds)
        for clock, interval in other.bounds:
            intervals[clock] = intervals.get(clock, Interval()).intersect(interval)
        return Guard.from_intervals(intervals)

    def with_atom(self, atom: tuple[str, str, int]) -> "Guard":
        return self.conjoin(Guard.from_atoms([atom]))

    def contains(self, valuation: ClockValuation) -> bool:
        return all(interval.contains(valuation[clock]) for clock, interval in self.bounds)

    def contains_class(self, kclass: KClass) -> bool:
        return all(interval.contains_class(kclass[clock]) for clock, interval in self.bounds)

    def atoms(self) -> list[tuple[str, str, int]]:
        found: list[tuple[str, str, int]] = []
        for clock, interval in self.bounds:
            found.extend(interval.atoms(clock))
        return found

    def clocks(self) -> tuple[str, ...]:
        return tuple(clock for clock, _ in self.bounds)

    @classmethod
    def of_class(cls, kclass: KClass, max_constant: int) -> "Guard":
        intervals: dict[str, Interval] = {}
        for clock, clock_class in kclass.per_clock:
            if clock_class.kind == "point":
                intervals[clock] = Interval(clock_class.n, False, clock_class.n, False)
            elif clock_class.kind == "open":
                intervals[clock] = Interval(clock_class.n, True, clock_class.n + 1, True)
            else:
                intervals[clock] = Interval(max_constant, True, None, False)
        return cls.from_intervals(intervals)

    def __str__(self) -> str:
        if not self.is_satisfiable:
            return "false"
        atoms = self.atoms()
        if not atoms:
            return "true"
        return " & ".join(f"{clock}{relation}{constant}" for clock, relation, constant in atoms)
