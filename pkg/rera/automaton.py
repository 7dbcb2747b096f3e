import itertools
import logging
from dataclasses import dataclass, field
from fractions import Fraction
from functools import cached_property
from typing import Optional

from rules.rules import SINK_LOCATION

from .clocks import ClockValuation, Guard, Interval, elapse, reset
from .utils import clock_name
from .words import TimedWord

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class Transition:
    source: str
    action: str
    guard: Guard
    reset: bool
    target: str

    def __str__(self) -> str:
        reset_text = "{" + clock_name(self.action) + "}" if self.reset else "∅"
        return f"{self.source} -{self.action}, {self.guard}, {reset_text}-> {self.target}"


@dataclass(frozen=True)
class Rera:
    alphabet: tuple[str, ...]
    locations: tuple[str, ...]
    initial: str
    accepting: frozenset[str]
    transitions: tuple[Transition, ...]
    max_constant: int

    @property
    def clocks(self) -> tuple[str, ...]:
        return tuple(sorted(clock_name(action) for action in self.alphabet))

    @cached_property
    def _outgoing(self) -> dict[tuple[str, str], tuple[Transition, ...]]:
        table: dict[tuple[str, str], list[Transition]] = {}
        for transition in self.transitions:
            table.setdefault((transition.source, transition.action), []).append(transition)
        return {key: tuple(value) for key, value in table.items()}

    def outgoing(self, location: str, action: str) -> tuple[Transition, ...]:
        return self._outgoing.get((location, action), ())

    def enabled(self, location: str, action: str, valuation: ClockValuation) -> Optional[Transition]:
        matches = [transition for transition in self.outgoing(location, action) if transition.guard.contains(valuation)]
        if len(matches) > 1:
            raise RuntimeError(f"nondeterministic step from {location} on {action} at {valuation}")
        return matches[0] if matches else None


@dataclass
class SimulationResult:
    accepted: bool
    locations: list[str] = field(default_factory=list)
    valuations: list[ClockValuation] = field(default_factory=list)
    transitions: list[Transition] = field(default_factory=list)
    blocked_at: Optional[int] = None


def validate(automaton: Rera) -> list[str]:
    violations: list[str] = []
    alphabet = set(automaton.alphabet)
    locations = set(automaton.locations)
    clocks = set(automaton.clocks)
    if len(alphabet) != len(automaton.alphabet):
        violations.append("alphabet contains duplicate symbols")
    if len(locations) != len(automaton.locations):
        violations.append("locations contain duplicates")
    if automaton.initial not in locations:
        violations.append(f"initial location {automaton.initial!r} is not a declared location")
    for location in sorted(automaton.accepting - locations):
        violations.append(f"accepting location {location!r} is not a declared location")
    if automaton.max_constant < 0:
        violations.append("max_constant must be >= 0")

    for index, transition in enumerate(automaton.transitions):
        name = f"transition {index} ({transition})"
        if transition.source not in locations:
            violations.append(f"{name}: unknown source {transition.source!r}")
        if transition.target not in locations:
            violations.append(f"{name}: unknown target {transition.target!r}")
        if transition.action not in alphabet:
            violations.append(f"{name}: action {transition.action!r} is not in the alphabet")
        unknown = set(transition.guard.clocks()) - clocks
        if unknown:
            violations.append(f"{name}: guard uses unknown clock(s) {', '.join(sorted(unknown))}")
        if transition.guard.max_constant > automaton.max_constant:
            violations.append(f"{name}: guard constant exceeds max_constant {automaton.max_constant}")
        if not transition.guard.is_satisfiable:
            violations.append(f"{name}: guard is unsatisfiable")

    indexed = list(enumerate(automaton.transitions))
    for (i, first), (j, second) in itertools.combinations(indexed, 2):
        if first.source != second.source or first.action != second.action:
            continue
        if first.guard.conjoin(second.guard).is_satisfiable:
            violations.append(
                f"transitions {i} and {j} overlap: same source {first.source!r} and action {first.action!r}"
                f" with guards {first.guard} and {second.guard}"
            )
    return violations


def simulate(automaton: Rera, word: TimedWord) -> SimulationResult:
    valuation = ClockValuation.zero(automaton.clocks)
    location = automaton.initial
    result = SimulationResult(accepted=False, locations=[location], valuations=[valuation])
    for index, (delay, action) in enumerate(word.letters):
        if action not in automaton.alphabet:
            raise ValueError(f"action {action!r} is not in the alphabet")
        moved = elapse(valuation, delay)
        transition = automaton.enabled(location, action, moved)
        if transition is None:
            result.blocked_at = index
            return result
        valuation = reset(moved, [clock_name(action)]) if transition.reset else moved
        location = transition.target
        result.transitions.append(transition)
        result.locations.append(location)
        result.valuations.append(valuation)
    result.accepted = location in automaton.accepting
    return result


def complete(automaton: Rera) -> Rera:
    """Add a non-accepting sink so every (location, action) guard set covers all valuations."""
    sink = SINK_LOCATION
    while sink in automaton.locations:
        sink = f"_{sink}"
    extra: list[Transition] = []
    for location in automaton.locations:
        for action in automaton.alphabet:
            guards = [transition.guard for transition in automaton.outgoing(location, action)]
            for gap in uncovered_guards(guards, automaton.clocks):
                extra.append(Transition(location, action, gap, False, sink))
    if not extra:
        return automaton
    for action in automaton.alphabet:
        extra.append(Transition(sink, action, Guard.true(), False, sink))
    return Rera(
        alphabet=automaton.alphabet,
        locations=automaton.locations + (sink,),
        initial=automaton.initial,
        accepting=automaton.accepting,
        transitions=automaton.transitions + tuple(extra),
        max_constant=automaton.max_constant,
    )


def _clock_cells(constants: set[int]) -> list[Interval]:
    cells: list[Interval] = []
    ordered = sorted(constants | {0})
    for position, constant in enumerate(ordered):
        cells.append(Interval(lower=constant, upper=constant))
        if position + 1 < len(ordered):
            cells.append(Interval(constant, True, ordered[position + 1], True))
        else:
            cells.append(Interval(constant, True, None, False))
    return cells


def uncovered_guards(guards: list[Guard], clocks: tuple[str, ...]) -> list[Guard]:
    if not guards:
        return [Guard.true()]
    per_clock: list[list[Interval]] = []
    for clock in clocks:
        constants: set[int] = set()
        for guard in guards:
            interval = guard.interval(clock)
            constants.add(interval.lower)
            if interval.upper is not None:
                constants.add(interval.upper)
        per_clock.append(_clock_cells(constants))
    gaps: list[Guard] = []
    for cell in itertools.product(*per_clock):
        candidate = Guard.from_intervals(dict(zip(clocks, cell)))
        witness = {clock: _cell_witness(interval) for clock, interval in zip(clocks, cell)}
        valuation = ClockValuation.of(witness)
        if not any(guard.contains(valuation) for guard in guards):
            gaps.append(candidate)
    return gaps


def _cell_witness(interval: Interval) -> Fraction:
    if interval.upper is None:
        return Fraction(interval.lower) + Fraction(1, 2)
    return (Fraction(interval.lower) + Fraction(interval.upper)) / 2
