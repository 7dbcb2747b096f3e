import logging
import math
from collections import deque
from dataclasses import dataclass
from fractions import Fraction
from typing import Optional, Sequence

from .automaton import Rera, Transition, complete, simulate
from .clocks import ClockClass, ClockValuation, KClass, above_k, open_between, point
from .utils import clock_name
from .words import TimedWord

logger = logging.getLogger(__name__)

RegionKey = tuple[tuple[int, int], ...]
ProductState = tuple[str, str, RegionKey]


@dataclass(frozen=True)
class EquivalenceResult:
    equivalent: bool
    counterexample: Optional[TimedWord] = None
    in_first: Optional[bool] = None
    in_second: Optional[bool] = None


def region_key(values: Sequence[Fraction], max_constant: int) -> RegionKey:
    """Classical region of a valuation: integral parts up to K plus the order of fractional parts."""
    fractions = sorted({value - math.floor(value) for value in values if value <= max_constant and value.denominator != 1})
    rank = {fraction: position + 1 for position, fraction in enumerate(fractions)}
    key = []
    for value in values:
        if value > max_constant:
            key.append((-1, 0))
        elif value.denominator == 1:
            key.append((value.numerator, 0))
        else:
            key.append((math.floor(value), rank[value - math.floor(value)]))
    return tuple(key)


def _compact(key: list[tuple[int, int]]) -> RegionKey:
    ranks = sorted({rank for integral, rank in key if integral >= 0 and rank > 0})
    renumber = {rank: position + 1 for position, rank in enumerate(ranks)}
    return tuple((integral, renumber[rank] if integral >= 0 and rank > 0 else rank) for integral, rank in key)


def next_region(key: RegionKey, max_constant: int) -> Optional[RegionKey]:
    """The immediate time successor of a region, or None once every clock is above K."""
    active = [rank for integral, rank in key if integral >= 0]
    if not active:
        return None
    if 0 in active:
        moved = []
        for integral, rank in key:
            if integral < 0:
                moved.append((integral, rank))
            elif rank == 0:
                moved.append((-1, 0) if integral == max_constant else (integral, 1))
            else:
                moved.append((integral, rank + 1))
        return _compact(moved)
    top = max(active)
    return tuple((integral + 1, 0) if integral >= 0 and rank == top else (integral, rank) for integral, rank in key)


def time_successors(key: RegionKey, max_constant: int) -> list[RegionKey]:
    regions = [key]
    while True:
        following = next_region(regions[-1], max_constant)
        if following is None:
            return regions
        regions.append(following)


def reset_region(key: RegionKey, position: int) -> RegionKey:
    moved = list(key)
    moved[position] = (0, 0)
    return _compact(moved)


def class_of_region(integral: int, rank: int) -> ClockClass:
    if integral < 0:
        return above_k()
    if rank == 0:
        return point(integral)
    return open_between(integral)


def delay_representatives(values: Sequence[Fraction], max_constant: int) -> list[Fraction]:
    """One delay per time-successor region, in increasing order."""
    breakpoints = {Fraction(0)}
    for value in values:
        if value > max_constant:
            continue
        for boundary in range(math.floor(value) + 1, max_constant + 1):
            breakpoints.add(boundary - value)
    ordered = sorted(breakpoints)
    delays: list[Fraction] = []
    for position, delay in enumerate(ordered):
        delays.append(delay)
        if position + 1 < len(ordered):
            delays.append((delay + ordered[position + 1]) / 2)
    delays.append(ordered[-1] + 1)
    return delays


class _StepTable:
    """Memoized transition lookup of one completed automaton on regions of its own clocks."""

    def __init__(self, automaton: Rera) -> None:
        self.automaton = automaton
        self.clocks = automaton.clocks
        self._cache: dict[tuple[str, str, RegionKey], Transition] = {}

    def step(self, location: str, action: str, half: RegionKey) -> Transition:
        cache_key = (location, action, half)
        found = self._cache.get(cache_key)
        if found is None:
            kclass = KClass(tuple((clock, class_of_region(*pair)) for clock, pair in zip(self.clocks, half)))
            matches = [
                transition
                for transition in self.automaton.outgoing(location, action)
                if transition.guard.contains_class(kclass)
            ]
            if len(matches) != 1:
                raise RuntimeError(f"completed automaton has {len(matches)} steps from {location} on {action}")
            found = matches[0]
            self._cache[cache_key] = found
        return found


def equivalent(first: Rera, second: Rera, action_order: Optional[Sequence[str]] = None) -> EquivalenceResult:
    """Region-product search; `action_order` picks which of the shortest counterexamples is found."""
    if set(first.alphabet) != set(second.alphabet):
        raise ValueError("automata must share the same alphabet")
    alphabet = tuple(sorted(first.alphabet))
    if action_order is not None:
        if sorted(action_order) != list(alphabet):
            raise ValueError("action_order must list every action exactly once")
        alphabet = tuple(action_order)
    left, right = complete(first), complete(second)
    clocks = left.clocks
    width = len(clocks)
    max_constant = max(first.max_constant, second.max_constant)
    left_steps, right_steps = _StepTable(left), _StepTable(right)
    positions = {action: clocks.index(clock_name(action)) for action in alphabet}
    successors: dict[RegionKey, list[RegionKey]] = {}

    start: ProductState = (left.initial, right.initial, tuple((0, 0) for _ in range(2 * width)))
    parents: dict[ProductState, Optional[tuple[ProductState, RegionKey, str]]] = {start: None}
    queue: deque[ProductState] = deque([start])
    while queue:
        state = queue.popleft()
        left_location, right_location, key = state
        if (left_location in left.accepting) != (right_location in right.accepting):
            word = _instantiate(_steps_to(state, parents), left, right, max_constant)
            return _verified(first, second, word)
        if key not in successors:
            successors[key] = time_successors(key, max_constant)
        for moved_key in successors[key]:
            left_half, right_half = moved_key[:width], moved_key[width:]
            for action in alphabet:
                left_step = left_steps.step(left_location, action, left_half)
                right_step = right_steps.step(right_location, action, right_half)
                landed = moved_key
                if left_step.reset:
                    landed = reset_region(landed, positions[action])
                if right_step.reset:
                    landed = reset_region(landed, width + positions[action])
                successor: ProductState = (left_step.target, right_step.target, landed)
                if successor in parents:
                    continue
                parents[successor] = (state, moved_key, action)
                queue.append(successor)
    logger.debug("equivalence check explored %d product states", len(parents))
    return EquivalenceResult(equivalent=True)


def _steps_to(
    state: ProductState, parents: dict[ProductState, Optional[tuple[ProductState, RegionKey, str]]]
) -> list[tuple[RegionKey, str]]:
    steps: list[tuple[RegionKey, str]] = []
    link = parents[state]
    while link is not None:
        previous, moved_key, action = link
        steps.append((moved_key, action))
        link = parents[previous]
    steps.reverse()
    return steps


def _instantiate(steps: list[tuple[RegionKey, str]], left: Rera, right: Rera, max_constant: int) -> TimedWord:
    """Replay region steps from concrete valuations, picking a delay that reaches each recorded region."""
    clocks = left.clocks
    width = len(clocks)
    values = [Fraction(0)] * (2 * width)
    left_location, right_location = left.initial, right.initial
    letters = []
    for moved_key, action in steps:
        chosen = None
        for delay in delay_representatives(values, max_constant):
            if region_key([value + delay for value in values], max_constant) == moved_key:
                chosen = delay
                break
        if chosen is None:
            raise RuntimeError("region path could not be instantiated")
        moved = [value + chosen for value in values]
        left_step = left.enabled(left_location, action, ClockValuation(tuple(zip(clocks, moved[:width]))))
        right_step = right.enabled(right_location, action, ClockValuation(tuple(zip(clocks, moved[width:]))))
        position = clocks.index(clock_name(action))
        if left_step.reset:
            moved[position] = Fraction(0)
        if right_step.reset:
            moved[width + position] = Fraction(0)
        left_location, right_location = left_step.target, right_step.target
        values = moved
        letters.append((chosen, action))
    return TimedWord(tuple(letters))


def _verified(first: Rera, second: Rera, word: TimedWord) -> EquivalenceResult:
    in_first = simulate(first, word).accepted
    in_second = simulate(second, word).accepted
    if in_first == in_second:
        raise RuntimeError(f"counterexample {word.describe()} does not separate the automata")
    return EquivalenceResult(equivalent=False, counterexample=word, in_first=in_first, in_second=in_second)
