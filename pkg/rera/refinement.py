import logging
import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Optional, Union

from rules.rules import DEFAULT_MAX_REFINEMENT_ROUNDS

from .clocks import ClockClass, ClockValuation, Guard, KClass, elapse, k_equivalent, negate_atom, reset
from .observation import DecisionState, LanguageState, ObservationState, ObservationStructure
from .types import Label
from .utils import clock_name
from .words import TimedWord, TimedWordWithResets, lambda_sum, op_combine, satisfies, with_resets

logger = logging.getLogger(__name__)

HALF = Fraction(1, 2)


class RefinementLimitExceeded(RuntimeError):
    pass


class ParentInvalidated:
    """Returned when new observations make the searched state itself invalid."""

    def __repr__(self) -> str:
        return "PARENT_INVALIDATED"


PARENT_INVALIDATED = ParentInvalidated()


@dataclass(frozen=True)
class AdjacentPair:
    first: TimedWordWithResets
    second: TimedWordWithResets
    labels: tuple[Label, Label]


@dataclass(frozen=True, order=True)
class Difference:
    index: int
    clock: str
    constant: int
    # ">=" when the second word's value lies below the constant, "<=" when above
    direction: str


@dataclass(frozen=True)
class ConsistencyGuard:
    depth: int
    clock: str
    constant: int
    direction: str
    pair: AdjacentPair

    def atom(self) -> tuple[str, str, int]:
        return self.clock, self.direction, self.constant


@dataclass(frozen=True)
class CommonBorder:
    clock: str
    # "<", "<=" or "T" when both a strict and a large inequality fit
    relation: str
    constant: int


@dataclass(frozen=True)
class ValidityGuard:
    state: LanguageState
    action: str
    guard: Guard
    clock: str
    relation: str
    constant: int

    def atom(self) -> tuple[str, str, int]:
        return self.clock, "<" if self.relation == "<" else "<=", self.constant


def _same_shape(first: TimedWordWithResets, second: TimedWordWithResets) -> None:
    if first.word.untimed() != second.word.untimed():
        raise ValueError("words must share their untimed projection")
    if first.resets != second.resets:
        raise ValueError("words must share their resets")


def is_adjacent(first: TimedWordWithResets, second: TimedWordWithResets, max_constant: int) -> bool:
    _same_shape(first, second)
    for left, right in zip(first.action_valuations, second.action_valuations):
        for clock in left.clocks:
            a, b = left[clock], right[clock]
            if a.denominator == 1 and a <= max_constant:
                if abs(a - b) >= 1:
                    return False
            elif not k_equivalent(a, b, max_constant):
                return False
    return True


def diff(first: TimedWordWithResets, second: TimedWordWithResets, max_constant: int) -> list[Difference]:
    if not is_adjacent(first, second, max_constant):
        raise ValueError("diff is only defined on adjacent words")
    found = []
    for index, (left, right) in enumerate(zip(first.action_valuations, second.action_valuations)):
        for clock in left.clocks:
            a, b = left[clock], right[clock]
            if a.denominator != 1 or a > max_constant or a == b:
                continue
            found.append(Difference(index, clock, a.numerator, ">=" if b < a else "<="))
    return sorted(found)


def consistency_guards(pair: AdjacentPair, max_constant: int) -> list[ConsistencyGuard]:
    best: dict[str, Difference] = {}
    for difference in diff(pair.first, pair.second, max_constant):
        current = best.get(difference.clock)
        if current is None or (difference.index, difference.constant) < (current.index, current.constant):
            best[difference.clock] = difference
    return [
        ConsistencyGuard(d.index, d.clock, d.constant, d.direction, pair)
        for d in sorted(best.values(), key=lambda d: (d.index, d.clock))
    ]


def _gaps_closed(first: TimedWordWithResets, second: TimedWordWithResets, max_constant: int) -> bool:
    for left, right in zip(first.action_valuations, second.action_valuations):
        for clock in left.clocks:
            a, b = left[clock], right[clock]
            if a > max_constant and b > max_constant:
                continue
            if abs(a - b) >= 1:
                return False
    return True


def _forcing_weight(
    first: TimedWordWithResets, second: TimedWordWithResets, max_constant: int
) -> Optional[Fraction]:
    """Weight on `second` that drives the first split coordinate onto its integer border."""
    for left, right in zip(first.action_valuations, second.action_valuations):
        for clock in left.clocks:
            a, b = left[clock], right[clock]
            if k_equivalent(a, b, max_constant) or a.denominator == 1 or b.denominator == 1:
                continue
            if a < b:
                return (math.floor(b) - a) / (b - a)
            return (a - math.floor(a)) / (a - b)
    return None


def adjpair(
    structure: ObservationStructure, positive: TimedWord, negative: TimedWord, resets: tuple[bool, ...]
) -> AdjacentPair:
    """Search λ-sums between an accepted and a rejected word until they form an adjacent pair."""
    if positive.untimed() != negative.untimed():
        raise ValueError("adjpair needs words with the same untimed projection")
    if not structure.request(positive) or structure.request(negative):
        raise ValueError("adjpair needs an accepted and a rejected word")
    clocks, max_constant = structure.clocks, structure.max_constant
    accepted = with_resets(positive, resets, clocks)
    rejected = with_resets(negative, resets, clocks)

    while not _gaps_closed(accepted, rejected, max_constant):
        middle = lambda_sum(accepted.word, rejected.word, HALF)
        if structure.request(middle):
            accepted = with_resets(middle, resets, clocks)
        else:
            rejected = with_resets(middle, resets, clocks)

    while True:
        weight = _forcing_weight(accepted, rejected, max_constant)
        if weight is None:
            break
        candidate = lambda_sum(rejected.word, accepted.word, weight)
        if structure.request(candidate):
            accepted = with_resets(candidate, resets, clocks)
        else:
            rejected = with_resets(candidate, resets, clocks)

    mean = with_resets(lambda_sum(accepted.word, rejected.word, HALF), resets, clocks)
    if structure.request(mean.word):
        pair = AdjacentPair(rejected, mean, (False, True))
    else:
        pair = AdjacentPair(accepted, mean, (True, False))
    if not is_adjacent(pair.first, pair.second, max_constant) or pair.labels[0] == pair.labels[1]:
        raise RuntimeError(f"adjpair produced a non-adjacent pair: {pair.first.word} / {pair.second.word}")
    return pair


def _class_position(clock_class: ClockClass, max_constant: int) -> int:
    if clock_class.kind == "point":
        return 2 * clock_class.n
    if clock_class.kind == "open":
        return 2 * clock_class.n + 1
    return 2 * max_constant + 1


def _as_bounded(clock_class: ClockClass, max_constant: int) -> ClockClass:
    if clock_class.kind == "above":
        return ClockClass("open", max_constant)
    return clock_class


def common_borders(first: KClass, second: KClass, max_constant: int) -> list[CommonBorder]:
    if first.clocks != second.clocks:
        raise ValueError("classes must range over the same clocks")
    found = []
    for clock in first.clocks:
        left = _as_bounded(first[clock], max_constant)
        right = _as_bounded(second[clock], max_constant)
        if left.kind == "open" and right.kind == "point":
            left, right = right, left
        if left.kind == "point" and right.kind == "open":
            if right.n == left.n - 1:
                found.append(CommonBorder(clock, "<", left.n))
            elif right.n == left.n:
                found.append(CommonBorder(clock, "<=", left.n))
        elif left.kind == "open" and right.kind == "open" and abs(left.n - right.n) == 1:
            found.append(CommonBorder(clock, "T", max(left.n, right.n)))
    return found


def _subtree_words(state: ObservationState) -> list[TimedWord]:
    words: set[TimedWord] = set()
    stack = [state]
    while stack:
        current = stack.pop()
        words.update(current.words)
        for decision in current.children.values():
            stack.extend(decision.children.values())
    return sorted(words, key=TimedWord.sort_key)


def _invalid_groups(
    structure: ObservationStructure, state: LanguageState, action: str, guard: Guard
) -> dict[bool, dict[KClass, list[TimedWord]]]:
    """Witness words of invalid extensions under `guard`, per reset option and K-class."""
    groups: dict[bool, dict[KClass, list[TimedWord]]] = {True: {}, False: {}}
    frontier, _ = structure.tog_frontier(state.word())
    for tog_state in frontier:
        for decision in tog_state.sorted_children():
            if decision.action != action or not guard.contains_class(decision.kclass):
                continue
            for flag in (True, False):
                child = decision.children.get(flag)
                if child is not None and child.invalid:
                    groups[flag].setdefault(decision.kclass, []).extend(_subtree_words(child))
    return groups


def _closest_classes(
    groups: dict[bool, dict[KClass, list[TimedWord]]], max_constant: int
) -> Optional[tuple[int, KClass, KClass]]:
    best = None
    for first in sorted(groups[True], key=KClass.sort_key):
        for second in sorted(groups[False], key=KClass.sort_key):
            distance = sum(
                abs(_class_position(first[clock], max_constant) - _class_position(second[clock], max_constant))
                for clock in first.clocks
            )
            if best is None or distance < best[0]:
                best = (distance, first, second)
    return best


def invalguard(
    structure: ObservationStructure, state: LanguageState, action: str, guard: Guard
) -> Union[ValidityGuard, ParentInvalidated, None]:
    """Locate a border separating the invalid reset-true and reset-false extensions under `guard`.

    Midpoint words move only the integer part of the delay at the decision point. Returns None
    when the midpoints stop bringing the two invalid classes closer.
    """
    depth = state.depth
    resets = state.resets()
    previous = None
    while True:
        if structure.is_invalid_state(state):
            return PARENT_INVALIDATED
        groups = _invalid_groups(structure, state, action, guard)
        closest = _closest_classes(groups, structure.max_constant)
        if closest is None:
            raise ValueError("invalguard needs invalid extensions under both reset options")
        distance, true_class, false_class = closest
        if distance == 0:
            return PARENT_INVALIDATED
        borders = common_borders(true_class, false_class, structure.max_constant)
        if borders:
            border = borders[0]
            found = ValidityGuard(state, action, guard, border.clock, border.relation, border.constant)
            structure.validity_guards.append(found)
            return found
        if previous is not None and distance >= previous:
            logger.debug("midpoint search stalled at distance %d", distance)
            return None
        previous = distance

        true_words = groups[True][true_class]
        false_words = groups[False][false_class]
        low = true_words[0].letters[depth][0]
        high = false_words[0].letters[depth][0]
        integral = math.floor((low + high) / 2)
        logger.debug("invalguard midpoint at delay integer part %d for depth %d resets %s", integral, depth, resets)
        with structure.in_phase("invalguard"):
            for word in sorted(set(true_words) | set(false_words), key=TimedWord.sort_key):
                # integer part from the midpoint, fractional parts and tail from the word
                integer_prefix = TimedWord(word.letters[:depth] + ((Fraction(integral), word.letters[depth][1]),))
                structure.request(op_combine(integer_prefix, word))


def _proper_split(state: LanguageState, guard: Guard, atom: tuple[str, str, int]) -> Optional[list[Guard]]:
    inside = guard.with_atom(atom)
    outside = guard.with_atom(negate_atom(atom))
    for part in (inside, outside):
        if not part.is_satisfiable or state.zone.and_guard(part).is_empty:
            return None
    return [inside, outside]


def _passes(pair: AdjacentPair, structure: ObservationStructure, state: LanguageState, action: str, guard: Guard) -> bool:
    depth = state.depth
    guarded = state.word()
    for member in (pair.first, pair.second):
        if len(member) <= depth or member.word.letters[depth][1] != action:
            return False
        if member.resets[:depth] != state.resets():
            return False
        if satisfies(member.word.prefix(depth), guarded, structure.clocks) is None:
            return False
        if not guard.contains(member.action_valuations[depth]):
            return False
    return True


def _fallback_atom(
    structure: ObservationStructure, state: LanguageState, action: str, guard: Guard
) -> Optional[tuple[str, str, int]]:
    closest = _closest_classes(_invalid_groups(structure, state, action, guard), structure.max_constant)
    if closest is None:
        return None
    _, true_class, false_class = closest
    for clock in true_class.clocks:
        left, right = true_class[clock], false_class[clock]
        if left == right:
            continue
        lower = min(left, right, key=lambda item: _class_position(item, structure.max_constant))
        if lower.kind == "point":
            return clock, "<=", lower.n
        return clock, "<", lower.n + 1
    return None


def findguard(
    structure: ObservationStructure, state: LanguageState, action: str, guard: Guard
) -> Optional[list[Guard]]:
    """Partition `guard` so every cell keeps at least one valid reset option; None if `state` turned invalid."""
    if structure.is_invalid_state(state):
        return None
    atom = None
    for pair in structure.pairs:
        if not _passes(pair, structure, state, action, guard):
            continue
        for consistency in consistency_guards(pair, structure.max_constant):
            if consistency.depth == state.depth and _proper_split(state, guard, consistency.atom()):
                atom = consistency.atom()
                break
        if atom is not None:
            break

    if atom is None and structure.is_invalid_guarded_step(state, action, guard, True) and structure.is_invalid_guarded_step(
        state, action, guard, False
    ):
        found = invalguard(structure, state, action, guard)
        if found is PARENT_INVALIDATED:
            return None
        atom = found.atom() if found is not None else None
        if atom is None or _proper_split(state, guard, atom) is None:
            atom = _fallback_atom(structure, state, action, guard)

    parts = _proper_split(state, guard, atom) if atom is not None else None
    if parts is None:
        return [guard]
    partition = []
    for part in parts:
        cells = findguard(structure, state, action, part)
        if cells is None:
            return None
        partition.extend(cells)
    return partition


def rebuild(structure: ObservationStructure, state: LanguageState) -> None:
    """Re-create the subtree below `state` from the observations passing through it."""
    candidates = [(word, induced.run[-1]) for word, induced in structure.observations_through(state)]
    state.children = {}
    _rebuild_below(structure, state, candidates)


def _rebuild_below(
    structure: ObservationStructure, state: LanguageState, candidates: list[tuple[TimedWord, ClockValuation]]
) -> None:
    actions = sorted({word.letters[state.depth][1] for word, _ in candidates if len(word) > state.depth})
    for action in actions:
        partition = findguard(structure, state, action, Guard.true())
        if partition is None:
            logger.debug("state at depth %d became invalid during rebuild", state.depth)
            return
        for guard in partition:
            if state.zone.and_guard(guard).is_empty:
                continue
            decision = DecisionState(state, action, guard)
            passing = []
            for word, valuation in candidates:
                if len(word) <= state.depth or word.letters[state.depth][1] != action:
                    continue
                moved = elapse(valuation, word.letters[state.depth][0])
                if guard.contains(moved):
                    passing.append((word, moved))
            branches = []
            for flag in (True, False):
                if structure.is_invalid_guarded_step(state, action, guard, flag):
                    continue
                child = structure.new_language_state(decision, flag)
                following = [
                    (word, reset(moved, [clock_name(action)]) if flag else moved) for word, moved in passing
                ]
                labels = {structure.obs[word] for word, _ in following if len(word) == child.depth}
                if not labels:
                    labels = {structure.request_guarded(child.word())}
                child.labels = labels
                decision.children[flag] = child
                branches.append((child, following))
            if not branches:
                logger.warning("no valid reset option under %s on %s at depth %d", guard, action, state.depth)
                continue
            state.children.setdefault(action, []).append(decision)
            for child, following in branches:
                _rebuild_below(structure, child, following)


def resolve_inconsistency(structure: ObservationStructure, state: LanguageState) -> Optional[LanguageState]:
    """Derive an adjacent pair for a state labelled both ways and schedule the rebuild it calls for."""
    ending = [(word, induced) for word, induced in structure.observations_through(state) if len(word) == state.depth]
    positives = [word for word, _ in ending if structure.obs[word]]
    negatives = [word for word, _ in ending if not structure.obs[word]]
    if not positives or not negatives:
        return None
    pair = adjpair(structure, positives[0], negatives[0], state.resets())
    guards = consistency_guards(pair, structure.max_constant)
    if not guards:
        return None
    if any(known.first == pair.first and known.second == pair.second for known in structure.pairs):
        return None
    structure.pairs.append(pair)
    target = state.ancestor(min(guard.depth for guard in guards))
    structure.schedule_rebuild(target)
    return target


def refine_structure(structure: ObservationStructure, max_rounds: int = DEFAULT_MAX_REFINEMENT_ROUNDS) -> int:
    """Drain rebuilds and inconsistencies until the structure is settled; returns the rounds used."""
    rounds = 0
    skipped: set[int] = set()
    while True:
        structure.settle()
        queue = structure.normalized_rebuild_queue()
        if not queue:
            structure.schedule_empty_decisions()
            queue = structure.normalized_rebuild_queue()
        if not queue:
            structure.rebuild_queue.clear()
            pending = [state for state in structure.inconsistent_states() if state.serial not in skipped]
            if not pending:
                return rounds
        rounds += 1
        if rounds > max_rounds:
            raise RefinementLimitExceeded(f"refinement did not settle within {max_rounds} rounds")
        if queue:
            target = queue[0]
            structure.rebuild_queue = [state for state in structure.rebuild_queue if state is not target]
            with structure.in_phase("rebuild"):
                rebuild(structure, target)
            continue
        state = pending[0]
        with structure.in_phase("adjpair"):
            target = resolve_inconsistency(structure, state)
        if target is None:
            skipped.add(state.serial)
