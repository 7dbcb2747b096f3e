import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterable, Optional, Sequence

from .clocks import ClockValuation, Guard, KClass, elapse, k_class_of, reset
from .utils import clock_name, format_rational, parse_rational
from .zones import Zone


@dataclass(frozen=True)
class TimedWord:
    letters: tuple[tuple[Fraction, str], ...] = field(default=())

    @classmethod
    def of(cls, letters: Iterable[tuple[object, str]]) -> "TimedWord":
        converted = []
        for delay, action in letters:
            value = Fraction(delay) if not isinstance(delay, str) else parse_rational(delay)
            if value < 0:
                raise ValueError("delays must be >= 0")
            converted.append((value, action))
        return cls(tuple(converted))

    @classmethod
    def parse(cls, text: str) -> "TimedWord":
        """Parse the wire syntax: space-separated `delay:action` pairs."""
        letters = []
        for token in text.split():
            delay_text, separator, action = token.partition(":")
            if not separator or not action:
                raise ValueError(f"malformed letter {token!r}; expected delay:action")
            letters.append((parse_rational(delay_text), action))
        return cls(tuple(letters))

    def __len__(self) -> int:
        return len(self.letters)

    def __iter__(self):
        return iter(self.letters)

    def prefix(self, length: int) -> "TimedWord":
        return TimedWord(self.letters[:length])

    def append(self, delay: Fraction, action: str) -> "TimedWord":
        return TimedWord(self.letters + ((Fraction(delay), action),))

    def untimed(self) -> tuple[str, ...]:
        return tuple(action for _, action in self.letters)

    def delays(self) -> tuple[Fraction, ...]:
        return tuple(delay for delay, _ in self.letters)

    def sort_key(self) -> tuple:
        return len(self.letters), self.letters

    def __str__(self) -> str:
        return " ".join(f"{format_rational(delay)}:{action}" for delay, action in self.letters)

    def describe(self) -> str:
        return str(self) or "ε"


@dataclass(frozen=True)
class TimedWordWithResets:
    word: TimedWord
    resets: tuple[bool, ...]
    run: tuple[ClockValuation, ...]
    # valuation right before each action, after the delay
    action_valuations: tuple[ClockValuation, ...]

    def __len__(self) -> int:
        return len(self.word)


def with_resets(word: TimedWord, resets: Sequence[bool], clocks: Iterable[str]) -> TimedWordWithResets:
    if len(resets) != len(word):
        raise ValueError("a reset flag is required for every letter")
    valuation = ClockValuation.zero(clocks)
    run = [valuation]
    moved_values = []
    for (delay, action), flag in zip(word.letters, resets):
        moved = elapse(valuation, delay)
        moved_values.append(moved)
        valuation = reset(moved, [clock_name(action)]) if flag else moved
        run.append(valuation)
    return TimedWordWithResets(word, tuple(bool(flag) for flag in resets), tuple(run), tuple(moved_values))


@dataclass(frozen=True)
class GuardedWordWithResets:
    letters: tuple[tuple[Guard, str, bool], ...] = field(default=())

    def __len__(self) -> int:
        return len(self.letters)

    def append(self, guard: Guard, action: str, flag: bool) -> "GuardedWordWithResets":
        return GuardedWordWithResets(self.letters + ((guard, action, flag),))

    def untimed(self) -> tuple[str, ...]:
        return tuple(action for _, action, _ in self.letters)

    def resets(self) -> tuple[bool, ...]:
        return tuple(flag for _, _, flag in self.letters)

    def __str__(self) -> str:
        if not self.letters:
            return "ε"
        return ".".join(f"({guard},{action},{'{' + clock_name(action) + '}' if flag else '∅'})" for guard, action, flag in self.letters)


@dataclass(frozen=True)
class ZoneWordWithResets:
    # zone of the valuations at each action, before its reset
    steps: tuple[tuple[Zone, str, bool], ...]
    final: Zone


@dataclass(frozen=True)
class KClosedWord:
    initial: KClass
    # class of the valuation at each action, before its reset
    steps: tuple[tuple[KClass, str, bool], ...]

    def __len__(self) -> int:
        return len(self.steps)

    def __str__(self) -> str:
        parts = [str(self.initial)]
        for kclass, action, flag in self.steps:
            parts.append(f"{action},{kclass},{'reset' if flag else 'keep'}")
        return " -> ".join(parts)


def satisfies(
    word: TimedWord, guarded: GuardedWordWithResets, clocks: Iterable[str]
) -> Optional[TimedWordWithResets]:
    if word.untimed() != guarded.untimed():
        return None
    induced = with_resets(word, guarded.resets(), clocks)
    for moved, (guard, _, _) in zip(induced.action_valuations, guarded.letters):
        if not guard.contains(moved):
            return None
    return induced


def zone_word_of(guarded: GuardedWordWithResets, clocks: Iterable[str]) -> ZoneWordWithResets:
    names = tuple(sorted(clocks))
    zone = Zone.zero(names).future()
    steps = []
    for index, (guard, action, flag) in enumerate(guarded.letters):
        constrained = zone.and_guard(guard)
        if constrained.is_empty:
            raise ValueError(f"guarded word is unsatisfiable at index {index}")
        steps.append((constrained, action, flag))
        if flag:
            constrained = constrained.reset(clock_name(action))
        zone = constrained.future()
    return ZoneWordWithResets(tuple(steps), zone)


def k_closed_word_of(word: TimedWordWithResets, max_constant: int) -> KClosedWord:
    steps = tuple(
        (k_class_of(moved, max_constant), action, flag)
        for moved, (_, action), flag in zip(word.action_valuations, word.word.letters, word.resets)
    )
    return KClosedWord(k_class_of(word.run[0], max_constant), steps)


def lambda_sum(first: TimedWord, second: TimedWord, weight: Fraction) -> TimedWord:
    weight = Fraction(weight)
    if first.untimed() != second.untimed():
        raise ValueError("lambda_sum needs words with the same untimed projection")
    if weight < 0 or weight > 1:
        raise ValueError("lambda must lie in [0, 1]")
    return TimedWord(
        tuple(
            (weight * delay_1 + (1 - weight) * delay_2, action)
            for (delay_1, action), (delay_2, _) in zip(first.letters, second.letters)
        )
    )


def op_combine(first: TimedWord, second: TimedWord) -> TimedWord:
    """Integer parts of `first`, fractional parts of `second`, then the tail of `second`."""
    if len(first) > len(second):
        raise ValueError("the first word must not be longer than the second")
    if first.untimed() != second.prefix(len(first)).untimed():
        raise ValueError("the words must share their untimed projection on the common prefix")
    letters = []
    for (delay_1, action), (delay_2, _) in zip(first.letters, second.letters):
        letters.append((math.floor(delay_1) + (delay_2 - math.floor(delay_2)), action))
    letters.extend(second.letters[len(first) :])
    return TimedWord(tuple(letters))


def witness_word(guarded: GuardedWordWithResets, clocks: Iterable[str]) -> TimedWord:
    """Build a concrete timed word satisfying the guarded word, or raise ValueError."""
    names = tuple(sorted(clocks))
    # backward pass: windows[i] holds the valuations at action i that keep the suffix feasible
    windows: list[Zone] = [Zone.universe(names)] * len(guarded)
    feasible = Zone.universe(names)
    for index in range(len(guarded) - 1, -1, -1):
        guard, action, flag = guarded.letters[index]
        landing = feasible
        if flag:
            landing = feasible.and_clock_equals(clock_name(action), 0).free(clock_name(action))
        window = landing.and_guard(guard)
        if window.is_empty:
            raise ValueError(f"guarded word is unsatisfiable at index {index}")
        windows[index] = window
        feasible = window.past()
    valuation = ClockValuation.zero(names)
    if not feasible.contains(valuation):
        raise ValueError("guarded word is unsatisfiable from the zero valuation")
    letters = []
    for index, (_, action, flag) in enumerate(guarded.letters):
        span = windows[index].delay_window(valuation)
        if span is None:
            raise RuntimeError(f"witness construction lost feasibility at index {index}")
        delay = _pick_delay(*span)
        letters.append((delay, action))
        moved = elapse(valuation, delay)
        valuation = reset(moved, [clock_name(action)]) if flag else moved
    return TimedWord(tuple(letters))


def _pick_delay(low: Fraction, low_strict: bool, high: Optional[Fraction], high_strict: bool) -> Fraction:
    if high is None:
        return low + Fraction(1, 2) if low_strict else low
    if high == low:
        return low
    return (low + high) / 2
