import itertools
import logging
from collections import deque
from contextlib import contextmanager
from dataclasses import dataclass, field
from typing import Callable, Iterator, Optional, Union

from .automaton import uncovered_guards
from .clocks import ClockValuation, Guard, KClass, elapse, k_class_of, reset
from .types import Label, Statistics, TraceLog
from .utils import clock_name, format_label, trace
from .words import (
    GuardedWordWithResets,
    KClosedWord,
    TimedWord,
    TimedWordWithResets,
    ZoneWordWithResets,
    k_closed_word_of,
    satisfies,
    witness_word,
    with_resets,
)
from .zones import Zone

logger = logging.getLogger(__name__)


class QueryLimitExceeded(RuntimeError):
    pass


@dataclass(eq=False)
class LanguageState:
    """TDG node for one guarded word with resets; identity-hashed."""

    parent: Optional["DecisionState"]
    reset: bool
    depth: int
    zone: Zone
    serial: int
    labels: set[Label] = field(default_factory=set)
    children: dict[str, list["DecisionState"]] = field(default_factory=dict)

    def path(self) -> list[tuple["DecisionState", bool]]:
        steps = []
        state = self
        while state.parent is not None:
            steps.append((state.parent, state.reset))
            state = state.parent.parent
        steps.reverse()
        return steps

    def word(self) -> GuardedWordWithResets:
        return GuardedWordWithResets(tuple((decision.guard, decision.action, flag) for decision, flag in self.path()))

    def resets(self) -> tuple[bool, ...]:
        return tuple(flag for _, flag in self.path())

    def ancestor(self, depth: int) -> "LanguageState":
        if depth > self.depth or depth < 0:
            raise ValueError(f"no ancestor at depth {depth} for a state at depth {self.depth}")
        state = self
        while state.depth > depth:
            state = state.parent.parent
        return state

    def decisions(self) -> list["DecisionState"]:
        return [decision for action in sorted(self.children) for decision in self.children[action]]


@dataclass(eq=False)
class DecisionState:
    parent: LanguageState
    action: str
    guard: Guard
    children: dict[bool, LanguageState] = field(default_factory=dict)


@dataclass(eq=False)
class ObservationState:
    """TOG node for one K-closed word with resets."""

    parent: Optional["ObservationDecision"]
    reset: bool
    depth: int
    olabel: set[Label] = field(default_factory=set)
    words: set[TimedWord] = field(default_factory=set)
    invalid: bool = False
    children: dict[tuple[str, KClass], "ObservationDecision"] = field(default_factory=dict)

    def path(self) -> list[tuple["ObservationDecision", bool]]:
        steps = []
        state = self
        while state.parent is not None:
            steps.append((state.parent, state.reset))
            state = state.parent.parent
        steps.reverse()
        return steps

    def kword(self, clocks: tuple[str, ...], max_constant: int) -> KClosedWord:
        initial = k_class_of(ClockValuation.zero(clocks), max_constant)
        return KClosedWord(initial, tuple((decision.kclass, decision.action, flag) for decision, flag in self.path()))

    def resets(self) -> tuple[bool, ...]:
        return tuple(flag for _, flag in self.path())

    def sorted_children(self) -> list["ObservationDecision"]:
        return [self.children[key] for key in sorted(self.children, key=lambda key: (key[0], key[1].sort_key()))]


@dataclass(eq=False)
class ObservationDecision:
    parent: ObservationState
    action: str
    kclass: KClass
    children: dict[bool, ObservationState] = field(default_factory=dict)


class ObservationStructure:
    """Obs together with the timed decision graph and the timed observation graph built on it."""

    def __init__(
        self,
        alphabet: tuple[str, ...],
        max_constant: int,
        membership: Callable[[TimedWord], Label],
        trace_log: Optional[TraceLog] = None,
        trace_enabled: bool = False,
        max_queries: Optional[int] = None,
    ):
        if not alphabet:
            raise ValueError("alphabet must not be empty")
        if max_constant < 0:
            raise ValueError("K must be >= 0")
        self.alphabet = tuple(sorted(set(alphabet)))
        self.max_constant = max_constant
        self.clocks = tuple(sorted(clock_name(action) for action in self.alphabet))
        self.membership = membership
        self.trace_log = trace_log
        self.trace_enabled = trace_enabled or trace_log is not None
        self.max_queries = max_queries

        self.obs: dict[TimedWord, Label] = {}
        self.query_count = 0
        self.prune_count = 0
        self.phase = "request"
        self._serials = itertools.count()
        self.tdg_root = LanguageState(None, False, 0, Zone.zero(self.clocks).future(), next(self._serials))
        self.tog_root = ObservationState(None, False, 0)
        self.rebuild_queue: list[LanguageState] = []
        self.pending_words: deque[TimedWord] = deque()
        self.pending_invalid: deque[ObservationState] = deque()
        # ledgers of the guards introduced by refinement
        self.pairs: list = []
        self.validity_guards: list = []

    @contextmanager
    def in_phase(self, phase: str) -> Iterator[None]:
        previous = self.phase
        self.phase = phase
        try:
            yield
        finally:
            self.phase = previous

    # observations

    def request(self, word: TimedWord) -> Label:
        unknown = sorted(set(word.untimed()) - set(self.alphabet))
        if unknown:
            raise ValueError(f"unknown action(s) in word: {', '.join(unknown)}")
        for length in range(len(word)):
            prefix = word.prefix(length)
            if prefix not in self.obs:
                self._query(prefix)
        cached = self.obs.get(word)
        if cached is not None:
            return cached
        return self._query(word)

    def _query(self, word: TimedWord) -> Label:
        if self.max_queries is not None and self.query_count >= self.max_queries:
            raise QueryLimitExceeded(f"membership query limit {self.max_queries} reached")
        label = bool(self.membership(word))
        self.query_count += 1
        self.obs[word] = label
        trace(self.trace_enabled, self.trace_log, f"{self.phase}\t{word}\t{format_label(label)}")
        self.findpath_tog(word, label)
        self.pending_words.append(word)
        return label

    def request_guarded(self, guarded: GuardedWordWithResets) -> Label:
        if not guarded.letters:
            return self.request(TimedWord())
        frontier, _ = self.tog_frontier(guarded)
        candidates = sorted((word for state in frontier for word in state.words), key=TimedWord.sort_key)
        for word in candidates:
            if word in self.obs and satisfies(word, guarded, self.clocks) is not None:
                return self.obs[word]
        return self.request(witness_word(guarded, self.clocks))

    def settle(self) -> None:
        """Prune newly invalid paths, then insert deferred observations into the TDG."""
        while self.pending_invalid or self.pending_words:
            if self.pending_invalid:
                state = self.pending_invalid.popleft()
                if not state.words:
                    logger.warning("invalid observation state at depth %d has no witness word", state.depth)
                    continue
                word = min(state.words, key=TimedWord.sort_key)
                self.searchprune(word, state.resets())
                continue
            word = self.pending_words.popleft()
            self.findpath_tdg(word, self.obs[word])

    # timed observation graph

    def findpath_tog(self, word: TimedWord, label: Label) -> None:
        self._tog_descend(self.tog_root, word, label, 0, ClockValuation.zero(self.clocks))

    def _tog_descend(
        self, state: ObservationState, word: TimedWord, label: Label, index: int, valuation: ClockValuation
    ) -> None:
        if index == len(word):
            state.words.add(word)
            state.olabel.add(label)
            if len(state.olabel) > 1 and not state.invalid:
                self._mark_invalid(state)
            return
        delay, action = word.letters[index]
        moved = elapse(valuation, delay)
        kclass = k_class_of(moved, self.max_constant)
        decision = state.children.get((action, kclass))
        if decision is None:
            decision = self.addword_tog(state, word, index, kclass)
        for flag in (True, False):
            child = decision.children[flag]
            if child.invalid:
                continue
            following = reset(moved, [clock_name(action)]) if flag else moved
            self._tog_descend(child, word, label, index + 1, following)

    def addword_tog(self, state: ObservationState, word: TimedWord, index: int, kclass: KClass) -> ObservationDecision:
        action = word.letters[index][1]
        decision = ObservationDecision(state, action, kclass)
        prefix = word.prefix(index + 1)
        for flag in (True, False):
            child = ObservationState(decision, flag, state.depth + 1)
            if index + 1 < len(word) and prefix in self.obs:
                child.olabel.add(self.obs[prefix])
                child.words.add(prefix)
            decision.children[flag] = child
        state.children[(action, kclass)] = decision
        return decision

    def _mark_invalid(self, state: ObservationState) -> None:
        decision = state.parent
        if decision is None:
            raise RuntimeError(f"no automaton with constants <= {self.max_constant} is consistent with the observations")
        state.invalid = True
        self.pending_invalid.append(state)
        logger.debug("invalid observation state at depth %d: %s", state.depth, state.kword(self.clocks, self.max_constant))
        # a missing sibling counts as valid
        if len(decision.children) == 2 and all(child.invalid for child in decision.children.values()):
            if not decision.parent.invalid:
                self._mark_invalid(decision.parent)

    def tog_frontier(self, guarded: GuardedWordWithResets) -> tuple[list[ObservationState], bool]:
        """TOG states whose K-closed words are modeled by `guarded`, and whether an invalid one was met."""
        frontier = [self.tog_root]
        for guard, action, flag in guarded.letters:
            following = []
            for state in frontier:
                if state.invalid:
                    return frontier, True
                for decision in state.sorted_children():
                    if decision.action != action or not guard.contains_class(decision.kclass):
                        continue
                    child = decision.children.get(flag)
                    if child is not None:
                        following.append(child)
            frontier = following
        return frontier, any(state.invalid for state in frontier)

    def is_invalid(self, word: Union[KClosedWord, GuardedWordWithResets, ZoneWordWithResets]) -> bool:
        if isinstance(word, KClosedWord):
            return self._is_invalid_kword(word)
        if isinstance(word, GuardedWordWithResets):
            return self.tog_frontier(word)[1]
        if isinstance(word, ZoneWordWithResets):
            return self._is_invalid_zone_word(word)
        raise TypeError(f"unsupported word type: {type(word).__name__}")

    def _is_invalid_kword(self, word: KClosedWord) -> bool:
        state = self.tog_root
        for kclass, action, flag in word.steps:
            if state.invalid:
                return True
            decision = state.children.get((action, kclass))
            if decision is None or flag not in decision.children:
                return False
            state = decision.children[flag]
        return state.invalid

    def _is_invalid_zone_word(self, word: ZoneWordWithResets) -> bool:
        frontier = [self.tog_root]
        for zone, action, flag in word.steps:
            following = []
            for state in frontier:
                if state.invalid:
                    return True
                for decision in state.sorted_children():
                    if decision.action != action:
                        continue
                    if zone.and_guard(Guard.of_class(decision.kclass, self.max_constant)).is_empty:
                        continue
                    child = decision.children.get(flag)
                    if child is not None:
                        following.append(child)
            frontier = following
        return any(state.invalid for state in frontier)

    def is_invalid_word(self, word: TimedWord, resets: tuple[bool, ...]) -> bool:
        return self._is_invalid_kword(k_closed_word_of(with_resets(word, resets, self.clocks), self.max_constant))

    def is_invalid_state(self, state: LanguageState) -> bool:
        return self.tog_frontier(state.word())[1]

    def is_invalid_guarded_step(self, state: LanguageState, action: str, guard: Guard, flag: bool) -> bool:
        return self.is_invalid(state.word().append(guard, action, flag))

    # timed decision graph

    def findpath_tdg(self, word: TimedWord, label: Label) -> None:
        if word not in self.obs:
            self.obs[word] = label
        self._tdg_descend(self.tdg_root, word, label, 0, ClockValuation.zero(self.clocks))

    def _tdg_descend(
        self, state: LanguageState, word: TimedWord, label: Label, index: int, valuation: ClockValuation
    ) -> None:
        if index == len(word):
            state.labels.add(label)
            return
        delay, action = word.letters[index]
        if not state.children.get(action):
            self.addword_tdg(state, word, label, index, valuation)
            return
        moved = elapse(valuation, delay)
        decision = self.matching_decision(state, action, moved)
        if decision is None:
            # cell dropped by rebuild: no valid reset option there
            logger.debug("no guard at depth %d covers %s on %s", state.depth, moved, action)
            return
        for flag, child in list(decision.children.items()):
            following = reset(moved, [clock_name(action)]) if flag else moved
            self._tdg_descend(child, word, label, index + 1, following)

    def addword_tdg(
        self, state: LanguageState, word: TimedWord, label: Label, index: int, valuation: ClockValuation
    ) -> None:
        delay, action = word.letters[index]
        moved = elapse(valuation, delay)
        decision = DecisionState(state, action, Guard.true())
        state.children.setdefault(action, []).append(decision)
        prefix = word.prefix(index + 1)
        for flag in (True, False):
            if self.is_invalid_guarded_step(state, action, decision.guard, flag):
                continue
            child = self.new_language_state(decision, flag)
            decision.children[flag] = child
            child.labels.add(label if index + 1 == len(word) else self.request(prefix))
            following = reset(moved, [clock_name(action)]) if flag else moved
            self._tdg_descend(child, word, label, index + 1, following)
        if not decision.children:
            self.schedule_rebuild(state)

    def new_language_state(self, decision: DecisionState, flag: bool) -> LanguageState:
        zone = decision.parent.zone.and_guard(decision.guard)
        if flag:
            zone = zone.reset(clock_name(decision.action))
        return LanguageState(decision, flag, decision.parent.depth + 1, zone.future(), next(self._serials))

    def matching_decision(self, state: LanguageState, action: str, moved: ClockValuation) -> Optional[DecisionState]:
        for decision in state.children.get(action, ()):
            if decision.guard.contains(moved):
                return decision
        return None

    def searchprune(self, word: TimedWord, resets: tuple[bool, ...]) -> bool:
        """Detach the TDG subtree modeling an invalid word with resets; False when no such path is left."""
        if not word.letters:
            raise RuntimeError("the empty word cannot be invalid")
        state = self.tdg_root
        valuation = ClockValuation.zero(self.clocks)
        last = len(word) - 1
        for index, ((delay, action), flag) in enumerate(zip(word.letters, resets)):
            moved = elapse(valuation, delay)
            decision = self.matching_decision(state, action, moved)
            if decision is None or flag not in decision.children:
                return False
            if index == last:
                del decision.children[flag]
                self.prune_count += 1
                logger.debug("pruned %s branch after %s", "reset" if flag else "keep", word.describe())
                if not decision.children:
                    self.schedule_rebuild(state)
                return True
            state = decision.children[flag]
            valuation = reset(moved, [clock_name(action)]) if flag else moved
        return False

    # rebuild scheduling

    def schedule_rebuild(self, state: LanguageState) -> None:
        if state not in self.rebuild_queue:
            self.rebuild_queue.append(state)

    def is_attached(self, state: LanguageState) -> bool:
        while state.parent is not None:
            decision = state.parent
            if decision.children.get(state.reset) is not state:
                return False
            if decision not in decision.parent.children.get(decision.action, ()):
                return False
            state = decision.parent
        return state is self.tdg_root

    def normalized_rebuild_queue(self) -> list[LanguageState]:
        """Attached scheduled states with no scheduled ancestor, shallowest first."""
        attached = [state for state in self.rebuild_queue if self.is_attached(state)]
        kept = []
        for state in attached:
            ancestors = {id(state.ancestor(depth)) for depth in range(state.depth)}
            if not any(id(other) in ancestors for other in attached):
                kept.append(state)
        return sorted(kept, key=lambda state: (state.depth, state.serial))

    def schedule_empty_decisions(self) -> None:
        """Schedule every state left with a decision that has no reset option."""
        for state in self.language_states():
            if any(not decision.children for decision in state.decisions()):
                self.schedule_rebuild(state)

    # traversal and reporting

    def language_states(self) -> Iterator[LanguageState]:
        queue = deque([self.tdg_root])
        while queue:
            state = queue.popleft()
            yield state
            for decision in state.decisions():
                for flag in (True, False):
                    child = decision.children.get(flag)
                    if child is not None:
                        queue.append(child)

    def observation_states(self) -> Iterator[ObservationState]:
        queue = deque([self.tog_root])
        while queue:
            state = queue.popleft()
            yield state
            for decision in state.sorted_children():
                for flag in (True, False):
                    child = decision.children.get(flag)
                    if child is not None:
                        queue.append(child)

    def inconsistent_states(self) -> list[LanguageState]:
        return [state for state in self.language_states() if len(state.labels) > 1]

    def observations_through(self, state: LanguageState) -> list[tuple[TimedWord, TimedWordWithResets]]:
        """Observed words whose prefix of the state's length satisfies the state's guarded word."""
        guarded = state.word()
        found = []
        for word in sorted(self.obs, key=TimedWord.sort_key):
            if len(word) < state.depth:
                continue
            induced = satisfies(word.prefix(state.depth), guarded, self.clocks)
            if induced is not None:
                found.append((word, induced))
        return found

    def statistics(self) -> Statistics:
        language = decision = 0
        for state in self.language_states():
            language += 1
            decision += len(state.decisions())
        observation = invalid = 0
        for state in self.observation_states():
            observation += 1
            invalid += int(state.invalid)
        return {
            "tdg_language_states": language,
            "tdg_decision_states": decision,
            "tog_states": observation,
            "tog_invalid_states": invalid,
            "observations": len(self.obs),
            "membership_queries": self.query_count,
            "pending_inconsistencies": len(self.inconsistent_states()),
            "pruned_subtrees": self.prune_count,
            "scheduled_rebuilds": len(self.normalized_rebuild_queue()),
        }

    def audit(self) -> list[str]:
        """Full re-scan of the structural invariants, for tests."""
        violations: list[str] = []
        for state in self.language_states():
            name = f"language state {state.serial} ({state.word()})"
            if state.parent is not None and state.depth != state.parent.parent.depth + 1:
                violations.append(f"{name}: depth does not follow its parent")
            for action, decisions in state.children.items():
                for decision in decisions:
                    if decision.parent is not state or decision.action != action:
                        violations.append(f"{name}: decision parent link broken")
                    for flag, child in decision.children.items():
                        if child.parent is not decision or child.reset != flag:
                            violations.append(f"{name}: child parent link broken")
                guards = [decision.guard for decision in decisions]
                for first, second in itertools.combinations(guards, 2):
                    if first.conjoin(second).is_satisfiable:
                        violations.append(f"{name}: guards {first} and {second} on {action} overlap")
                for gap in uncovered_guards(guards, self.clocks):
                    if not state.zone.and_guard(gap).is_empty:
                        violations.append(f"{name}: guards on {action} leave {gap} uncovered")
        for state in self.observation_states():
            kword = state.kword(self.clocks, self.max_constant)
            for word in state.words:
                label = self.obs.get(word)
                if label is None or label not in state.olabel:
                    violations.append(f"observation state {kword}: word {word.describe()} not covered")
                elif k_closed_word_of(with_resets(word, state.resets(), self.clocks), self.max_constant) != kword:
                    violations.append(f"observation state {kword}: word {word.describe()} has another K-closed word")
        return violations
