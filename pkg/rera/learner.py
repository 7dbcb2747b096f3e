import itertools
import logging
from collections import Counter, deque
from dataclasses import dataclass, field
from typing import Callable, Iterator, Optional

from rules.rules import DEFAULT_MAX_REFINEMENT_ROUNDS, STRATEGY_POOL_FACTOR

from .automaton import Rera, Transition, simulate, validate
from .clocks import Guard
from .observation import DecisionState, LanguageState, ObservationStructure, QueryLimitExceeded
from .refinement import RefinementLimitExceeded, refine_structure
from .teacher import SimulatedTeacher
from .types import Label, ProgressState, Statistics, TraceLog
from .validation import Limits
from .words import TimedWord

logger = logging.getLogger(__name__)


class InconsistentHypothesis(RuntimeError):
    """No fold explains a disagreement between a merged hypothesis and obs."""


@dataclass
class ResetStrategy:
    choice: dict[DecisionState, bool] = field(default_factory=dict)

    def __len__(self) -> int:
        return len(self.choice)


@dataclass(eq=False)
class GraphNode:
    state: LanguageState
    serial: int
    # (action, guard, reset, child)
    edges: list[tuple[str, Guard, bool, "GraphNode"]] = field(default_factory=list)

    @property
    def labels(self) -> set[Label]:
        return self.state.labels


@dataclass
class ResultingGraph:
    root: GraphNode
    nodes: list[GraphNode]
    _heights: dict[int, int] = field(default_factory=dict)

    def height(self, node: GraphNode) -> int:
        cached = self._heights.get(node.serial)
        if cached is None:
            cached = 1 + max((self.height(child) for _, _, _, child in node.edges), default=-1)
            self._heights[node.serial] = cached
        return cached


@dataclass
class FoldingSet:
    members: list[GraphNode]
    # serial of a folded node -> the U-member it folds into
    folds: dict[int, GraphNode]


@dataclass
class LearnResult:
    hypothesis: Optional[Rera]
    success: bool
    reason: str
    iterations: int
    membership_count: int
    distinct_membership_count: int
    equivalence_count: int
    statistics: Statistics


def admissible_strategies(structure: ObservationStructure) -> Iterator[ResetStrategy]:
    """Enumerate strategies over the decision states they reach, in lexicographic order with reset first."""
    if structure.normalized_rebuild_queue():
        raise ValueError("admissible strategies need a drained rebuild queue")

    def extend(pending: tuple[DecisionState, ...], choice: dict[DecisionState, bool]) -> Iterator[ResetStrategy]:
        if not pending:
            yield ResetStrategy(dict(choice))
            return
        decision, rest = pending[0], pending[1:]
        for flag in (True, False):
            child = decision.children.get(flag)
            if child is None:
                continue
            choice[decision] = flag
            yield from extend(rest + tuple(child.decisions()), choice)
            del choice[decision]

    yield from extend(tuple(structure.tdg_root.decisions()), {})


def mergeable_pair_estimate(structure: ObservationStructure, strategy: ResetStrategy) -> int:
    """Pairs of reached states with equal labels, an upper bound on the pairs the preorder can relate."""
    counts: Counter[frozenset[Label]] = Counter()
    queue = deque([structure.tdg_root])
    while queue:
        state = queue.popleft()
        counts[frozenset(state.labels)] += 1
        for decision in state.decisions():
            child = decision.children.get(strategy.choice.get(decision))
            if child is not None:
                queue.append(child)
    return sum(count * (count - 1) // 2 for count in counts.values())


def ranked_strategies(structure: ObservationStructure, max_strategies: int) -> list[ResetStrategy]:
    """The first `max_strategies` of a bounded pool, most mergeable pairs first, then lexicographic."""
    pool = list(itertools.islice(admissible_strategies(structure), max_strategies * STRATEGY_POOL_FACTOR))
    # sorted() is stable, so ties keep the lexicographic order of the pool
    pool.sort(key=lambda strategy: -mergeable_pair_estimate(structure, strategy))
    return pool[:max_strategies]


def apply_strategy(structure: ObservationStructure, strategy: ResetStrategy) -> ResultingGraph:
    counter = itertools.count()
    root = GraphNode(structure.tdg_root, next(counter))
    nodes = [root]
    queue = deque([root])
    while queue:
        node = queue.popleft()
        for decision in node.state.decisions():
            if decision not in strategy.choice:
                raise ValueError(f"strategy has no choice for {decision.action}, {decision.guard} at depth {node.state.depth}")
            flag = strategy.choice[decision]
            child_state = decision.children.get(flag)
            if child_state is None:
                raise ValueError(
                    f"strategy is not admissible: no {'reset' if flag else 'keep'} child under"
                    f" {decision.action}, {decision.guard} at depth {node.state.depth}"
                )
            child = GraphNode(child_state, next(counter))
            node.edges.append((decision.action, decision.guard, flag, child))
            nodes.append(child)
            queue.append(child)
    return ResultingGraph(root, nodes)


def _compatible(first: GraphNode, second: GraphNode, memo: dict[tuple[int, int], bool]) -> bool:
    key = (first.serial, second.serial)
    if key in memo:
        return memo[key]
    memo[key] = True
    result = first.labels == second.labels
    if result:
        for action, guard, flag, child in first.edges:
            for other_action, other_guard, other_flag, other_child in second.edges:
                if action != other_action or flag != other_flag:
                    continue
                if not guard.conjoin(other_guard).is_satisfiable:
                    continue
                if not _compatible(child, other_child, memo):
                    result = False
                    break
            if not result:
                break
    memo[key] = result
    return result


def preorder_leq(graph: ResultingGraph, first: GraphNode, second: GraphNode, memo: Optional[dict] = None) -> bool:
    if graph.height(first) > graph.height(second):
        return False
    return _compatible(first, second, memo if memo is not None else {})


def select_U(
    graph: ResultingGraph,
    forbidden: frozenset[tuple[int, int]] = frozenset(),
    memo: Optional[dict[tuple[int, int], bool]] = None,
) -> FoldingSet:
    if memo is None:
        memo = {}
    members = [graph.root]
    folds: dict[int, GraphNode] = {}
    queue = deque([graph.root])
    while queue:
        node = queue.popleft()
        for _, _, _, child in node.edges:
            targets = [
                member
                for member in members
                if (child.serial, member.serial) not in forbidden and preorder_leq(graph, child, member, memo)
            ]
            if targets:
                folds[child.serial] = min(targets, key=lambda member: (graph.height(member), member.serial))
                continue
            members.append(child)
            queue.append(child)
    return FoldingSet(members, folds)


def merge(
    structure: ObservationStructure, graph: ResultingGraph, folding: FoldingSet
) -> tuple[Rera, dict[tuple[str, str, Guard], Optional[tuple[int, int]]]]:
    """Fold the resulting graph into a RERA; also returns which fold produced each transition."""
    names = {member.serial: f"q{index}" for index, member in enumerate(folding.members)}
    transitions = []
    provenance: dict[tuple[str, str, Guard], Optional[tuple[int, int]]] = {}
    for member in folding.members:
        for action, guard, flag, child in member.edges:
            if child.serial in names:
                target, fold = names[child.serial], None
            else:
                folded = folding.folds.get(child.serial)
                if folded is None:
                    raise RuntimeError(f"no fold target for a successor of {names[member.serial]}")
                target, fold = names[folded.serial], (child.serial, folded.serial)
            transitions.append(Transition(names[member.serial], action, guard, flag, target))
            provenance[(names[member.serial], action, guard)] = fold
    hypothesis = Rera(
        alphabet=structure.alphabet,
        locations=tuple(names[member.serial] for member in folding.members),
        initial=names[graph.root.serial],
        accepting=frozenset(names[member.serial] for member in folding.members if member.labels == {True}),
        transitions=tuple(transitions),
        max_constant=structure.max_constant,
    )
    return hypothesis, provenance


# (source member serial, action, guard, target member serial)
RunStep = tuple[int, str, Guard, int]


def build_hypothesis(structure: ObservationStructure, graph: ResultingGraph) -> Rera:
    """Merge, then forbid folds that break agreement with stored observations until none does.

    Raises InconsistentHypothesis when a disagreeing run uses no fold at all.
    """
    forbidden: set[tuple[int, int]] = set()
    memo: dict[tuple[int, int], bool] = {}
    # runs checked in an earlier round; a run whose steps all survive is unchanged
    checked: dict[TimedWord, tuple[RunStep, ...]] = {}
    words = sorted(structure.obs, key=TimedWord.sort_key)
    while True:
        folding = select_U(graph, frozenset(forbidden), memo)
        hypothesis, provenance = merge(structure, graph, folding)
        serials = {f"q{index}": member.serial for index, member in enumerate(folding.members)}
        steps = {
            (serials[transition.source], transition.action, transition.guard, serials[transition.target])
            for transition in hypothesis.transitions
        }
        culprit = None
        for word in words:
            previous = checked.get(word)
            if previous is not None and all(step in steps for step in previous):
                continue
            run = simulate(hypothesis, word)
            if run.accepted == structure.obs[word]:
                checked[word] = tuple(
                    (serials[transition.source], transition.action, transition.guard, serials[transition.target])
                    for transition in run.transitions
                )
                continue
            for transition in run.transitions:
                fold = provenance.get((transition.source, transition.action, transition.guard))
                if fold is not None:
                    culprit = fold
                    break
            if culprit is None:
                raise InconsistentHypothesis(
                    f"hypothesis disagrees with the observation {word.describe()} along a run without folds"
                )
            break
        if culprit is None:
            break
        forbidden.add(culprit)
    violations = validate(hypothesis)
    if violations:
        raise RuntimeError("merged hypothesis is invalid: " + "; ".join(violations))
    return hypothesis


def _equal_label_fraction(graph: ResultingGraph) -> float:
    pairs = list(itertools.combinations(graph.nodes, 2))
    if not pairs:
        return 1.0
    return sum(first.labels == second.labels for first, second in pairs) / len(pairs)


def location_lower_bound(structure: ObservationStructure) -> int:
    """Any automaton agreeing with obs needs one location per observed verdict."""
    return max(1, len(set(structure.obs.values())))


def select_hypothesis(structure: ObservationStructure, max_strategies: int) -> Rera:
    lower_bound = location_lower_bound(structure)
    strategies = ranked_strategies(structure, max_strategies)
    if not strategies:
        raise RuntimeError("no admissible reset strategy exists")
    best = None
    for index, strategy in enumerate(strategies):
        graph = apply_strategy(structure, strategy)
        try:
            hypothesis = build_hypothesis(structure, graph)
        except InconsistentHypothesis as exc:
            logger.debug("skipping strategy %d: %s", index, exc)
            continue
        score = (len(hypothesis.locations), -_equal_label_fraction(graph), index)
        if best is None or score < best[0]:
            best = (score, hypothesis)
        if len(hypothesis.locations) <= lower_bound:
            break
    if best is None:
        raise InconsistentHypothesis("no admissible reset strategy folds into a hypothesis agreeing with obs")
    return best[1]


def learn(
    teacher: SimulatedTeacher,
    alphabet: tuple[str, ...],
    max_constant: int,
    limits: Limits,
    trace_log: Optional[TraceLog] = None,
    stop_requested: Optional[Callable[[], bool]] = None,
    progress_callback: Optional[Callable[[ProgressState], None]] = None,
    snapshot_callback: Optional[Callable[[int, ObservationStructure, Rera], None]] = None,
) -> LearnResult:
    structure = ObservationStructure(
        alphabet, max_constant, teacher.membership, trace_log=trace_log, max_queries=limits.max_queries
    )
    hypothesis: Optional[Rera] = None
    iteration = 0

    def finish(success: bool, reason: str) -> LearnResult:
        logger.info("learning stopped after %d iteration(s): %s", iteration, reason)
        return LearnResult(
            hypothesis=hypothesis,
            success=success,
            reason=reason,
            iterations=iteration,
            membership_count=teacher.stats.membership_count,
            distinct_membership_count=teacher.stats.distinct_membership_count,
            equivalence_count=teacher.stats.equivalence_count,
            statistics=structure.statistics(),
        )

    try:
        structure.request(TimedWord())
        while True:
            if stop_requested is not None and stop_requested():
                return finish(False, "canceled")
            if iteration >= limits.max_iterations:
                return finish(False, f"iteration limit {limits.max_iterations} reached")
            iteration += 1
            refine_structure(structure, DEFAULT_MAX_REFINEMENT_ROUNDS)
            hypothesis = select_hypothesis(structure, limits.max_strategies)
            if snapshot_callback is not None:
                snapshot_callback(iteration, structure, hypothesis)
            answer = teacher.equivalence(hypothesis)
            if progress_callback is not None:
                progress_callback(
                    {
                        "iteration": iteration,
                        "membership_count": teacher.stats.membership_count,
                        "equivalence_count": teacher.stats.equivalence_count,
                        "locations": len(hypothesis.locations),
                    }
                )
            if answer.equivalent:
                return finish(True, "equivalent")
            counterexample = answer.counterexample
            if counterexample in structure.obs:
                return finish(False, f"counterexample {counterexample.describe()} was already observed")
            with structure.in_phase("counterexample"):
                structure.request(counterexample)
    except QueryLimitExceeded as exc:
        return finish(False, str(exc))
    except RefinementLimitExceeded as exc:
        return finish(False, str(exc))
    except RuntimeError as exc:
        logger.warning("learning failed: %s", exc)
        return finish(False, str(exc))
