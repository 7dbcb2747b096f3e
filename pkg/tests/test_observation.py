import itertools
import random
import unittest
from fractions import Fraction
from pathlib import Path

from rera.bench import random_rera
from rera.clocks import Guard
from rera.observation import ObservationStructure, QueryLimitExceeded
from rera.serialization import load_automaton
from rera.teacher import SimulatedTeacher
from rera.words import GuardedWordWithResets, KClosedWord, TimedWord, k_closed_word_of, satisfies, with_resets

INPUTS = Path(__file__).resolve().parent.parent / "inputs"

ACCEPTED_PAIRS = {"1.7:a 1:a", "2.7:a 1.1:a"}


def conflicting_membership(word: TimedWord) -> bool:
    """Accepts exactly two words; together with their rejected neighbours no reset choice fits every class."""
    return str(word) in ACCEPTED_PAIRS


def conflicting_structure(queries: list[str]) -> ObservationStructure:
    structure = ObservationStructure(("a",), 4, conflicting_membership)
    for text in queries:
        structure.request(TimedWord.parse(text))
    return structure


CONFLICTING_QUERIES = ["1.7:a 1:a", "1.7:a 1.1:a", "2.9:a 1.1:a", "2.7:a 1.1:a"]


def random_session(rng: random.Random) -> tuple[ObservationStructure, tuple[str, ...]]:
    target = random_rera(rng, locations=2, alphabet_size=rng.choice((1, 2)), max_constant=2)
    return ObservationStructure(target.alphabet, 2, SimulatedTeacher(target).membership), target.alphabet


def random_word(rng: random.Random, alphabet: tuple[str, ...]) -> TimedWord:
    return TimedWord(tuple((Fraction(rng.randint(0, 12), 4), rng.choice(alphabet)) for _ in range(rng.randint(1, 3))))


def invalid_k_closed_words(structure: ObservationStructure) -> set[KClosedWord]:
    """Invalidity recomputed from obs alone: a conflict, an invalid prefix, or both resets of an extension invalid."""
    labels: dict[KClosedWord, set[bool]] = {}
    for word, label in structure.obs.items():
        for resets in itertools.product((True, False), repeat=len(word)):
            kword = k_closed_word_of(with_resets(word, resets, structure.clocks), structure.max_constant)
            labels.setdefault(kword, set()).add(label)
    extensions: dict[KClosedWord, dict[tuple, dict[bool, KClosedWord]]] = {}
    for kword in labels:
        if kword.steps:
            kclass, action, flag = kword.steps[-1]
            parent = KClosedWord(kword.initial, kword.steps[:-1])
            extensions.setdefault(parent, {}).setdefault((action, kclass), {})[flag] = kword

    contradicted: dict[KClosedWord, bool] = {}

    def is_contradicted(kword: KClosedWord) -> bool:
        if kword not in contradicted:
            contradicted[kword] = len(labels[kword]) > 1 or any(
                len(pair) == 2 and all(is_contradicted(child) for child in pair.values())
                for pair in extensions.get(kword, {}).values()
            )
        return contradicted[kword]

    return {
        kword
        for kword in labels
        if any(is_contradicted(KClosedWord(kword.initial, kword.steps[:depth])) for depth in range(len(kword) + 1))
    }


class TestObservationRequests(unittest.TestCase):
    def test_request_queries_prefixes_first(self) -> None:
        log: list[str] = []
        structure = ObservationStructure(("a",), 4, conflicting_membership, trace_log=log)

        self.assertTrue(structure.request(TimedWord.parse("1.7:a 1:a")))
        self.assertEqual(structure.query_count, 3)
        self.assertEqual([line.split("\t")[1] for line in log], ["", "1.7:a", "1.7:a 1:a"])

    def test_request_uses_stored_observations(self) -> None:
        structure = conflicting_structure(["1.7:a 1:a"])
        structure.request(TimedWord.parse("1.7:a"))
        structure.request(TimedWord.parse("1.7:a 1:a"))

        self.assertEqual(structure.query_count, 3)

    def test_unknown_action_raises(self) -> None:
        with self.assertRaises(ValueError):
            conflicting_structure(["1:b"])

    def test_query_limit(self) -> None:
        structure = ObservationStructure(("a",), 4, conflicting_membership, max_queries=2)
        with self.assertRaises(QueryLimitExceeded):
            structure.request(TimedWord.parse("1.7:a 1:a"))

    def test_constructor_validates_arguments(self) -> None:
        with self.assertRaises(ValueError):
            ObservationStructure((), 4, conflicting_membership)
        with self.assertRaises(ValueError):
            ObservationStructure(("a",), -1, conflicting_membership)

    def test_request_guarded_reuses_a_satisfying_observation(self) -> None:
        structure = conflicting_structure(["1.7:a 1:a"])
        guarded = GuardedWordWithResets(((Guard.from_atoms([("x_a", ">", 1), ("x_a", "<", 2)]), "a", True),))

        self.assertFalse(structure.request_guarded(guarded))
        self.assertEqual(structure.query_count, 3)


class TestTimedObservationGraph(unittest.TestCase):
    def setUp(self) -> None:
        self.structure = conflicting_structure(CONFLICTING_QUERIES)

    def invalid(self, text: str, resets: tuple[bool, ...]) -> bool:
        return self.structure.is_invalid_word(TimedWord.parse(text), resets)

    def test_conflicting_classes_invalidate_one_reset_option_each(self) -> None:
        self.assertTrue(self.invalid("1.7:a", (False,)))
        self.assertFalse(self.invalid("1.7:a", (True,)))
        self.assertTrue(self.invalid("2.7:a", (True,)))
        self.assertFalse(self.invalid("2.7:a", (False,)))
        self.assertFalse(self.structure.tog_root.invalid)

    def test_invalidity_covers_extensions(self) -> None:
        self.assertTrue(self.invalid("1.5:a 0.2:a", (False, True)))

    def test_k_closed_word_lookup_agrees(self) -> None:
        clocks = self.structure.clocks
        kword = k_closed_word_of(with_resets(TimedWord.parse("2.5:a"), (True,), clocks), 4)
        self.assertTrue(self.structure.is_invalid(kword))

    def test_guarded_word_lookup_meets_invalid_classes(self) -> None:
        wide = GuardedWordWithResets(((Guard.true(), "a", False),))
        narrow = GuardedWordWithResets(((Guard.from_atoms([("x_a", ">", 2)]), "a", False),))

        self.assertTrue(self.structure.is_invalid(wide))
        self.assertFalse(self.structure.is_invalid(narrow))

    def test_pending_invalid_states_are_queued(self) -> None:
        self.assertTrue(self.structure.pending_invalid)
        self.assertTrue(all(state.invalid for state in self.structure.pending_invalid))

    def test_settle_schedules_a_rebuild_of_the_root(self) -> None:
        self.structure.settle()

        self.assertFalse(self.structure.pending_words)
        self.assertFalse(self.structure.pending_invalid)
        self.assertEqual(self.structure.normalized_rebuild_queue(), [self.structure.tdg_root])

    def test_observation_states_keep_their_words(self) -> None:
        self.assertEqual(
            [violation for violation in self.structure.audit() if violation.startswith("observation state")], []
        )


class TestTimedDecisionGraph(unittest.TestCase):
    def setUp(self) -> None:
        teacher = SimulatedTeacher(load_automaton(INPUTS / "reset_window.rera"))
        self.structure = ObservationStructure(("a",), 2, teacher.membership)
        for text in ("0.7:a 0.9:a", "0.7:a 1.2:a"):
            self.structure.request(TimedWord.parse(text))
        self.structure.settle()

    def test_invalid_reset_option_gets_no_child(self) -> None:
        root = self.structure.tdg_root
        decision = root.children["a"][0]

        self.assertEqual(root.labels, {False})
        self.assertEqual(decision.guard, Guard.true())
        self.assertEqual(set(decision.children), {True})
        self.assertTrue(self.structure.is_invalid_word(TimedWord.parse("0.7:a"), (False,)))

    def test_shared_leaf_is_inconsistent(self) -> None:
        inconsistent = self.structure.inconsistent_states()

        self.assertEqual(len(inconsistent), 2)
        self.assertTrue(all(state.labels == {True, False} for state in inconsistent))
        self.assertEqual(self.structure.statistics()["pending_inconsistencies"], 2)

    def test_observations_through_a_state(self) -> None:
        child = self.structure.tdg_root.children["a"][0].children[True]
        words = [str(word) for word, _ in self.structure.observations_through(child)]

        self.assertEqual(words, ["0.7:a", "0.7:a 0.9:a", "0.7:a 1.2:a"])

    def test_searchprune_detaches_a_branch(self) -> None:
        child = self.structure.tdg_root.children["a"][0].children[True]
        decision = child.children["a"][0]

        self.assertTrue(self.structure.searchprune(TimedWord.parse("0.7:a 0.9:a"), (True, False)))
        self.assertEqual(set(decision.children), {True})
        self.assertFalse(self.structure.searchprune(TimedWord.parse("0.7:a 0.9:a"), (True, False)))

    def test_audit_is_clean(self) -> None:
        self.assertEqual(self.structure.audit(), [])

    def test_statistics(self) -> None:
        stats = self.structure.statistics()

        self.assertEqual(stats["observations"], 4)
        self.assertEqual(stats["membership_queries"], 4)
        self.assertEqual(stats["tog_invalid_states"], 3)
        self.assertEqual(stats["tdg_language_states"], 4)
        self.assertEqual(stats["tdg_decision_states"], 2)


class TestRandomizedSessions(unittest.TestCase):
    def test_marked_invalid_states_are_confirmed_by_the_observations(self) -> None:
        rng = random.Random(6)
        marked = 0
        for session in range(100):
            structure, alphabet = random_session(rng)
            for _ in range(12):
                structure.request(random_word(rng, alphabet))
            structure.settle()

            invalid = invalid_k_closed_words(structure)
            for state in structure.observation_states():
                if state.invalid:
                    marked += 1
                    kword = state.kword(structure.clocks, structure.max_constant)
                    self.assertIn(kword, invalid, f"session {session}: {kword}")
        self.assertGreater(marked, 0)

    def test_pruned_decision_graph_models_no_invalid_observation(self) -> None:
        rng = random.Random(7)
        for session in range(100):
            structure, alphabet = random_session(rng)
            for _ in range(12):
                structure.request(random_word(rng, alphabet))
                structure.settle()

            invalid = invalid_k_closed_words(structure)
            by_length: dict[int, list[TimedWord]] = {}
            for word in structure.obs:
                by_length.setdefault(len(word), []).append(word)
            for state in structure.language_states():
                guarded = state.word()
                for word in by_length.get(state.depth, []):
                    induced = satisfies(word, guarded, structure.clocks)
                    if induced is None:
                        continue
                    kword = k_closed_word_of(induced, structure.max_constant)
                    self.assertNotIn(kword, invalid, f"session {session}: {word} reaches {guarded}")

    def test_random_operation_sequences_keep_the_structure_sound(self) -> None:
        rng = random.Random(8)
        operations = 0
        while operations < 10_000:
            structure, alphabet = random_session(rng)
            for _ in range(100):
                operations += 1
                if rng.random() < 0.8:
                    structure.request(random_word(rng, alphabet))
                    continue
                structure.settle()
                self.assertEqual(structure.audit(), [])
                language = list(structure.language_states())
                self.assertEqual(len({id(state) for state in language}), len(language))
                observation = list(structure.observation_states())
                self.assertEqual(len({id(state) for state in observation}), len(observation))


if __name__ == "__main__":
    unittest.main()
