import operator
import random
import unittest
from fractions import Fraction

from rera.clocks import (
    ClockValuation,
    Guard,
    above_k,
    class_of_value,
    elapse,
    k_class_of,
    k_equivalent,
    negate_atom,
    open_between,
    point,
    reset,
)
from rera.words import (
    GuardedWordWithResets,
    TimedWord,
    k_closed_word_of,
    lambda_sum,
    op_combine,
    satisfies,
    witness_word,
    with_resets,
    zone_word_of,
)


def guard(*atoms):
    return Guard.from_atoms(list(atoms))


CLOCKS = ("x_a", "x_b")
COMPARE = {"<": operator.lt, "<=": operator.le, "=": operator.eq, ">=": operator.ge, ">": operator.gt}


def random_word(rng: random.Random, length: int, actions: tuple[str, ...] = ("a", "b")) -> TimedWord:
    return TimedWord(tuple((Fraction(rng.randint(0, 16), 4), rng.choice(actions)) for _ in range(length)))


def random_atoms(rng: random.Random, max_constant: int) -> list[tuple[str, str, int]]:
    return [
        (rng.choice(CLOCKS), rng.choice(tuple(COMPARE)), rng.randint(0, max_constant)) for _ in range(rng.randint(0, 2))
    ]


class TestClockValuations(unittest.TestCase):
    def test_elapse_and_reset(self) -> None:
        valuation = elapse(ClockValuation.zero(["x_a", "x_b"]), Fraction(3, 2))
        after = reset(valuation, ["x_a"])

        self.assertEqual(after["x_a"], 0)
        self.assertEqual(after["x_b"], Fraction(3, 2))

    def test_reset_of_unknown_clock_raises(self) -> None:
        with self.assertRaises(ValueError):
            reset(ClockValuation.zero(["x_a"]), ["x_c"])

    def test_negative_delay_raises(self) -> None:
        with self.assertRaises(ValueError):
            elapse(ClockValuation.zero(["x_a"]), Fraction(-1))

    def test_class_of_value(self) -> None:
        self.assertEqual(class_of_value(Fraction(2), 3), point(2))
        self.assertEqual(class_of_value(Fraction(27, 10), 3), open_between(2))
        self.assertEqual(class_of_value(Fraction(3), 3), point(3))
        self.assertEqual(class_of_value(Fraction(31, 10), 3), above_k())

    def test_k_equivalence(self) -> None:
        self.assertTrue(k_equivalent(Fraction(11, 10), Fraction(19, 10), 4))
        self.assertFalse(k_equivalent(Fraction(1), Fraction(11, 10), 4))
        self.assertTrue(k_equivalent(Fraction(5), Fraction(17, 2), 4))
        self.assertFalse(k_equivalent(Fraction(4), Fraction(9, 2), 4))

    def test_k_class_of_valuation(self) -> None:
        kclass = k_class_of(ClockValuation.of({"x_a": Fraction(1, 2), "x_b": 7}), 3)
        self.assertEqual(kclass["x_a"], open_between(0))
        self.assertEqual(kclass["x_b"], above_k())


class TestGuards(unittest.TestCase):
    def test_atoms_are_sorted_per_clock(self) -> None:
        self.assertEqual(str(guard(("x_b", "<=", 2), ("x_a", ">", 3))), "x_a>3 & x_b<=2")
        self.assertEqual(str(guard(("x_a", "=", 2))), "x_a=2")
        self.assertEqual(str(Guard.true()), "true")

    def test_unsatisfiable_guard(self) -> None:
        contradiction = guard(("x_a", ">", 2), ("x_a", "<", 1))
        self.assertFalse(contradiction.is_satisfiable)
        self.assertEqual(str(contradiction), "false")

    def test_rejects_negative_or_fractional_constants(self) -> None:
        with self.assertRaises(ValueError):
            guard(("x_a", "<", -1))
        with self.assertRaises(ValueError):
            guard(("x_a", "<", 1.5))

    def test_rejects_unknown_relation(self) -> None:
        with self.assertRaises(ValueError):
            guard(("x_a", "!=", 1))

    def test_contains_class(self) -> None:
        upto_two = guard(("x_a", "<=", 2))
        only = lambda kind: k_class_of(ClockValuation.of({"x_a": kind}), 4)

        self.assertTrue(upto_two.contains_class(only(Fraction(3, 2))))
        self.assertTrue(upto_two.contains_class(only(Fraction(2))))
        self.assertFalse(upto_two.contains_class(only(Fraction(5, 2))))

    def test_negate_atom(self) -> None:
        self.assertEqual(negate_atom(("x_a", "<=", 2)), ("x_a", ">", 2))
        with self.assertRaises(ValueError):
            negate_atom(("x_a", "=", 2))

    def test_of_class_builds_the_class_region(self) -> None:
        kclass = k_class_of(ClockValuation.of({"x_a": Fraction(3, 2), "x_b": 9}), 4)
        region = Guard.of_class(kclass, 4)

        self.assertEqual(str(region), "x_a>1 & x_a<2 & x_b>4")


class TestTimedWords(unittest.TestCase):
    def test_parse_and_format(self) -> None:
        word = TimedWord.parse("1.5:a 0:b 1/3:a")

        self.assertEqual(word.letters[0], (Fraction(3, 2), "a"))
        self.assertEqual(word.untimed(), ("a", "b", "a"))
        self.assertEqual(str(word), "1.5:a 0:b 1/3:a")
        self.assertEqual(TimedWord().describe(), "ε")

    def test_parse_rejects_malformed_letters(self) -> None:
        for text in ("1.5a", "1.5:", "-1:a", "x:a"):
            with self.subTest(text=text):
                with self.assertRaises(ValueError):
                    TimedWord.parse(text)

    def test_with_resets_records_the_run(self) -> None:
        induced = with_resets(TimedWord.parse("1.7:a 1:a"), (True, False), ["x_a"])

        self.assertEqual(induced.action_valuations[0]["x_a"], Fraction(17, 10))
        self.assertEqual(induced.action_valuations[1]["x_a"], 1)
        self.assertEqual(induced.run[-1]["x_a"], 1)

    def test_with_resets_needs_a_flag_per_letter(self) -> None:
        with self.assertRaises(ValueError):
            with_resets(TimedWord.parse("1:a"), (), ["x_a"])

    def test_k_closed_word(self) -> None:
        kword = k_closed_word_of(with_resets(TimedWord.parse("1.7:a 1:a"), (False, False), ["x_a"]), 4)

        self.assertEqual(kword.steps[0][0]["x_a"], open_between(1))
        self.assertEqual(kword.steps[1][0]["x_a"], open_between(2))

    def test_lambda_sum(self) -> None:
        combined = lambda_sum(TimedWord.parse("1:a 2:b"), TimedWord.parse("2:a 4:b"), Fraction(1, 2))
        self.assertEqual(combined, TimedWord.parse("1.5:a 3:b"))

    def test_lambda_sum_rejects_other_projections_and_weights(self) -> None:
        with self.assertRaises(ValueError):
            lambda_sum(TimedWord.parse("1:a"), TimedWord.parse("1:b"), Fraction(1, 2))
        with self.assertRaises(ValueError):
            lambda_sum(TimedWord.parse("1:a"), TimedWord.parse("2:a"), Fraction(3, 2))

    def test_op_combine_keeps_integer_parts_of_first(self) -> None:
        combined = op_combine(TimedWord.parse("2.3:a"), TimedWord.parse("0.6:a 1:b"))
        self.assertEqual(combined, TimedWord.parse("2.6:a 1:b"))

    def test_op_combine_needs_a_shorter_first_word(self) -> None:
        with self.assertRaises(ValueError):
            op_combine(TimedWord.parse("1:a 1:a"), TimedWord.parse("1:a"))


class TestGuardedWords(unittest.TestCase):
    def test_witness_word_satisfies_the_guarded_word(self) -> None:
        guarded = GuardedWordWithResets(
            (
                (guard(("x_a", ">", 1), ("x_a", "<", 2)), "a", True),
                (guard(("x_a", "<=", 1)), "a", False),
            )
        )
        word = witness_word(guarded, ["x_a"])

        self.assertIsNotNone(satisfies(word, guarded, ["x_a"]))

    def test_witness_word_over_two_clocks(self) -> None:
        guarded = GuardedWordWithResets(
            (
                (Guard.true(), "a", False),
                (guard(("x_b", "<=", 2)), "b", True),
                (guard(("x_b", "<=", 2), ("x_a", ">", 3)), "a", False),
            )
        )
        clocks = ["x_a", "x_b"]
        word = witness_word(guarded, clocks)

        self.assertIsNotNone(satisfies(word, guarded, clocks))

    def test_unsatisfiable_guarded_word(self) -> None:
        guarded = GuardedWordWithResets(
            (
                (guard(("x_a", ">=", 2)), "a", False),
                (guard(("x_a", "<=", 1)), "a", False),
            )
        )
        with self.assertRaises(ValueError):
            witness_word(guarded, ["x_a"])
        with self.assertRaises(ValueError):
            zone_word_of(guarded, ["x_a"])

    def test_satisfies_checks_each_guard(self) -> None:
        guarded = GuardedWordWithResets(((guard(("x_a", "<=", 1)), "a", False),))

        self.assertIsNotNone(satisfies(TimedWord.parse("0.5:a"), guarded, ["x_a"]))
        self.assertIsNone(satisfies(TimedWord.parse("1.5:a"), guarded, ["x_a"]))
        self.assertIsNone(satisfies(TimedWord.parse("0.5:b"), guarded, ["x_a", "x_b"]))


class TestRandomizedWords(unittest.TestCase):
    def test_lambda_sum_runs_are_convex_combinations(self) -> None:
        rng = random.Random(1)
        for case in range(1000):
            length = rng.randint(1, 5)
            first = random_word(rng, length)
            second = TimedWord(tuple((Fraction(rng.randint(0, 16), 4), action) for action in first.untimed()))
            weight = Fraction(rng.randint(0, 12), 12)
            resets = tuple(rng.random() < 0.5 for _ in range(length))

            combined = with_resets(lambda_sum(first, second, weight), resets, CLOCKS)
            left, right = with_resets(first, resets, CLOCKS), with_resets(second, resets, CLOCKS)

            for index, valuation in enumerate(combined.run):
                for clock in CLOCKS:
                    expected = weight * left.run[index][clock] + (1 - weight) * right.run[index][clock]
                    self.assertEqual(valuation[clock], expected, f"case {case}, position {index}, {clock}")
            for index, valuation in enumerate(combined.action_valuations):
                for clock in CLOCKS:
                    expected = (
                        weight * left.action_valuations[index][clock]
                        + (1 - weight) * right.action_valuations[index][clock]
                    )
                    self.assertEqual(valuation[clock], expected, f"case {case}, action {index}, {clock}")

    def test_satisfies_matches_a_step_by_step_check(self) -> None:
        rng = random.Random(2)
        satisfied = 0
        for case in range(1000):
            length = rng.randint(0, 4)
            word = random_word(rng, length)
            steps = [(random_atoms(rng, 3), action, rng.random() < 0.5) for action in word.untimed()]
            if length and rng.random() < 0.1:
                # another projection never satisfies
                steps[-1] = (steps[-1][0], "b" if steps[-1][1] == "a" else "a", steps[-1][2])
            guarded = GuardedWordWithResets(
                tuple((Guard.from_atoms(atoms), action, flag) for atoms, action, flag in steps)
            )

            values = {clock: Fraction(0) for clock in CLOCKS}
            expected = word.untimed() == guarded.untimed()
            for (delay, action), (atoms, _, flag) in zip(word.letters, steps):
                if not expected:
                    break
                values = {clock: value + delay for clock, value in values.items()}
                expected = all(COMPARE[relation](values[clock], constant) for clock, relation, constant in atoms)
                if flag:
                    values[f"x_{action}"] = Fraction(0)

            self.assertEqual(satisfies(word, guarded, CLOCKS) is not None, expected, f"case {case}: {word} / {guarded}")
            satisfied += int(expected)
        self.assertGreater(satisfied, 100)

    def test_k_closed_word_is_shared_by_jittered_words(self) -> None:
        rng = random.Random(3)
        for case in range(500):
            length = rng.randint(1, 4)
            # at most four tenths per clock, so no value sits on or near an integer
            word = TimedWord(
                tuple((rng.randint(0, 2) + Fraction(1, 10), rng.choice(("a", "b"))) for _ in range(length))
            )
            jittered = TimedWord(
                tuple((delay + Fraction(rng.randint(-5, 5), 1000), action) for delay, action in word.letters)
            )
            resets = tuple(rng.random() < 0.5 for _ in range(length))

            self.assertEqual(
                k_closed_word_of(with_resets(word, resets, CLOCKS), 2),
                k_closed_word_of(with_resets(jittered, resets, CLOCKS), 2),
                f"case {case}: {word} / {jittered}",
            )


if __name__ == "__main__":
    unittest.main()
