import random
import unittest
from dataclasses import replace
from fractions import Fraction
from pathlib import Path

from rera.automaton import Rera, Transition, simulate
from rera.clocks import Guard
from rera.equivalence import (
    delay_representatives,
    equivalent,
    next_region,
    region_key,
    reset_region,
    time_successors,
)
from rera.serialization import load_automaton

INPUTS = Path(__file__).resolve().parent.parent / "inputs"


class TestRegions(unittest.TestCase):
    def test_region_key_orders_fractional_parts(self) -> None:
        key = region_key((Fraction(13, 10), Fraction(1, 2), Fraction(2), Fraction(9)), 3)
        self.assertEqual(key, ((1, 1), (0, 2), (2, 0), (-1, 0)))

    def test_next_region_leaves_integer_points_first(self) -> None:
        key = ((1, 1), (0, 2), (2, 0), (-1, 0))
        self.assertEqual(next_region(key, 3), ((1, 2), (0, 3), (2, 1), (-1, 0)))

    def test_next_region_wraps_the_largest_fraction(self) -> None:
        self.assertEqual(next_region(((1, 1), (0, 2)), 3), ((1, 1), (1, 0)))

    def test_time_successors_end_above_the_constant(self) -> None:
        regions = time_successors(((0, 0),), 1)

        self.assertEqual(regions, [((0, 0),), ((0, 1),), ((1, 0),), ((-1, 0),)])
        self.assertIsNone(next_region(regions[-1], 1))

    def test_reset_region_renumbers_fractions(self) -> None:
        self.assertEqual(reset_region(((1, 1), (0, 2), (2, 0)), 0), ((0, 0), (0, 1), (2, 0)))

    def test_delay_representatives_end_above_the_constant(self) -> None:
        delays = delay_representatives((Fraction(0), Fraction(1, 2)), 2)

        self.assertEqual(delays[0], 0)
        self.assertEqual(delays, sorted(delays))
        self.assertTrue(all(value + delays[-1] > 2 for value in (Fraction(0), Fraction(1, 2))))

    def test_symbolic_regions_match_concrete_valuations(self) -> None:
        rng = random.Random(11)
        for _ in range(500):
            max_constant = rng.randint(0, 3)
            values = tuple(Fraction(rng.randint(0, 16), rng.randint(1, 4)) for _ in range(rng.randint(1, 4)))
            key = region_key(values, max_constant)
            with self.subTest(values=values, K=max_constant):
                concrete: list = []
                for delay in delay_representatives(values, max_constant):
                    moved = region_key(tuple(value + delay for value in values), max_constant)
                    if not concrete or concrete[-1] != moved:
                        concrete.append(moved)
                self.assertEqual(time_successors(key, max_constant), concrete)

                position = rng.randrange(len(values))
                cleared = tuple(Fraction(0) if index == position else value for index, value in enumerate(values))
                self.assertEqual(reset_region(key, position), region_key(cleared, max_constant))


class TestEquivalence(unittest.TestCase):
    def setUp(self) -> None:
        self.two_clocks = load_automaton(INPUTS / "two_clocks.rera")
        self.reset_window = load_automaton(INPUTS / "reset_window.rera")

    def test_automaton_is_equivalent_to_itself(self) -> None:
        self.assertTrue(equivalent(self.two_clocks, self.two_clocks).equivalent)
        self.assertTrue(equivalent(self.reset_window, self.reset_window).equivalent)

    def test_strict_border_gives_a_counterexample(self) -> None:
        strict = replace(
            self.reset_window,
            transitions=(
                self.reset_window.transitions[0],
                Transition("s1", "a", Guard.from_atoms([("x_a", "<", 1)]), False, "s2"),
            ),
        )
        result = equivalent(self.reset_window, strict)

        self.assertFalse(result.equivalent)
        self.assertTrue(result.in_first)
        self.assertFalse(result.in_second)
        self.assertEqual(simulate(self.reset_window, result.counterexample).accepted, result.in_first)
        self.assertEqual(simulate(strict, result.counterexample).accepted, result.in_second)
        self.assertEqual(result.counterexample.delays()[-1], 1)

    def test_counterexample_is_shortest(self) -> None:
        accepting_start = replace(self.reset_window, accepting=frozenset({"s0", "s2"}))
        result = equivalent(self.reset_window, accepting_start)

        self.assertFalse(result.equivalent)
        self.assertEqual(len(result.counterexample), 0)

    def test_unreachable_difference_is_equivalent(self) -> None:
        extended = replace(
            self.reset_window,
            locations=self.reset_window.locations + ("s3",),
            accepting=frozenset({"s2", "s3"}),
        )
        self.assertTrue(equivalent(self.reset_window, extended).equivalent)

    def test_alphabet_mismatch_raises(self) -> None:
        with self.assertRaises(ValueError):
            equivalent(self.two_clocks, self.reset_window)

    def test_action_order_picks_among_shortest_counterexamples(self) -> None:
        either = Rera(
            alphabet=("a", "b"),
            locations=("s0", "s1"),
            initial="s0",
            accepting=frozenset({"s1"}),
            transitions=(
                Transition("s0", "a", Guard.true(), False, "s1"),
                Transition("s0", "b", Guard.true(), False, "s1"),
            ),
            max_constant=0,
        )
        nothing = replace(either, transitions=())

        for order in (("a", "b"), ("b", "a")):
            with self.subTest(order=order):
                result = equivalent(either, nothing, action_order=order)
                self.assertEqual(result.counterexample.untimed(), (order[0],))
        with self.assertRaises(ValueError):
            equivalent(either, nothing, action_order=("a",))


if __name__ == "__main__":
    unittest.main()
