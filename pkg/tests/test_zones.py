import operator
import random
import unittest
from fractions import Fraction

from rera.clocks import ClockValuation, Guard
from rera.zones import Zone

CLOCKS = ("x_a", "x_b")
COMPARE = {"<": operator.lt, "<=": operator.le, "=": operator.eq, ">=": operator.ge, ">": operator.gt}


def grid(low: Fraction, high: Fraction, step: Fraction) -> list[Fraction]:
    points = []
    value = low
    while value <= high:
        points.append(value)
        value += step
    return points


def random_atoms(rng: random.Random) -> list[tuple[str, str, int]]:
    return [(rng.choice(CLOCKS), rng.choice(tuple(COMPARE)), rng.randint(0, 3)) for _ in range(rng.randint(1, 2))]


def random_zone(rng: random.Random) -> Zone:
    zone = Zone.zero(CLOCKS).future()
    for _ in range(rng.randint(0, 4)):
        step = rng.random()
        if step < 0.4:
            zone = zone.and_guard(Guard.from_atoms(random_atoms(rng)))
        elif step < 0.8:
            zone = zone.reset(rng.choice(CLOCKS))
        else:
            zone = zone.future()
    return zone


def random_valuation(rng: random.Random) -> ClockValuation:
    first = Fraction(rng.randint(0, 20), 4)
    second = first if rng.random() < 0.3 else Fraction(rng.randint(0, 20), 4)
    if rng.random() < 0.2:
        second = Fraction(0)
    return ClockValuation.of({"x_a": first, "x_b": second})


class TestZones(unittest.TestCase):
    def setUp(self) -> None:
        self.start = Zone.zero(["x_a", "x_b"]).future()

    def test_future_of_zero_keeps_clocks_equal(self) -> None:
        self.assertTrue(self.start.contains(ClockValuation.of({"x_a": 3, "x_b": 3})))
        self.assertFalse(self.start.contains(ClockValuation.of({"x_a": 3, "x_b": 2})))

    def test_guard_then_reset(self) -> None:
        zone = self.start.and_guard(Guard.from_atoms([("x_a", "<=", 2)])).reset("x_b")

        self.assertTrue(zone.contains(ClockValuation.of({"x_a": Fraction(3, 2), "x_b": 0})))
        self.assertFalse(zone.contains(ClockValuation.of({"x_a": 3, "x_b": 0})))
        self.assertFalse(zone.contains(ClockValuation.of({"x_a": 1, "x_b": 1})))

    def test_conflicting_guards_empty_the_zone(self) -> None:
        zone = self.start.and_guard(Guard.from_atoms([("x_a", "<=", 1)])).and_guard(
            Guard.from_atoms([("x_b", ">=", 2)])
        )
        self.assertTrue(zone.is_empty)

    def test_unsatisfiable_guard_empties_the_zone(self) -> None:
        zone = self.start.and_guard(Guard.from_atoms([("x_a", ">", 2), ("x_a", "<", 1)]))
        self.assertTrue(zone.is_empty)

    def test_includes(self) -> None:
        smaller = self.start.and_guard(Guard.from_atoms([("x_a", "<", 1)]))
        self.assertTrue(self.start.includes(smaller))
        self.assertFalse(smaller.includes(self.start))

    def test_delay_window(self) -> None:
        zone = Zone.zero(["x_a"]).future().and_guard(Guard.from_atoms([("x_a", ">", 1), ("x_a", "<=", 2)]))
        window = zone.delay_window(ClockValuation.of({"x_a": Fraction(1, 2)}))

        self.assertEqual(window, (Fraction(1, 2), True, Fraction(3, 2), False))

    def test_delay_window_is_none_when_unreachable(self) -> None:
        zone = Zone.zero(["x_a"]).future().and_guard(Guard.from_atoms([("x_a", "<=", 1)]))
        self.assertIsNone(zone.delay_window(ClockValuation.of({"x_a": 2})))

    def test_unknown_clock_raises(self) -> None:
        with self.assertRaises(ValueError):
            self.start.reset("x_c")

    def test_constraints_text(self) -> None:
        zone = Zone.zero(["x_a"]).future().and_guard(Guard.from_atoms([("x_a", "<", 3)]))
        self.assertEqual(str(zone), "x_a<3")


class TestZoneOracle(unittest.TestCase):
    """Zone operations against membership checks on a fine grid of valuations."""

    def setUp(self) -> None:
        self.rng = random.Random(5)

    def test_and_guard_is_intersection(self) -> None:
        for case in range(300):
            zone = random_zone(self.rng)
            atoms = random_atoms(self.rng)
            constrained = zone.and_guard(Guard.from_atoms(atoms))
            for _ in range(20):
                valuation = random_valuation(self.rng)
                expected = zone.contains(valuation) and all(
                    COMPARE[relation](valuation[clock], constant) for clock, relation, constant in atoms
                )
                message = f"case {case}: {zone} and {atoms} at {valuation}"
                self.assertEqual(constrained.contains(valuation), expected, message)

    def test_reset_matches_a_search_over_the_reset_clock(self) -> None:
        candidates = grid(Fraction(0), Fraction(12), Fraction(1, 8))
        for case in range(200):
            zone = random_zone(self.rng)
            clock = self.rng.choice(CLOCKS)
            other = "x_b" if clock == "x_a" else "x_a"
            after = zone.reset(clock)
            for _ in range(10):
                valuation = random_valuation(self.rng)
                expected = valuation[clock] == 0 and any(
                    zone.contains(ClockValuation.of({clock: value, other: valuation[other]})) for value in candidates
                )
                message = f"case {case}: {zone} reset {clock} at {valuation}"
                self.assertEqual(after.contains(valuation), expected, message)

    def test_future_matches_a_search_over_delays(self) -> None:
        for case in range(200):
            zone = random_zone(self.rng)
            later = zone.future()
            self.assertEqual(later.future(), later)
            for _ in range(10):
                valuation = random_valuation(self.rng)
                shortest = min(valuation["x_a"], valuation["x_b"])
                expected = any(
                    zone.contains(ClockValuation.of({name: valuation[name] - delay for name in CLOCKS}))
                    for delay in grid(Fraction(0), shortest, Fraction(1, 8))
                )
                self.assertEqual(later.contains(valuation), expected, f"case {case}: future of {zone} at {valuation}")


if __name__ == "__main__":
    unittest.main()
