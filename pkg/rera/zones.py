import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Iterable, Optional, Union

from .clocks import ClockValuation, Guard

# A bound is (constant, closed): (c, True) reads "<= c", (c, False) reads "< c".
# Tuple order makes "< c" tighter than "<= c".
Number = Union[int, Fraction, float]
Bound = tuple[Number, bool]

INFINITY: Bound = (math.inf, False)
ZERO: Bound = (0, True)


def add_bounds(first: Bound, second: Bound) -> Bound:
    if first[0] == math.inf or second[0] == math.inf:
        return INFINITY
    return first[0] + second[0], first[1] and second[1]


def _satisfies_bound(difference: Fraction, bound: Bound) -> bool:
    if bound[0] == math.inf:
        return True
    return difference <= bound[0] if bound[1] else difference < bound[0]


@dataclass(frozen=True)
class Zone:
    """Difference-bound matrix over a fixed clock tuple; index 0 is the zero reference."""

    clocks: tuple[str, ...]
    matrix: tuple[tuple[Bound, ...], ...]
    empty: bool = False

    @classmethod
    def zero(cls, clocks: Iterable[str]) -> "Zone":
        names = tuple(sorted(clocks))
        size = len(names) + 1
        return cls(names, tuple(tuple(ZERO for _ in range(size)) for _ in range(size)))

    @classmethod
    def universe(cls, clocks: Iterable[str]) -> "Zone":
        names = tuple(sorted(clocks))
        size = len(names) + 1
        rows = []
        for i in range(size):
            row = []
            for j in range(size):
                row.append(ZERO if i == j or i == 0 else INFINITY)
            rows.append(tuple(row))
        return cls(names, tuple(rows))

    def index(self, clock: str) -> int:
        try:
            return self.clocks.index(clock) + 1
        except ValueError as exc:
            raise ValueError(f"unknown clock: {clock}") from exc

    def _build(self, rows: list[list[Bound]]) -> "Zone":
        return _canonical(self.clocks, rows)

    def _rows(self) -> list[list[Bound]]:
        return [list(row) for row in self.matrix]

    @property
    def is_empty(self) -> bool:
        return self.empty

    def future(self) -> "Zone":
        if self.empty:
            return self
        rows = self._rows()
        for i in range(1, len(rows)):
            rows[i][0] = INFINITY
        return Zone(self.clocks, tuple(tuple(row) for row in rows))

    def past(self) -> "Zone":
        if self.empty:
            return self
        rows = self._rows()
        for i in range(1, len(rows)):
            rows[0][i] = ZERO
        return self._build(rows)

    def reset(self, clock: str) -> "Zone":
        if self.empty:
            return self
        k = self.index(clock)
        rows = self._rows()
        for j in range(len(rows)):
            if j == k:
                continue
            rows[k][j] = rows[0][j]
            rows[j][k] = rows[j][0]
        rows[k][k] = ZERO
        return Zone(self.clocks, tuple(tuple(row) for row in rows))

    def free(self, clock: str) -> "Zone":
        if self.empty:
            return self
        k = self.index(clock)
        rows = self._rows()
        for j in range(len(rows)):
            if j == k:
                continue
            rows[k][j] = INFINITY
            rows[j][k] = rows[j][0]
        return self._build(rows)

    def constrain(self, i: int, j: int, bound: Bound) -> "Zone":
        if self.empty:
            return self
        if bound >= self.matrix[i][j]:
            return self
        rows = self._rows()
        rows[i][j] = bound
        return self._build(rows)

    def and_guard(self, guard: Guard) -> "Zone":
        if self.empty:
            return self
        if not guard.is_satisfiable:
            return Zone(self.clocks, self.matrix, True)
        rows = self._rows()
        changed = False
        for clock, interval in guard.bounds:
            k = self.index(clock)
            lower: Bound = (-interval.lower, not interval.lower_strict)
            if lower < rows[0][k]:
                rows[0][k] = lower
                changed = True
            if interval.upper is not None:
                upper: Bound = (interval.upper, not interval.upper_strict)
                if upper < rows[k][0]:
                    rows[k][0] = upper
                    changed = True
        if not changed:
            return self
        return self._build(rows)

    def and_clock_equals(self, clock: str, value: int) -> "Zone":
        k = self.index(clock)
        return self.constrain(k, 0, (value, True)).constrain(0, k, (-value, True))

    def intersect(self, other: "Zone") -> "Zone":
        if self.clocks != other.clocks:
            raise ValueError("zones are over different clock sets")
        if self.empty or other.empty:
            return Zone(self.clocks, self.matrix, True)
        rows = [[min(a, b) for a, b in zip(row_a, row_b)] for row_a, row_b in zip(self.matrix, other.matrix)]
        return self._build(rows)

    def includes(self, other: "Zone") -> bool:
        if other.empty:
            return True
        if self.empty:
            return False
        return all(b <= a for row_a, row_b in zip(self.matrix, other.matrix) for a, b in zip(row_a, row_b))

    def contains(self, valuation: ClockValuation) -> bool:
        if self.empty:
            return False
        values = [Fraction(0)] + [valuation[clock] for clock in self.clocks]
        for i, row in enumerate(self.matrix):
            for j, bound in enumerate(row):
                if not _satisfies_bound(values[i] - values[j], bound):
                    return False
        return True

    def delay_window(self, valuation: ClockValuation) -> Optional[tuple[Fraction, bool, Optional[Fraction], bool]]:
        """Delays t with valuation+t inside the zone, as (low, low_strict, high, high_strict) or None."""
        if self.empty:
            return None
        values = [Fraction(0)] + [valuation[clock] for clock in self.clocks]
        low, low_strict = Fraction(0), False
        high: Optional[Fraction] = None
        high_strict = False
        for i, row in enumerate(self.matrix):
            for j, bound in enumerate(row):
                if bound[0] == math.inf or i == j:
                    continue
                strict = not bound[1]
                if i != 0 and j != 0:
                    if not _satisfies_bound(values[i] - values[j], bound):
                        return None
                elif j == 0:
                    candidate = Fraction(bound[0]) - values[i]
                    if high is None or candidate < high or (candidate == high and strict):
                        high, high_strict = candidate, strict
                else:
                    candidate = -Fraction(bound[0]) - values[j]
                    if candidate > low or (candidate == low and strict):
                        low, low_strict = candidate, strict
        if high is not None:
            if high < low or (high == low and (low_strict or high_strict)):
                return None
        return low, low_strict, high, high_strict

    def constraints(self) -> list[str]:
        if self.empty:
            return ["false"]
        names = ("0",) + self.clocks
        found: list[str] = []
        for i, row in enumerate(self.matrix):
            for j, bound in enumerate(row):
                if i == j or bound[0] == math.inf:
                    continue
                if i == 0 and bound == ZERO:
                    continue
                relation = "<=" if bound[1] else "<"
                if j == 0:
                    found.append(f"{names[i]}{relation}{bound[0]}")
                elif i == 0:
                    found.append(f"{names[j]}{'>=' if bound[1] else '>'}{-bound[0]}")
                else:
                    found.append(f"{names[i]}-{names[j]}{relation}{bound[0]}")
        return found

    def __str__(self) -> str:
        found = self.constraints()
        return " & ".join(found) if found else "true"


def _canonical(clocks: tuple[str, ...], rows: list[list[Bound]]) -> Zone:
    size = len(rows)
    for k in range(size):
        row_k = rows[k]
        for i in range(size):
            through = rows[i][k]
            if through[0] == math.inf:
                continue
            row_i = rows[i]
            for j in range(size):
                candidate = add_bounds(through, row_k[j])
                if candidate < row_i[j]:
                    row_i[j] = candidate
    empty = any(rows[i][i] < ZERO for i in range(size))
    return Zone(clocks, tuple(tuple(row) for row in rows), empty)
