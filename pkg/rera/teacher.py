import logging
import random
import threading
from dataclasses import dataclass
from typing import Optional, TextIO

from .automaton import Rera, simulate
from .equivalence import equivalent
from .serialization import load_automaton
from .types import Label
from .utils import format_label
from .words import TimedWord

logger = logging.getLogger(__name__)


@dataclass
class TeacherStats:
    membership_count: int = 0
    equivalence_count: int = 0
    distinct_membership_count: int = 0


@dataclass(frozen=True)
class EquivalenceAnswer:
    equivalent: bool
    counterexample: Optional[TimedWord] = None
    # the hidden automaton's verdict on the counterexample
    accepted: Optional[bool] = None


class SimulatedTeacher:
    """Answers membership and equivalence queries from a hidden automaton."""

    def __init__(self, target: Rera, seed: Optional[int] = None):
        self.target = target
        # a seeded teacher shuffles the action order of each counterexample search
        self._rng = random.Random(seed) if seed is not None else None
        self.stats = TeacherStats()
        self._answers: dict[TimedWord, Label] = {}
        self._membership_lock = threading.Lock()
        self._equivalence_lock = threading.Lock()

    @property
    def alphabet(self) -> tuple[str, ...]:
        return self.target.alphabet

    def membership(self, word: TimedWord) -> Label:
        unknown = sorted(set(word.untimed()) - set(self.target.alphabet))
        if unknown:
            raise ValueError(f"unknown action(s) in word: {', '.join(unknown)}")
        with self._membership_lock:
            self.stats.membership_count += 1
            cached = self._answers.get(word)
            if cached is not None:
                return cached
            answer = simulate(self.target, word).accepted
            self._answers[word] = answer
            self.stats.distinct_membership_count += 1
            return answer

    def equivalence(self, hypothesis: Rera) -> EquivalenceAnswer:
        if set(hypothesis.alphabet) != set(self.target.alphabet):
            raise ValueError("hypothesis alphabet differs from the teacher's alphabet")
        with self._equivalence_lock:
            self.stats.equivalence_count += 1
            order = sorted(self.target.alphabet)
            if self._rng is not None:
                self._rng.shuffle(order)
            result = equivalent(self.target, hypothesis, action_order=order)
        if result.equivalent:
            return EquivalenceAnswer(equivalent=True)
        logger.info("counterexample %s (target says %s)", result.counterexample.describe(), format_label(result.in_first))
        return EquivalenceAnswer(equivalent=False, counterexample=result.counterexample, accepted=result.in_first)


def handle_protocol_line(teacher: SimulatedTeacher, line: str) -> str:
    """One request of the line protocol: `M <word>` or `E <automaton-file>`."""
    command, _, argument = line.strip().partition(" ")
    try:
        if command == "M":
            return format_label(teacher.membership(TimedWord.parse(argument)))
        if command == "E":
            answer = teacher.equivalence(load_automaton(argument.strip()))
            if answer.equivalent:
                return "Y"
            return f"C {answer.counterexample} {format_label(answer.accepted)}"
    except ValueError as exc:
        return f"ERR {exc}"
    return f"ERR unknown command {command!r}; expected M or E"


def serve_lines(teacher: SimulatedTeacher, source: TextIO, sink: TextIO) -> int:
    handled = 0
    for line in source:
        if not line.strip():
            continue
        sink.write(handle_protocol_line(teacher, line) + "\n")
        sink.flush()
        handled += 1
    return handled
