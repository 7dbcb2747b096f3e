from .automaton import Rera, complete, simulate, validate
from .equivalence import equivalent
from .learner import learn
from .serialization import load_automaton, parse_automaton, serialize_automaton
from .teacher import SimulatedTeacher

__all__ = [
    "Rera",
    "SimulatedTeacher",
    "complete",
    "equivalent",
    "learn",
    "load_automaton",
    "parse_automaton",
    "serialize_automaton",
    "simulate",
    "validate",
]
