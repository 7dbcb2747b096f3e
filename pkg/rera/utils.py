import logging
from fractions import Fraction
from typing import Optional

from .types import LabelSet, TraceLog

logger = logging.getLogger(__name__)


def trace(enabled: bool, trace_log: Optional[TraceLog], message: str) -> None:
    if not enabled:
        return
    if trace_log is not None:
        trace_log.append(message)
    else:
        logger.debug(message)


def clock_name(action: str) -> str:
    return f"x_{action}"


def parse_rational(text: str) -> Fraction:
    """Parse a delay written as an integer, a decimal or a fraction p/q."""
    cleaned = text.strip()
    if not cleaned:
        raise ValueError("delay must not be empty")
    try:
        value = Fraction(cleaned)
    except (ValueError, ZeroDivisionError) as exc:
        raise ValueError(f"invalid delay: {text!r}") from exc
    if value < 0:
        raise ValueError(f"delay must be >= 0: {text!r}")
    return value


def format_rational(value: Fraction) -> str:
    if value.denominator == 1:
        return str(value.numerator)
    denominator = value.denominator
    # finite decimal expansion iff the denominator only has factors 2 and 5
    while denominator % 2 == 0:
        denominator //= 2
    while denominator % 5 == 0:
        denominator //= 5
    if denominator != 1:
        return f"{value.numerator}/{value.denominator}"
    digits = 0
    scaled = value
    while scaled.denominator != 1:
        scaled *= 10
        digits += 1
    sign = "-" if scaled < 0 else ""
    magnitude = str(abs(scaled.numerator)).rjust(digits + 1, "0")
    return f"{sign}{magnitude[:-digits]}.{magnitude[-digits:]}"


def format_label(label: bool) -> str:
    return "A" if label else "R"


def format_label_set(labels: LabelSet) -> str:
    if labels == frozenset({True, False}):
        return "±"
    if labels == frozenset({True}):
        return "+"
    if labels == frozenset({False}):
        return "-"
    return "∅"
