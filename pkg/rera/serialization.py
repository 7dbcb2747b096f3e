import json
from pathlib import Path
from typing import TYPE_CHECKING, Any

import graphviz
from pydantic import BaseModel, Field, ValidationError

from .automaton import Rera, Transition, validate
from .clocks import Guard, normalize_relation
from .utils import clock_name, format_label_set

if TYPE_CHECKING:
    from .observation import ObservationStructure


class GuardAtomModel(BaseModel):
    clock: str = Field(..., description="Clock name, x_<action>")
    rel: str = Field(..., description="One of <, <=, =, >=, >")
    const: int = Field(..., ge=0, description="Integer constant of the comparison")


class TransitionModel(BaseModel):
    source: str
    action: str
    guard: list[GuardAtomModel] = Field(default_factory=list, description="Conjunction of atoms; empty means true")
    reset: bool = Field(default=False, description="Whether the action's own clock is reset")
    target: str


class AutomatonModel(BaseModel):
    alphabet: list[str] = Field(..., description="Action symbols")
    locations: list[str] = Field(..., description="Location names")
    initial: str = Field(..., description="Initial location")
    accepting: list[str] = Field(default_factory=list, description="Accepting locations")
    max_constant: int = Field(..., ge=0, description="Largest constant allowed in guards")
    transitions: list[TransitionModel] = Field(default_factory=list)


def _field_path(location: tuple[Any, ...]) -> str:
    path = ""
    for part in location:
        if isinstance(part, int):
            path += f"[{part}]"
        else:
            path += f".{part}" if path else str(part)
    return path


def _validation_message(exc: ValidationError) -> str:
    first = exc.errors()[0]
    path = _field_path(tuple(first.get("loc", ())))
    if first.get("type") == "missing":
        return f"missing field '{path}'"
    return f"invalid field '{path}': {first.get('msg', 'invalid value')}"


def automaton_from_model(model: AutomatonModel) -> Rera:
    transitions = []
    for index, item in enumerate(model.transitions):
        atoms = []
        for position, atom in enumerate(item.guard):
            try:
                relation = normalize_relation(atom.rel)
            except ValueError as exc:
                raise ValueError(f"invalid field 'transitions[{index}].guard[{position}].rel': {exc}") from exc
            atoms.append((atom.clock, relation, atom.const))
        transitions.append(Transition(item.source, item.action, Guard.from_atoms(atoms), item.reset, item.target))
    return Rera(
        alphabet=tuple(model.alphabet),
        locations=tuple(model.locations),
        initial=model.initial,
        accepting=frozenset(model.accepting),
        transitions=tuple(transitions),
        max_constant=model.max_constant,
    )


def automaton_to_model(automaton: Rera) -> AutomatonModel:
    transitions = []
    for transition in automaton.transitions:
        guard = [GuardAtomModel(clock=clock, rel=relation, const=constant) for clock, relation, constant in transition.guard.atoms()]
        transitions.append(
            TransitionModel(
                source=transition.source,
                action=transition.action,
                guard=guard,
                reset=transition.reset,
                target=transition.target,
            )
        )
    return AutomatonModel(
        alphabet=list(automaton.alphabet),
        locations=list(automaton.locations),
        initial=automaton.initial,
        accepting=sorted(automaton.accepting),
        max_constant=automaton.max_constant,
        transitions=transitions,
    )


def automaton_from_document(model: AutomatonModel) -> Rera:
    automaton = automaton_from_model(model)
    violations = validate(automaton)
    if violations:
        raise ValueError("invalid automaton: " + "; ".join(violations))
    return automaton


def parse_automaton(text: str) -> Rera:
    try:
        payload = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ValueError(f"invalid automaton file: {exc.msg} at line {exc.lineno}, column {exc.colno}") from exc
    if not isinstance(payload, dict):
        raise ValueError("automaton file must hold a JSON object")
    try:
        model = AutomatonModel.model_validate(payload)
    except ValidationError as exc:
        raise ValueError(_validation_message(exc)) from exc
    return automaton_from_document(model)


def serialize_automaton(automaton: Rera) -> str:
    return json.dumps(automaton_to_model(automaton).model_dump(), indent=2) + "\n"


def load_automaton(path: str | Path) -> Rera:
    file_path = Path(path)
    try:
        text = file_path.read_text(encoding="utf-8")
    except FileNotFoundError as exc:
        raise ValueError(f"automaton file not found: {file_path}") from exc
    try:
        return parse_automaton(text)
    except ValueError as exc:
        raise ValueError(f"{file_path}: {exc}") from exc


def export_dot(automaton: Rera) -> str:
    dot = graphviz.Digraph("rera")
    dot.attr(rankdir="LR")
    dot.node("__start", label="", shape="none")
    for location in automaton.locations:
        shape = "doublecircle" if location in automaton.accepting else "circle"
        dot.node(location, label=location, shape=shape)
    dot.edge("__start", automaton.initial)
    for transition in automaton.transitions:
        reset_text = "{" + clock_name(transition.action) + "}" if transition.reset else "∅"
        dot.edge(transition.source, transition.target, label=f"{transition.action}, {transition.guard}, {reset_text}")
    return dot.source


def tdg_to_dot(structure: "ObservationStructure") -> str:
    """Language states as circles carrying their label marker, decision states as diamonds."""
    dot = graphviz.Digraph("tdg")
    counter = 0
    stack = [(structure.tdg_root, "l0")]
    dot.node("l0", label=format_label_set(structure.tdg_root.labels), shape="circle")
    while stack:
        state, name = stack.pop()
        for action in sorted(state.children):
            for decision in state.children[action]:
                counter += 1
                decision_name = f"d{counter}"
                dot.node(decision_name, label="", shape="diamond")
                dot.edge(name, decision_name, label=f"{action}, {decision.guard}")
                for flag in (True, False):
                    child = decision.children.get(flag)
                    if child is None:
                        continue
                    counter += 1
                    child_name = f"l{counter}"
                    dot.node(child_name, label=format_label_set(child.labels), shape="circle")
                    dot.edge(decision_name, child_name, label="T" if flag else "F")
                    stack.append((child, child_name))
    return dot.source


def tog_to_dot(structure: "ObservationStructure") -> str:
    dot = graphviz.Digraph("tog")
    counter = 0
    root = structure.tog_root
    dot.node("o0", label=format_label_set(root.olabel), shape="circle", style="dashed" if root.invalid else "solid")
    stack = [(root, "o0")]
    while stack:
        state, name = stack.pop()
        for (action, kclass) in sorted(state.children, key=lambda key: (key[0], key[1].sort_key())):
            decision = state.children[(action, kclass)]
            counter += 1
            decision_name = f"d{counter}"
            dot.node(decision_name, label="", shape="diamond")
            dot.edge(name, decision_name, label=f"{action}, {kclass}")
            for flag in (True, False):
                child = decision.children.get(flag)
                if child is None:
                    continue
                counter += 1
                child_name = f"o{counter}"
                label = format_label_set(child.olabel) + (" invalid" if child.invalid else "")
                dot.node(child_name, label=label, shape="circle", style="dashed" if child.invalid else "solid")
                dot.edge(decision_name, child_name, label="T" if flag else "F")
                stack.append((child, child_name))
    return dot.source


