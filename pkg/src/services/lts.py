"""
Finite labelled transition systems with a termination predicate, and their
JSON exchange format.
"""

import json
import logging
from collections import deque
from dataclasses import dataclass, field
from functools import cached_property
from typing import Callable, Iterable, Mapping

from src.services.labels import I_ACT, TAU, Label, LabelKind

logger = logging.getLogger(__name__)


@dataclass(frozen=True, slots=True)
class Transition:
    source: str
    label: Label
    target: str


@dataclass(frozen=True)
class Lts:
    """
    States are opaque string ids. A state without outgoing transitions that is
    not terminating is a deadlock state. `annotations` optionally maps states
    to a human-readable summary; it is not part of the exchange format.
    """
    states: tuple[str, ...]
    initial: str
    transitions: tuple[Transition, ...]
    terminating: frozenset[str] = frozenset()
    annotations: Mapping[str, str] = field(default_factory=dict, compare=False, repr=False)

    def __post_init__(self):
        known = set(self.states)
        if self.initial not in known:
            raise ValueError(f"initial state {self.initial} is not a state")
        for t in self.transitions:
            if t.source not in known or t.target not in known:
                raise ValueError(f"transition {t.source} -{t.label}-> {t.target} leaves the state set")
        if not self.terminating <= known:
            raise ValueError("terminating states must be states")

    @classmethod
    def build(
        cls,
        initial: str,
        edges: Iterable[tuple[str, Label, str]],
        terminating: Iterable[str] = (),
        states: Iterable[str] | None = None,
    ) -> "Lts":
        """Convenience constructor; states default to everything mentioned."""
        edges = list(edges)
        terminating = frozenset(terminating)
        if states is None:
            order = [initial]
            for src, _, dst in edges:
                order.extend((src, dst))
            order.extend(sorted(terminating))
            states = list(dict.fromkeys(order))
        return cls(tuple(states), initial, tuple(Transition(s, l, d) for s, l, d in edges), terminating)

    @cached_property
    def successors(self) -> dict[str, list[tuple[Label, str]]]:
        succ: dict[str, list[tuple[Label, str]]] = {s: [] for s in self.states}
        for t in self.transitions:
            succ[t.source].append((t.label, t.target))
        return succ

    def deadlock_states(self) -> list[str]:
        return [s for s in self.states if not self.successors[s] and s not in self.terminating]

    def labels(self) -> set[Label]:
        return {t.label for t in self.transitions}

    def relabel(self, fn: Callable[[Label], Label]) -> "Lts":
        transitions = tuple(Transition(t.source, fn(t.label), t.target) for t in self.transitions)
        return Lts(self.states, self.initial, transitions, self.terminating, self.annotations)

    def hide(self, kinds: Iterable[LabelKind]) -> "Lts":
        """Abstraction: rename every label whose kind is in `kinds` to τ."""
        kinds = frozenset(kinds)
        if not kinds:
            return self
        return self.relabel(lambda label: TAU if label.kind in kinds else label)

    def reachable(self) -> "Lts":
        """Drop states unreachable from the initial state."""
        seen = {self.initial}
        queue = deque([self.initial])
        while queue:
            for _, dst in self.successors[queue.popleft()]:
                if dst not in seen:
                    seen.add(dst)
                    queue.append(dst)
        if len(seen) == len(self.states):
            return self
        return Lts(
            tuple(s for s in self.states if s in seen),
            self.initial,
            tuple(t for t in self.transitions if t.source in seen),
            frozenset(s for s in self.terminating if s in seen),
            self.annotations,
        )

    def renumber(self, prefix: str = "s") -> "Lts":
        """Canonical ids in breadth-first order, successors by label text then old order."""
        order = [self.initial]
        index = {self.initial: 0}
        i = 0
        while i < len(order):
            succ = sorted(self.successors[order[i]], key=lambda pair: str(pair[0]))
            i += 1
            for _, dst in succ:
                if dst not in index:
                    index[dst] = len(order)
                    order.append(dst)
        for s in self.states:
            if s not in index:
                index[s] = len(order)
                order.append(s)
        name = {s: f"{prefix}{index[s]}" for s in order}
        transitions = sorted(
            (Transition(name[t.source], t.label, name[t.target]) for t in self.transitions),
            key=lambda t: (index_of(t.source), str(t.label), index_of(t.target)),
        )
        return Lts(
            tuple(name[s] for s in order),
            name[self.initial],
            tuple(transitions),
            frozenset(name[s] for s in self.terminating),
            {name[s]: a for s, a in self.annotations.items()},
        )

    def shortest_path(self, target: str) -> list[tuple[Label, str]] | None:
        """Steps from the initial state to `target`, breadth-first."""
        parent: dict[str, tuple[str, Label] | None] = {self.initial: None}
        queue = deque([self.initial])
        while queue:
            state = queue.popleft()
            if state == target:
                break
            for label, dst in self.successors[state]:
                if dst not in parent:
                    parent[dst] = (state, label)
                    queue.append(dst)
        if target not in parent:
            return None
        path = []
        state = target
        while parent[state] is not None:
            prev, label = parent[state]
            path.append((label, state))
            state = prev
        return path[::-1]

    def reachable_avoiding(self, kinds: Iterable[LabelKind]) -> set[str]:
        """States reachable without taking a transition whose label kind is in `kinds`."""
        kinds = frozenset(kinds)
        seen = {self.initial}
        queue = deque([self.initial])
        while queue:
            for label, dst in self.successors[queue.popleft()]:
                if label.kind not in kinds and dst not in seen:
                    seen.add(dst)
                    queue.append(dst)
        return seen

    def to_json(self) -> dict:
        return {
            "states": list(self.states),
            "initial": self.initial,
            "terminating": sorted(self.terminating, key=self.states.index),
            "transitions": [
                {"from": t.source, "label": t.label.to_json(), "to": t.target} for t in self.transitions
            ],
        }

    def dumps(self) -> str:
        return json.dumps(self.to_json(), indent=2, ensure_ascii=False) + "\n"

    @classmethod
    def from_json(cls, data: dict) -> "Lts":
        return cls(
            tuple(data["states"]),
            data["initial"],
            tuple(Transition(t["from"], Label.from_json(t["label"]), t["to"]) for t in data["transitions"]),
            frozenset(data.get("terminating", ())),
        )

    @classmethod
    def loads(cls, text: str) -> "Lts":
        return cls.from_json(json.loads(text))


def index_of(state_id: str) -> int:
    digits = "".join(ch for ch in state_id if ch.isdigit())
    return int(digits) if digits else -1


def tau_closure(lts: Lts, states: Iterable[str]) -> frozenset[str]:
    seen = set(states)
    stack = list(seen)
    while stack:
        for label, dst in lts.successors[stack.pop()]:
            if label.is_tau and dst not in seen:
                seen.add(dst)
                stack.append(dst)
    return frozenset(seen)


def weak_after(lts: Lts, states: frozenset[str], label: Label) -> frozenset[str]:
    """States reachable by ⇒ -label-> ⇒ from the τ-closed set `states`."""
    hits = {dst for s in states for lab, dst in lts.successors[s] if lab == label}
    return tau_closure(lts, hits)


def visible_traces(lts: Lts, max_len: int) -> set[tuple[str, ...]]:
    """All τ-elided traces of length at most `max_len`, rendered as label text."""
    traces = {()}
    frontier = {(): tau_closure(lts, [lts.initial])}
    for _ in range(max_len):
        next_frontier: dict[tuple[str, ...], frozenset[str]] = {}
        for trace, states in frontier.items():
            visible = {lab for s in states for lab, _ in lts.successors[s] if not lab.is_tau}
            for label in visible:
                key = trace + (str(label),)
                reached = weak_after(lts, states, label)
                next_frontier[key] = next_frontier.get(key, frozenset()) | reached
        traces.update(next_frontier)
        frontier = next_frontier
    return traces


def inaction_free_deadlocks(lts: Lts) -> list[str]:
    """Deadlock states reachable without performing i (the inaction of D)."""
    avoid = lts.reachable_avoiding({I_ACT.kind})
    return [s for s in lts.deadlock_states() if s in avoid]
