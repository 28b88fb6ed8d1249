"""
Selection policies for the instruction stream generator.

The plain policy sends the shallowest frontier entries first. Thresholded
policies only send speculative entries whose reply sequence is likely enough,
and the wildcard modifier collapses the two branches of an instruction whose
successor threads are identical.
"""

import logging
import math
from dataclasses import dataclass
from typing import Callable, Iterable, Mapping

from src.services.bta import DEFAULT_PROBABILITY, BasicAction, ThreadHandle, act, thrf, thrt, threads_equal
from src.services.labels import FALSE, STAR, TRUE, ReplySeq

logger = logging.getLogger(__name__)


@dataclass(frozen=True, slots=True)
class SelectionStrategy:
    """
    `threshold` None is the plain breadth-first policy. With a threshold,
    `breadth_first` keeps the minimum-length restriction.
    """
    threshold: float | None = None
    breadth_first: bool = True
    wildcard: bool = False

    def __post_init__(self):
        if self.threshold is not None and not 0.0 <= self.threshold <= 1.0:
            raise ValueError(f"threshold {self.threshold} outside [0, 1]")

    @property
    def name(self) -> str:
        if self.threshold is None:
            base = "breadth"
        elif self == PROB50.with_wildcard(self.wildcard):
            base = "prob50"
        elif self == PROB95.with_wildcard(self.wildcard):
            base = "prob95"
        else:
            base = f"prob{self.threshold:g}{'' if self.breadth_first else '-deep'}"
        return f"{base}+wildcard" if self.wildcard else base

    def with_wildcard(self, wildcard: bool = True) -> "SelectionStrategy":
        return SelectionStrategy(self.threshold, self.breadth_first, wildcard)

    def __str__(self) -> str:
        return self.name


BREADTH = SelectionStrategy()
PROB50 = SelectionStrategy(0.50, True)
PROB95 = SelectionStrategy(0.95, False)

_BASES = {"breadth": BREADTH, "prob50": PROB50, "prob95": PROB95}


def parse_strategy(text: str) -> SelectionStrategy:
    """`breadth`, `prob50` or `prob95`, optionally followed by `+wildcard`."""
    parts = [p.strip().lower() for p in text.split("+")]
    if parts[0] not in _BASES:
        raise ValueError(f"unknown strategy '{text}'")
    modifiers = parts[1:]
    if any(m != "wildcard" for m in modifiers):
        raise ValueError(f"unknown strategy modifier in '{text}'")
    return _BASES[parts[0]].with_wildcard(bool(modifiers))


@dataclass(frozen=True, slots=True)
class AnnotatedEntry:
    """
    A generator frontier entry: run `thread` after the replies `prefix`.

    `actions` are the instructions whose replies make up `prefix`, position
    by position, counted from the last acknowledged point.
    """
    prefix: ReplySeq
    actions: tuple[BasicAction, ...]
    thread: ThreadHandle

    def __post_init__(self):
        if len(self.actions) != len(self.prefix):
            raise ValueError(f"entry {self.prefix} carries {len(self.actions)} actions")

    def __str__(self) -> str:
        return f"({self.prefix or 'ε'},{self.thread.state})"

    def sort_key(self) -> tuple:
        return (len(self.prefix), self.prefix, self.thread.state)


def residual_probability(
    entry: AnnotatedEntry,
    probs: Mapping[BasicAction, float] | Callable[[BasicAction], float] | None = None,
) -> float:
    """Probability that the environment produces `entry.prefix`, replies independent."""
    if probs is None:
        lookup = entry.thread.spec.probability
    elif callable(probs):
        lookup = probs
    else:
        lookup = lambda a: probs.get(a, DEFAULT_PROBABILITY)  # noqa: E731
    factors = []
    for symbol, action in zip(entry.prefix, entry.actions):
        if symbol == TRUE:
            factors.append(lookup(action))
        elif symbol == FALSE:
            factors.append(1.0 - lookup(action))
    return math.prod(factors)


def wildcard_expand(
    entry: AnnotatedEntry,
    equal: Callable[[ThreadHandle, ThreadHandle], bool] = threads_equal,
) -> tuple[AnnotatedEntry, ...]:
    """Children of an entry whose thread performs a basic action."""
    action = act(entry.thread)
    if not isinstance(action, BasicAction):
        raise ValueError(f"{entry.thread.state} does not perform a basic action")
    actions = entry.actions + (action,)
    on_true, on_false = thrt(entry.thread), thrf(entry.thread)
    if equal(on_true, on_false):
        return (AnnotatedEntry(entry.prefix + STAR, actions, on_true),)
    return (
        AnnotatedEntry(entry.prefix + TRUE, actions, on_true),
        AnnotatedEntry(entry.prefix + FALSE, actions, on_false),
    )


def select(
    frontier: Iterable[AnnotatedEntry],
    strategy: SelectionStrategy,
    maxlen: int,
) -> tuple[AnnotatedEntry, ...]:
    """
    Entries the generator may send next, in sending order.

    Empty-prefix entries always qualify. Under a non-breadth-first threshold,
    qualifying entries are ordered by probability, then length, then prefix.
    """
    entries = sorted(frontier, key=AnnotatedEntry.sort_key)
    if not entries:
        return ()
    if strategy.threshold is None or strategy.breadth_first:
        shortest = len(entries[0].prefix)
        if shortest > maxlen:
            return ()
        chosen = [e for e in entries if len(e.prefix) == shortest]
        if strategy.threshold is not None:
            chosen = [e for e in chosen if not e.prefix or residual_probability(e) >= strategy.threshold]
        return tuple(chosen)
    scored = [
        (residual_probability(e), e) for e in entries if len(e.prefix) <= maxlen
    ]
    chosen = [(p, e) for p, e in scored if not e.prefix or p >= strategy.threshold]
    chosen.sort(key=lambda pe: (-pe[0], len(pe[1].prefix), pe[1].prefix))
    return tuple(e for _, e in chosen)
