"""
Thread and LTS corpora for the acceptance suites: exhaustive enumeration of
small canonical specs, seeded random specs and seeded random LTS pairs.
"""

import itertools
import logging
from typing import Iterator, Sequence

import numpy as np

from src.services.bta import BasicAction, Constant, Postcond, Rhs, ThreadSpec, reachable_names
from src.services.labels import TAU, Label
from src.services.lts import Lts, Transition

logger = logging.getLogger(__name__)

DEFAULT_ALPHABET = (BasicAction("f", "a"), BasicAction("f", "b"))


def canonicalize(spec: ThreadSpec) -> ThreadSpec:
    """Keep the reachable equations and rename them X0, X1, ... in breadth-first order."""
    order = reachable_names(spec)
    rename = {name: f"X{i}" for i, name in enumerate(order)}
    equations = []
    for name in order:
        rhs = spec.table[name]
        if isinstance(rhs, Postcond):
            rhs = Postcond(rhs.action, rename[rhs.on_true], rename[rhs.on_false])
        equations.append((rename[name], rhs))
    return ThreadSpec(tuple(equations), "X0", spec.probabilities)


def _options(n: int, alphabet: Sequence[BasicAction]) -> list[Rhs]:
    names = [f"X{i}" for i in range(n)]
    return [Constant.TERMINATE, Constant.DEADLOCK] + [
        Postcond(a, y, z) for a in alphabet for y in names for z in names
    ]


def enumerate_specs(max_equations: int, alphabet: Sequence[BasicAction] = DEFAULT_ALPHABET) -> Iterator[ThreadSpec]:
    """Every structurally distinct spec with at most `max_equations` reachable equations."""
    for n in range(1, max_equations + 1):
        names = [f"X{i}" for i in range(n)]
        for rhss in itertools.product(_options(n, alphabet), repeat=n):
            spec = ThreadSpec(tuple(zip(names, rhss)), "X0")
            if reachable_names(spec) == names:
                yield spec


def random_spec(
    rng: np.random.Generator,
    max_equations: int = 5,
    alphabet: Sequence[BasicAction] = DEFAULT_ALPHABET,
) -> ThreadSpec:
    n = int(rng.integers(1, max_equations + 1))
    names = [f"X{i}" for i in range(n)]
    equations = []
    for name in names:
        draw = rng.random()
        if draw < 0.15:
            rhs: Rhs = Constant.TERMINATE
        elif draw < 0.25:
            rhs = Constant.DEADLOCK
        else:
            action = alphabet[int(rng.integers(len(alphabet)))]
            rhs = Postcond(action, names[int(rng.integers(n))], names[int(rng.integers(n))])
        equations.append((name, rhs))
    return canonicalize(ThreadSpec(tuple(equations), "X0"))


def random_specs(count: int, seed: int, max_equations: int = 5) -> list[ThreadSpec]:
    rng = np.random.default_rng(seed)
    return [random_spec(rng, max_equations) for _ in range(count)]


def annotate(spec: ThreadSpec, probability: float) -> ThreadSpec:
    """The same spec with every basic action given `probability` of replying True."""
    return spec.with_probabilities({a: probability for a in spec.alphabet})


def random_lts(
    rng: np.random.Generator,
    max_states: int = 10,
    actions: Sequence[str] = ("a", "b"),
    tau_ratio: float = 0.3,
) -> Lts:
    n = int(rng.integers(2, max_states + 1))
    states = [f"q{i}" for i in range(n)]
    edges = []
    for s in states:
        for _ in range(int(rng.integers(0, 3))):
            label = TAU if rng.random() < tau_ratio else Label.action(actions[int(rng.integers(len(actions)))])
            edges.append(Transition(s, label, states[int(rng.integers(n))]))
    terminating = frozenset(s for s in states if rng.random() < 0.2)
    return Lts(tuple(states), states[0], tuple(dict.fromkeys(edges)), terminating)


def stutter(lts: Lts, rng: np.random.Generator) -> Lts:
    """An equivalent variant: one transition s -a-> t becomes s -a-> m -τ-> t."""
    if not lts.transitions:
        return lts
    pick = int(rng.integers(len(lts.transitions)))
    chosen = lts.transitions[pick]
    middle = "m0"
    while middle in lts.states:
        middle += "'"
    transitions = list(lts.transitions)
    transitions[pick] = Transition(chosen.source, chosen.label, middle)
    transitions.append(Transition(middle, TAU, chosen.target))
    return Lts(lts.states + (middle,), lts.initial, tuple(transitions), lts.terminating)


def random_lts_pairs(count: int, seed: int, max_states: int = 10) -> list[tuple[Lts, Lts]]:
    """Half independent pairs, half a system paired with a stuttered copy."""
    rng = np.random.default_rng(seed)
    pairs = []
    for i in range(count):
        left = random_lts(rng, max_states - 1 if i % 2 else max_states)
        if i % 2:
            right = stutter(left, rng)
        else:
            right = random_lts(rng, max_states)
        pairs.append((left, right))
    return pairs
