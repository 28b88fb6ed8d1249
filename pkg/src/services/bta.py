"""
Regular threads as flattened guarded recursive specifications.

A thread is a finite set of equations whose right-hand sides are S, D or a
single postconditional composition with variable references in both branch
positions. A ThreadHandle names one equation of a spec and denotes one
residual thread of the spec's start thread.
"""

import logging
import re
from dataclasses import dataclass, field
from enum import Enum
from functools import cached_property, lru_cache
from typing import Iterable, Mapping

logger = logging.getLogger(__name__)

DEFAULT_PROBABILITY = 0.5

_NAME_RE = re.compile(r"^[A-Za-z_][A-Za-z0-9_]*$")
_ACTION_RE = re.compile(r"^([a-z0-9]+)\.([a-z0-9]+)$")
_TOKEN_RE = re.compile(r"\s*(?:([?:=()])|([^\s?:=()]+))")
RESERVED = {"S", "D"}


class ThreadSpecError(ValueError):
    """Raised when a thread spec is malformed; `errors` lists every problem found."""

    def __init__(self, errors: list[str]):
        self.errors = list(errors)
        super().__init__("; ".join(self.errors))


@dataclass(frozen=True, order=True, slots=True)
class BasicAction:
    """A request `focus.method` to a service."""
    focus: str
    method: str

    def __post_init__(self):
        if not _ACTION_RE.match(f"{self.focus}.{self.method}"):
            raise ThreadSpecError([f"malformed action name '{self.focus}.{self.method}'"])

    def __str__(self) -> str:
        return f"{self.focus}.{self.method}"

    @classmethod
    def parse(cls, text: str) -> "BasicAction":
        match = _ACTION_RE.match(text)
        if not match:
            raise ThreadSpecError([f"malformed action name '{text}'"])
        return cls(match.group(1), match.group(2))


class Mark(str, Enum):
    """The two special instructions sent for S and D."""
    STOP = "stop"
    DEAD = "dead"

    def __str__(self) -> str:
        return self.value


ExtAction = BasicAction | Mark


def parse_ext_action(text: str) -> ExtAction:
    if text in (Mark.STOP.value, Mark.DEAD.value):
        return Mark(text)
    return BasicAction.parse(text)


class Constant(str, Enum):
    TERMINATE = "S"
    DEADLOCK = "D"

    def __str__(self) -> str:
        return self.value


@dataclass(frozen=True, slots=True)
class Postcond:
    action: BasicAction
    on_true: str
    on_false: str

    def __str__(self) -> str:
        return f"{self.action} ? {self.on_true} : {self.on_false}"


Rhs = Constant | Postcond


@dataclass(frozen=True, eq=True)
class ThreadSpec:
    """
    A closed, flattened recursive specification.

    `equations` keeps declaration order; `probabilities` maps basic actions to
    the probability that their execution yields the reply True.
    """
    equations: tuple[tuple[str, Rhs], ...]
    start: str
    probabilities: tuple[tuple[BasicAction, float], ...] = ()

    def __post_init__(self):
        errors = _validate(self.equations, self.start, self.probabilities)
        if errors:
            raise ThreadSpecError(errors)

    def __hash__(self) -> int:
        return self._digest

    @cached_property
    def _digest(self) -> int:
        return hash((self.equations, self.start, self.probabilities))

    @cached_property
    def table(self) -> dict[str, Rhs]:
        return dict(self.equations)

    @cached_property
    def probability_table(self) -> dict[BasicAction, float]:
        return dict(self.probabilities)

    @property
    def names(self) -> list[str]:
        return [name for name, _ in self.equations]

    def handle(self, name: str | None = None) -> "ThreadHandle":
        return ThreadHandle(self, self.start if name is None else name)

    def probability(self, action: BasicAction) -> float:
        return self.probability_table.get(action, DEFAULT_PROBABILITY)

    @cached_property
    def alphabet(self) -> tuple[BasicAction, ...]:
        """Basic actions occurring in the spec, sorted."""
        return tuple(sorted({rhs.action for _, rhs in self.equations if isinstance(rhs, Postcond)}))

    def with_probabilities(self, probabilities: Mapping[BasicAction, float]) -> "ThreadSpec":
        return ThreadSpec(self.equations, self.start, tuple(sorted(probabilities.items())))

    @classmethod
    def build(
        cls,
        equations: Mapping[str, Rhs] | Iterable[tuple[str, Rhs]],
        start: str | None = None,
        probabilities: Mapping[BasicAction, float] | None = None,
    ) -> "ThreadSpec":
        pairs = tuple(equations.items()) if isinstance(equations, Mapping) else tuple(equations)
        if start is None and pairs:
            start = pairs[0][0]
        return cls(pairs, start or "", tuple(sorted((probabilities or {}).items())))


def _validate(equations, start, probabilities) -> list[str]:
    errors = []
    seen = set()
    for name, rhs in equations:
        if not _NAME_RE.match(name) or name in RESERVED:
            errors.append(f"malformed variable name '{name}'")
        if name in seen:
            errors.append(f"duplicate equation for {name}")
        seen.add(name)
    for name, rhs in equations:
        if isinstance(rhs, Postcond):
            for ref in (rhs.on_true, rhs.on_false):
                if ref not in seen:
                    errors.append(f"unknown variable {ref} in equation for {name}")
    if not equations:
        errors.append("no equations defined")
    elif start not in seen:
        errors.append(f"missing start variable {start}")
    for action, p in probabilities:
        if not 0.0 <= p <= 1.0:
            errors.append(f"probability {p} for {action} out of range")
    return errors


@dataclass(frozen=True, slots=True)
class ThreadHandle:
    """One residual thread: a state of a spec."""
    spec: ThreadSpec = field(repr=False)
    state: str

    def __post_init__(self):
        if self.state not in self.spec.table:
            raise ThreadSpecError([f"unknown variable {self.state}"])

    @property
    def rhs(self) -> Rhs:
        return self.spec.table[self.state]

    def __str__(self) -> str:
        return self.state

    def __lt__(self, other: "ThreadHandle") -> bool:
        return self.state < other.state


def _canonical_deadlock() -> ThreadHandle:
    spec = ThreadSpec((("Dead", Constant.DEADLOCK),), "Dead")
    return ThreadHandle(spec, "Dead")


DEADLOCK_HANDLE = _canonical_deadlock()


def act(t: ThreadHandle) -> ExtAction:
    rhs = t.rhs
    if rhs is Constant.TERMINATE:
        return Mark.STOP
    if rhs is Constant.DEADLOCK:
        return Mark.DEAD
    return rhs.action


def thrt(t: ThreadHandle) -> ThreadHandle:
    rhs = t.rhs
    if isinstance(rhs, Postcond):
        return ThreadHandle(t.spec, rhs.on_true)
    return DEADLOCK_HANDLE


def thrf(t: ThreadHandle) -> ThreadHandle:
    rhs = t.rhs
    if isinstance(rhs, Postcond):
        return ThreadHandle(t.spec, rhs.on_false)
    return DEADLOCK_HANDLE


def residuals(t: ThreadHandle) -> frozenset[ThreadHandle]:
    """Least set containing t and closed under thrt/thrf of postconditional members."""
    seen = {t.state}
    stack = [t.state]
    table = t.spec.table
    while stack:
        rhs = table[stack.pop()]
        if isinstance(rhs, Postcond):
            for nxt in (rhs.on_true, rhs.on_false):
                if nxt not in seen:
                    seen.add(nxt)
                    stack.append(nxt)
    return frozenset(ThreadHandle(t.spec, name) for name in seen)


def reachable_names(spec: ThreadSpec, start: str | None = None) -> list[str]:
    """Equation names reachable from `start` in breadth-first order, true branch first."""
    start = spec.start if start is None else start
    order = [start]
    seen = {start}
    i = 0
    while i < len(order):
        rhs = spec.table[order[i]]
        i += 1
        if isinstance(rhs, Postcond):
            for nxt in (rhs.on_true, rhs.on_false):
                if nxt not in seen:
                    seen.add(nxt)
                    order.append(nxt)
    return order


# --- minimization ---------------------------------------------------------

def _node_label(rhs: Rhs) -> str:
    return str(rhs.action) if isinstance(rhs, Postcond) else rhs.value


def _refine(nodes: dict[str, Rhs]) -> dict[str, int]:
    """Coarsest partition of a deterministic thread graph (Moore refinement)."""
    names = list(nodes)
    labels = sorted({_node_label(rhs) for rhs in nodes.values()})
    block = {name: labels.index(_node_label(nodes[name])) for name in names}
    count = len(labels)
    while True:
        keys = {}
        new_block = {}
        for name in names:
            rhs = nodes[name]
            if isinstance(rhs, Postcond):
                key = (block[name], block[rhs.on_true], block[rhs.on_false])
            else:
                key = (block[name],)
            new_block[name] = keys.setdefault(key, len(keys))
        if len(keys) == count:
            return new_block
        block, count = new_block, len(keys)


@lru_cache(maxsize=256)
def _classes(spec: ThreadSpec) -> dict[str, int]:
    return _refine(spec.table)


def minimize(spec: ThreadSpec) -> tuple[ThreadSpec, dict[str, str]]:
    """
    Bisimulation-minimal spec plus the mapping from original to minimized names.

    Each block is named after its first member in declaration order.
    """
    classes = _classes(spec)
    representative: dict[int, str] = {}
    for name in spec.names:
        representative.setdefault(classes[name], name)
    mapping = {name: representative[classes[name]] for name in spec.names}
    equations = []
    for name in spec.names:
        if mapping[name] != name:
            continue
        rhs = spec.table[name]
        if isinstance(rhs, Postcond):
            rhs = Postcond(rhs.action, mapping[rhs.on_true], mapping[rhs.on_false])
        equations.append((name, rhs))
    minimized = ThreadSpec(tuple(equations), mapping[spec.start], spec.probabilities)
    logger.debug(f"Minimized {len(spec.equations)} equations to {len(equations)}")
    return minimized, mapping


def threads_equal(a: ThreadHandle, b: ThreadHandle) -> bool:
    """Identity of the denoted threads, decided by minimization."""
    if a.spec is b.spec or a.spec == b.spec:
        classes = _classes(a.spec)
        return classes[a.state] == classes[b.state]
    nodes = {}
    for tag, spec in (("a", a.spec), ("b", b.spec)):
        for name, rhs in spec.equations:
            if isinstance(rhs, Postcond):
                rhs = Postcond(rhs.action, f"{tag}:{rhs.on_true}", f"{tag}:{rhs.on_false}")
            nodes[f"{tag}:{name}"] = rhs
    classes = _refine(nodes)
    return classes[f"a:{a.state}"] == classes[f"b:{b.state}"]


# --- concrete syntax ------------------------------------------------------

def _tokenize(text: str) -> list[str]:
    tokens = []
    pos = 0
    text = text.rstrip()
    while pos < len(text):
        match = _TOKEN_RE.match(text, pos)
        if not match or match.end() == pos:
            break
        tokens.append(match.group(1) or match.group(2))
        pos = match.end()
    return tokens


class _TermParser:
    """Recursive descent over one equation's right-hand side."""

    def __init__(self, tokens: list[str], line: int):
        self.tokens = tokens
        self.pos = 0
        self.line = line

    def peek(self) -> str | None:
        return self.tokens[self.pos] if self.pos < len(self.tokens) else None

    def take(self, expected: str | None = None) -> str:
        token = self.peek()
        if token is None or (expected is not None and token != expected):
            want = f"'{expected}'" if expected else "a term"
            raise ThreadSpecError([f"expected {want} at line {self.line}"])
        self.pos += 1
        return token

    def term(self):
        token = self.take()
        if token == "(":
            inner = self.term()
            self.take(")")
            return inner
        if token in RESERVED:
            return Constant(token)
        if "." in token:
            if not _ACTION_RE.match(token):
                raise ThreadSpecError([f"malformed action name '{token}' at line {self.line}"])
            self.take("?")
            on_true = self.term()
            self.take(":")
            on_false = self.term()
            return (BasicAction.parse(token), on_true, on_false)
        if not _NAME_RE.match(token):
            raise ThreadSpecError([f"malformed variable name '{token}' at line {self.line}"])
        return token


def parse_spec(text: str) -> ThreadSpec:
    """
    Parse the line-oriented thread DSL.

    Raises ThreadSpecError with every line-numbered problem found.
    """
    errors: list[str] = []
    raw: list[tuple[str, object, int]] = []
    declared: dict[str, int] = {}
    start: tuple[str, int] | None = None
    probabilities: dict[BasicAction, float] = {}

    for number, line in enumerate(text.splitlines(), start=1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if line.startswith("@"):
            parts = line.split()
            if parts[0] == "@start" and len(parts) == 2:
                if start is not None:
                    errors.append(f"duplicate start directive at line {number} (first at line {start[1]})")
                else:
                    start = (parts[1], number)
            elif parts[0] == "@prob" and len(parts) == 3:
                try:
                    action = BasicAction.parse(parts[1])
                    value = float(parts[2])
                except ThreadSpecError:
                    errors.append(f"malformed action name '{parts[1]}' at line {number}")
                    continue
                except ValueError:
                    errors.append(f"malformed probability '{parts[2]}' at line {number}")
                    continue
                if action in probabilities:
                    errors.append(f"duplicate probability for {action} at line {number}")
                elif not 0.0 <= value <= 1.0:
                    errors.append(f"probability {parts[2]} for {action} out of range at line {number}")
                else:
                    probabilities[action] = value
            else:
                errors.append(f"malformed directive '{line}' at line {number}")
            continue
        tokens = _tokenize(line)
        if len(tokens) < 3 or tokens[1] != "=":
            errors.append(f"expected 'NAME = term' at line {number}")
            continue
        name = tokens[0]
        if not _NAME_RE.match(name) or name in RESERVED:
            errors.append(f"malformed variable name '{name}' at line {number}")
            continue
        parser = _TermParser(tokens[2:], number)
        try:
            term = parser.term()
            if parser.peek() is not None:
                raise ThreadSpecError([f"unexpected '{parser.peek()}' at line {number}"])
        except ThreadSpecError as e:
            errors.extend(e.errors)
            continue
        if isinstance(term, str) and not isinstance(term, Constant):
            errors.append(f"unguarded equation for {name} at line {number}")
            continue
        if name in declared:
            errors.append(f"duplicate equation for {name} at line {number}")
            continue
        declared[name] = number
        raw.append((name, term, number))

    equations: list[tuple[str, Rhs]] = []
    used = set(declared)
    for name, term, number in raw:
        pending: list[tuple[str, object]] = [(name, term)]
        counter = 0
        while pending:
            owner, current = pending.pop(0)
            if isinstance(current, Constant):
                equations.append((owner, current))
                continue
            action, on_true, on_false = current
            branches = []
            for branch in (on_true, on_false):
                if isinstance(branch, str) and not isinstance(branch, Constant):
                    if branch not in declared:
                        errors.append(f"unknown variable {branch} at line {number}")
                    branches.append(branch)
                    continue
                counter += 1
                fresh = f"{name}_{counter}"
                while fresh in used:
                    counter += 1
                    fresh = f"{name}_{counter}"
                used.add(fresh)
                branches.append(fresh)
                pending.append((fresh, branch))
            equations.append((owner, Postcond(action, branches[0], branches[1])))

    if not raw and not errors:
        errors.append("no equations defined")
    start_name = equations[0][0] if equations else ""
    if start is not None:
        if start[0] not in declared:
            errors.append(f"missing start variable {start[0]} at line {start[1]}")
        start_name = start[0]
    if errors:
        raise ThreadSpecError(errors)
    return ThreadSpec(tuple(equations), start_name, tuple(sorted(probabilities.items())))


def print_spec(spec: ThreadSpec) -> str:
    lines = [f"{name} = {rhs}" for name, rhs in spec.equations]
    if spec.start != spec.equations[0][0]:
        lines.append(f"@start {spec.start}")
    for action, p in spec.probabilities:
        lines.append(f"@prob {action} {p!r}")
    return "\n".join(lines) + "\n"
