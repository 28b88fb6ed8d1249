"""
State machines of the remote instruction stream protocol: the instruction
stream generator, the message and reply channels, and the instruction stream
execution unit, with their pure update functions.

Step functions never mutate; each returns the successor states. The
composition engine pairs `*_offers` of a sender with `*_accept` of a receiver;
the `*_steps` functions enumerate receives over an explicit message universe
for inspection and tests.
"""

import itertools
import logging
from dataclasses import dataclass, field, replace
from enum import Enum
from typing import Iterable

from src.services.bta import BasicAction, ExtAction, Mark, ThreadHandle, act, thrf, thrt
from src.services.labels import (
    FALSE,
    I_ACT,
    J_ACT,
    STAR,
    STP,
    TRUE,
    InstructionMessage,
    Label,
    LabelKind,
    ReplySeq,
    matches,
    render_seq,
    symbol,
)
from src.services.strategies import BREADTH, AnnotatedEntry, SelectionStrategy, select, wildcard_expand

logger = logging.getLogger(__name__)

REPLIES = (True, False)


class ProtocolViolation(RuntimeError):
    """A reachable-state invariant of the protocol does not hold."""


class GuardMode(str, Enum):
    """When the generator accepts replies: literally, or whenever it has work."""
    STRICT = "strict"
    SAFE = "safe"


class Terminal(str, Enum):
    GEN_DONE = "ISG√"
    EU_DONE = "ISEU√"
    EU_DEAD = "ISEUδ"

    def __str__(self) -> str:
        return self.value


@dataclass(frozen=True, slots=True)
class ProtocolParams:
    maxlen: int = 1
    mode: GuardMode = GuardMode.SAFE
    strategy: SelectionStrategy = BREADTH
    capacity_msg: int = 1
    capacity_reply: int = 1

    def __post_init__(self):
        if self.maxlen < 0:
            raise ValueError("maxlen must be nonnegative")
        if self.capacity_msg < 1 or self.capacity_reply < 1:
            raise ValueError("channel capacities must be positive")

    @property
    def ack_bound(self) -> int:
        # A generator in SAFE mode can consume maxlen+1 replies between sends.
        return self.maxlen + 1


# --- instruction stream generator ----------------------------------------

@dataclass(frozen=True, slots=True)
class GeneratorState:
    """(n, R): replies consumed since the last send, and the unsent frontier."""
    unacked: int
    frontier: frozenset[AnnotatedEntry]

    @classmethod
    def initial(cls, thread: ThreadHandle) -> "GeneratorState":
        return cls(0, frozenset({AnnotatedEntry("", (), thread)}))

    def entries(self) -> list[AnnotatedEntry]:
        return sorted(self.frontier, key=AnnotatedEntry.sort_key)

    def __str__(self) -> str:
        return f"ISG<{self.unacked},{{{','.join(str(e) for e in self.entries())}}}>"


def updpm(entry: AnnotatedEntry, state: GeneratorState, wildcard: bool = False) -> GeneratorState:
    """Generator update on producing the message for `entry`."""
    if entry not in state.frontier:
        raise ProtocolViolation(f"entry {entry} is not in the frontier of {state}")
    rest = state.frontier - {entry}
    action = act(entry.thread)
    if isinstance(action, Mark):
        return GeneratorState(0, rest)
    if wildcard:
        children = wildcard_expand(entry)
    else:
        actions = entry.actions + (action,)
        children = (
            AnnotatedEntry(entry.prefix + TRUE, actions, thrt(entry.thread)),
            AnnotatedEntry(entry.prefix + FALSE, actions, thrf(entry.thread)),
        )
    return GeneratorState(0, rest | frozenset(children))


def updcr(reply: bool, state: GeneratorState, bound: int | None = None) -> GeneratorState:
    """Generator update on consuming a reply: re-root matching entries, prune the rest."""
    if bound is not None and state.unacked + 1 > bound:
        raise ProtocolViolation(f"generator would hold {state.unacked + 1} unacknowledged replies (bound {bound})")
    frontier = frozenset(
        AnnotatedEntry(e.prefix[1:], e.actions[1:], e.thread)
        for e in state.frontier
        if e.prefix and matches(e.prefix[0], reply)
    )
    return GeneratorState(state.unacked + 1, frontier)


def message_for(entry: AnnotatedEntry, state: GeneratorState) -> InstructionMessage:
    return InstructionMessage(state.unacked, entry.prefix, act(entry.thread))


def _receives_enabled(state: GeneratorState, params: ProtocolParams) -> bool:
    if params.mode is GuardMode.STRICT:
        return bool(select(state.frontier, params.strategy, params.maxlen))
    return bool(state.frontier)


def gen_offers(
    state: GeneratorState | Terminal, params: ProtocolParams
) -> list[tuple[Label, GeneratorState | Terminal]]:
    """Sends and lone actions of the generator (receives go through `gen_accept`)."""
    if state is Terminal.GEN_DONE:
        return []
    if not state.frontier:
        return [(J_ACT, Terminal.GEN_DONE)]
    steps = []
    for entry in select(state.frontier, params.strategy, params.maxlen):
        msg = message_for(entry, state)
        steps.append((Label.snd_ch(1, msg), updpm(entry, state, params.strategy.wildcard)))
    return steps


def gen_accept(
    state: GeneratorState | Terminal, label: Label, params: ProtocolParams
) -> GeneratorState | Terminal | None:
    """Successor on receiving `label` from the reply channel, or None if refused."""
    if label.kind is not LabelKind.RCV_CH or label.port != 4:
        return None
    if state is Terminal.GEN_DONE:
        # A finished generator keeps draining replies in SAFE mode.
        return state if params.mode is GuardMode.SAFE else None
    if not _receives_enabled(state, params):
        return None
    return updcr(label.payload, state, params.ack_bound)


def gen_steps(
    state: GeneratorState | Terminal, params: ProtocolParams
) -> list[tuple[Label, GeneratorState | Terminal]]:
    steps = gen_offers(state, params)
    for reply in REPLIES:
        label = Label.rcv_ch(4, reply)
        nxt = gen_accept(state, label, params)
        if nxt is not None:
            steps.append((label, nxt))
    return steps


# --- channels -------------------------------------------------------------

class Direction(str, Enum):
    CHM = "CHM"
    CHR = "CHR"

    @property
    def ports(self) -> tuple[int, int]:
        return (1, 2) if self is Direction.CHM else (3, 4)


@dataclass(frozen=True, slots=True)
class ChannelState:
    """A reliable FIFO buffer. `capped` marks a stand-in for an unbounded channel."""
    capacity: int
    buffer: tuple = ()
    capped: bool = False

    def __post_init__(self):
        if self.capacity < 1:
            raise ValueError("channel capacity must be positive")
        if len(self.buffer) > self.capacity:
            raise ProtocolViolation(f"channel holds {len(self.buffer)} items over capacity {self.capacity}")

    @classmethod
    def unbounded(cls, cap: int) -> "ChannelState":
        return cls(cap, (), True)

    @property
    def full(self) -> bool:
        return len(self.buffer) >= self.capacity

    def render(self, direction: Direction) -> str:
        items = ",".join(symbol(x) if isinstance(x, bool) else str(x) for x in self.buffer)
        return f"{direction.value}[{items}]"


def channel_offers(ch: ChannelState, direction: Direction) -> list[tuple[Label, ChannelState]]:
    if not ch.buffer:
        return []
    return [(Label.snd_ch(direction.ports[1], ch.buffer[0]), replace(ch, buffer=ch.buffer[1:]))]


def channel_accept(ch: ChannelState, direction: Direction, label: Label) -> ChannelState | None:
    if label.kind is not LabelKind.RCV_CH or label.port != direction.ports[0] or ch.full:
        return None
    return replace(ch, buffer=ch.buffer + (label.payload,))


def channel_steps(ch: ChannelState, direction: Direction, universe: Iterable) -> list[tuple[Label, ChannelState]]:
    """All steps of a channel; `universe` are the payloads it may receive."""
    steps = channel_offers(ch, direction)
    for payload in universe:
        label = Label.rcv_ch(direction.ports[0], payload)
        nxt = channel_accept(ch, direction, label)
        if nxt is not None:
            steps.append((label, nxt))
    return steps


# --- instruction stream execution unit ------------------------------------

StoreEntry = tuple[ReplySeq, ExtAction]


def _store_key(entry: StoreEntry) -> tuple[str, str]:
    return (entry[0], str(entry[1]))


@dataclass(frozen=True, slots=True)
class ExecUnitState:
    """
    (n, S) plus the execution phase.

    `replies` are the replies produced since the last acknowledgement, so
    n = len(replies). `awaiting` is the focus of the dispatched basic action;
    `reply` is set between receiving the service's reply and shipping it.
    """
    replies: ReplySeq = ""
    store: frozenset[StoreEntry] = frozenset()
    awaiting: str | None = None
    reply: bool | None = None

    @property
    def pending_acks(self) -> int:
        return len(self.replies)

    @property
    def idle(self) -> bool:
        return self.awaiting is None

    def entries(self) -> list[StoreEntry]:
        return sorted(self.store, key=_store_key)

    def __str__(self) -> str:
        store = ",".join(f"({render_seq(u)},{a})" for u, a in self.entries())
        if self.reply is not None:
            phase = f"!{symbol(self.reply)}"
        elif self.awaiting is not None:
            phase = f"''[{self.awaiting}]"
        else:
            phase = "'"
        return f"ISEU{phase}<{self.pending_acks},{{{store}}}>"


@dataclass
class UpdateOutcome:
    state: ExecUnitState
    discarded: int = 0


def _strip_matches(prefix: ReplySeq, replies: ReplySeq) -> bool:
    return all(sym == STAR or sym == r for sym, r in zip(prefix, replies))


def updcm_outcome(msg: InstructionMessage, state: ExecUnitState) -> UpdateOutcome:
    """updcm, also reporting whether the message was a dead speculation."""
    n, k = state.pending_acks, msg.ack
    if k > n:
        raise ProtocolViolation(f"message {msg} acknowledges {k} of {n} pending replies")
    unseen = state.replies[k:]
    if not _strip_matches(msg.prefix, unseen):
        return UpdateOutcome(replace(state, replies=unseen), discarded=1)
    if len(unseen) > len(msg.prefix):
        raise ProtocolViolation(f"message {msg} is stripped past its prefix by {len(unseen)} replies")
    entry = (msg.prefix[len(unseen):], msg.instr)
    if not entry[0] and any(not u for u, _ in state.store):
        raise ProtocolViolation(f"second executable instruction {msg.instr} in {state}")
    return UpdateOutcome(replace(state, replies=unseen, store=state.store | {entry}))


def updcm(msg: InstructionMessage, state: ExecUnitState) -> ExecUnitState:
    """Execution unit update on consuming an instruction message."""
    return updcm_outcome(msg, state).state


def updpr_outcome(reply: bool, state: ExecUnitState, bound: int | None = None) -> UpdateOutcome:
    if bound is not None and state.pending_acks + 1 > bound:
        raise ProtocolViolation(f"execution unit would hold {state.pending_acks + 1} pending replies (bound {bound})")
    kept = frozenset((u[1:], a) for u, a in state.store if u and matches(u[0], reply))
    dropped = sum(1 for u, _ in state.store if u and not matches(u[0], reply))
    return UpdateOutcome(ExecUnitState(state.replies + symbol(reply), kept), discarded=dropped)


def updpr(reply: bool, state: ExecUnitState, bound: int | None = None) -> ExecUnitState:
    """Execution unit update on producing a reply."""
    return updpr_outcome(reply, state, bound).state


def enable(instr: ExtAction, store: Iterable[StoreEntry]) -> bool:
    return ("", instr) in set(store)


def executable(state: ExecUnitState) -> ExtAction | None:
    """The instruction with empty prefix in the store, if any."""
    for u, a in state.entries():
        if not u:
            return a
    return None


def eu_offers(
    state: ExecUnitState | Terminal, params: ProtocolParams
) -> list[tuple[Label, ExecUnitState | Terminal]]:
    """Lone actions and reply sends of the execution unit."""
    if isinstance(state, Terminal):
        return []
    if state.reply is not None:
        return [(Label.snd_ch(3, state.reply), updpr(state.reply, state, params.ack_bound))]
    if state.awaiting is not None:
        return [
            (Label.rcv_f(state.awaiting, reply), replace(state, reply=reply))
            for reply in REPLIES
        ]
    instr = executable(state)
    if instr is None:
        return []
    if instr is Mark.STOP:
        return [(STP, Terminal.EU_DONE)]
    if instr is Mark.DEAD:
        return [(I_ACT, Terminal.EU_DEAD)]
    return [(Label.snd_f(instr.focus, instr.method), replace(state, awaiting=instr.focus))]


def eu_accept(state: ExecUnitState | Terminal, label: Label) -> ExecUnitState | None:
    """Successor on receiving an instruction message from channel 2."""
    if isinstance(state, Terminal) or state.reply is not None:
        return None
    if label.kind is not LabelKind.RCV_CH or label.port != 2:
        return None
    return updcm(label.payload, state)


def eu_steps(
    state: ExecUnitState | Terminal, params: ProtocolParams, universe: Iterable[InstructionMessage]
) -> list[tuple[Label, ExecUnitState | Terminal]]:
    steps = eu_offers(state, params)
    for msg in universe:
        label = Label.rcv_ch(2, msg)
        try:
            nxt = eu_accept(state, label)
        except ProtocolViolation:
            continue
        if nxt is not None:
            steps.append((label, nxt))
    return steps


def is_dead_speculation(msg: InstructionMessage, known: ReplySeq) -> bool:
    """Whether `msg` is discarded on receipt once the replies `known` are unseen by it."""
    return not _strip_matches(msg.prefix, known)


def _decided_replies(eu: ExecUnitState) -> ReplySeq:
    # An unshipped reply is produced before the next receipt.
    return eu.replies if eu.reply is None else eu.replies + symbol(eu.reply)


def settle_exec_unit(eu: ExecUnitState | Terminal) -> ExecUnitState | Terminal:
    """Drop store entries the unshipped reply already contradicts."""
    if isinstance(eu, Terminal) or eu.reply is None:
        return eu
    store = frozenset((u, a) for u, a in eu.store if not u or matches(u[0], eu.reply))
    if len(store) == len(eu.store):
        return eu
    return replace(eu, store=store)


def settle_messages(chm: ChannelState, eu: ExecUnitState | Terminal) -> ChannelState:
    """
    Canonical form of the message channel with respect to the execution unit.

    Messages whose receipt is already decided as a discard are replaced by a
    single-symbol dead message with the same ack; messages that will never be
    received by a finished execution unit keep only their ack.
    """
    if not chm.buffer:
        return chm
    if isinstance(eu, Terminal):
        buffer = tuple(InstructionMessage(m.ack, "", Mark.DEAD) for m in chm.buffer)
    else:
        seen = _decided_replies(eu)
        settled = []
        offset = 0
        for msg in chm.buffer:
            offset += msg.ack
            if offset <= len(seen):
                known = seen[offset:]
                if known and is_dead_speculation(msg, known):
                    msg = InstructionMessage(msg.ack, FALSE if known[0] == TRUE else TRUE, Mark.DEAD)
            settled.append(msg)
        buffer = tuple(settled)
    if buffer == chm.buffer:
        return chm
    return replace(chm, buffer=buffer)


def settle_replies(chr_: ChannelState, gen: GeneratorState | Terminal) -> ChannelState:
    """A finished generator drains replies without reading them."""
    if gen is not Terminal.GEN_DONE or all(r is True for r in chr_.buffer):
        return chr_
    return replace(chr_, buffer=(True,) * len(chr_.buffer))


def message_universe(
    alphabet: Iterable[BasicAction], params: ProtocolParams
) -> list[InstructionMessage]:
    """Every well-formed message over the thread's alphabet, in canonical order."""
    symbols = (TRUE, FALSE, STAR) if params.strategy.wildcard else (TRUE, FALSE)
    prefixes = [
        "".join(p) for length in range(params.maxlen + 1) for p in itertools.product(symbols, repeat=length)
    ]
    instrs: list[ExtAction] = sorted(set(alphabet)) + [Mark.STOP, Mark.DEAD]
    return [
        InstructionMessage(ack, prefix, instr)
        for ack in range(params.ack_bound + 1)
        for prefix in prefixes
        for instr in instrs
    ]


# --- reachable-state invariants ------------------------------------------

@dataclass
class InvariantMonitor:
    """Checks reachable-state invariants and records observed peaks."""
    params: ProtocolParams
    peak_unacked: int = 0
    peak_ack: int = 0
    peak_pending: int = 0
    peak_prefix: int = 0
    checked: int = 0
    violations: list[str] = field(default_factory=list)
    # component states already checked; their checks do not depend on the rest
    _seen_gen: set = field(default_factory=set, repr=False)
    _seen_eu: set = field(default_factory=set, repr=False)

    def fail(self, message: str):
        self.violations.append(message)
        logger.error(f"Protocol invariant violated: {message}")
        raise ProtocolViolation(message)

    def observe(self, gen, chm: ChannelState, chr_: ChannelState, eu):
        self.checked += 1
        bound = self.params.ack_bound
        if isinstance(gen, GeneratorState) and gen not in self._seen_gen:
            self._check_generator(gen, bound)
            self._seen_gen.add(gen)
        for msg in chm.buffer:
            self.peak_ack = max(self.peak_ack, msg.ack)
            if msg.ack > bound or len(msg.prefix) > self.params.maxlen:
                self.fail(f"malformed message {msg} in transit")
        if isinstance(eu, ExecUnitState) and eu not in self._seen_eu:
            self._check_exec_unit(eu, bound)
            self._seen_eu.add(eu)
        if isinstance(gen, GeneratorState) and isinstance(eu, ExecUnitState):
            in_transit = sum(msg.ack for msg in chm.buffer)
            if eu.pending_acks != gen.unacked + in_transit + len(chr_.buffer):
                self.fail(
                    f"reply accounting broken: {eu.pending_acks} pending vs "
                    f"{gen.unacked} consumed + {in_transit} in transit + {len(chr_.buffer)} queued"
                )

    def _check_exec_unit(self, eu: ExecUnitState, bound: int):
        self.peak_pending = max(self.peak_pending, eu.pending_acks)
        if eu.pending_acks > bound:
            self.fail(f"execution unit holds {eu.pending_acks} pending replies")
        if sum(1 for u, _ in eu.store if not u) > 1:
            self.fail(f"several executable instructions in {eu}")
        if any(len(u) > self.params.maxlen for u, _ in eu.store):
            self.fail(f"store entry longer than maxlen in {eu}")

    def _check_generator(self, gen: GeneratorState, bound: int):
        self.peak_unacked = max(self.peak_unacked, gen.unacked)
        if gen.unacked > bound:
            self.fail(f"generator holds {gen.unacked} unacknowledged replies")
        prefixes = sorted(e.prefix for e in gen.frontier)
        if prefixes:
            self.peak_prefix = max(self.peak_prefix, max(map(len, prefixes)))
        if any(len(u) > self.params.maxlen + 1 for u in prefixes):
            self.fail(f"frontier prefix longer than maxlen+1 in {gen}")
        if len(set(prefixes)) != len(prefixes):
            self.fail(f"duplicate frontier prefixes in {gen}")
        # In sorted order a prefix of v sorts right before v or before a string it also prefixes.
        for u, v in itertools.pairwise(prefixes):
            if v.startswith(u):
                self.fail(f"frontier prefixes {u or 'ε'} and {v or 'ε'} are comparable in {gen}")
        strategy = self.params.strategy
        if prefixes and (strategy.threshold is None or strategy.breadth_first):
            lengths = [len(u) for u in prefixes]
            if max(lengths) - min(lengths) > 1:
                self.fail(f"breadth-first frontier spans lengths {min(lengths)}..{max(lengths)} in {gen}")

    @property
    def exceeds_maxlen(self) -> bool:
        maxlen = self.params.maxlen
        return max(self.peak_unacked, self.peak_ack, self.peak_pending) > maxlen