"""
Explicit-state composition of generator, message channel, reply channel and
execution unit, with encapsulation of the channel actions and abstraction.
"""

import logging
from collections import deque
from collections.abc import Iterator, Mapping
from dataclasses import dataclass

from src.schema.configs import CompositionConfig
from src.schema.results import AckPeaks, ExploreStats
from src.services.bta import ThreadHandle
from src.services.labels import ENCAPSULATED, TAU, Label, gamma
from src.services.lts import Lts, Transition, inaction_free_deadlocks
from src.services.protocol import (
    ChannelState,
    Direction,
    ExecUnitState,
    GeneratorState,
    InvariantMonitor,
    ProtocolParams,
    ProtocolViolation,
    Terminal,
    channel_accept,
    channel_offers,
    eu_accept,
    eu_offers,
    gen_accept,
    gen_offers,
    settle_exec_unit,
    settle_messages,
    settle_replies,
)

logger = logging.getLogger(__name__)


class StateBoundExceeded(RuntimeError):
    def __init__(self, bound: int):
        self.bound = bound
        super().__init__(f"exploration exceeded the state bound of {bound} states")


@dataclass(frozen=True, slots=True)
class SystemState:
    gen: GeneratorState | Terminal
    chm: ChannelState
    chr: ChannelState
    eu: ExecUnitState | Terminal

    @classmethod
    def initial(cls, thread: ThreadHandle, params: ProtocolParams) -> "SystemState":
        return cls(
            GeneratorState.initial(thread),
            ChannelState(params.capacity_msg),
            ChannelState(params.capacity_reply),
            ExecUnitState(),
        )

    @property
    def terminated(self) -> bool:
        return (
            self.gen is Terminal.GEN_DONE
            and not self.chm.buffer
            and not self.chr.buffer
            and self.eu is Terminal.EU_DONE
        )

    def summary(self) -> str:
        return " | ".join(
            (str(self.gen), self.chm.render(Direction.CHM), self.chr.render(Direction.CHR), str(self.eu))
        )


def _handshake(send: Label, receive_label: Label) -> Label:
    result = gamma(send, receive_label)
    if result is None:
        raise AssertionError(f"{send} and {receive_label} do not communicate")
    return result


def settle(state: SystemState) -> SystemState:
    """
    Canonical representative of `state`. Channel payloads never show in the
    composed labels, so message contents whose receipt is already decided and
    reply values nobody reads are normalized.
    """
    eu = settle_exec_unit(state.eu)
    chm = settle_messages(state.chm, eu)
    chr_ = settle_replies(state.chr, state.gen)
    if eu is state.eu and chm is state.chm and chr_ is state.chr:
        return state
    return SystemState(state.gen, chm, chr_, eu)


class StepCache:
    """Component steps memoized over one exploration; components recur across system states."""

    def __init__(self, params: ProtocolParams):
        self.params = params
        self._gen_offers: dict = {}
        self._gen_accept: dict = {}
        self._eu_offers: dict = {}
        self._eu_accept: dict = {}

    def gen_offers(self, gen: GeneratorState | Terminal) -> list[tuple[Label, GeneratorState | Terminal]]:
        if gen not in self._gen_offers:
            self._gen_offers[gen] = gen_offers(gen, self.params)
        return self._gen_offers[gen]

    def gen_accept(self, gen: GeneratorState | Terminal, label: Label) -> GeneratorState | Terminal | None:
        key = (gen, label.payload)
        if key not in self._gen_accept:
            self._gen_accept[key] = gen_accept(gen, label, self.params)
        return self._gen_accept[key]

    def eu_offers(self, eu: ExecUnitState | Terminal) -> list[tuple[Label, ExecUnitState | Terminal]]:
        if eu not in self._eu_offers:
            self._eu_offers[eu] = eu_offers(eu, self.params)
        return self._eu_offers[eu]

    def eu_accept(self, eu: ExecUnitState | Terminal, label: Label) -> ExecUnitState | None:
        key = (eu, label.payload)
        if key not in self._eu_accept:
            self._eu_accept[key] = eu_accept(eu, label)
        return self._eu_accept[key]


def system_steps(
    state: SystemState, params: ProtocolParams, cache: StepCache | None = None
) -> list[tuple[Label, SystemState]]:
    """
    Steps of the encapsulated composition: lone actions outside the channel
    alphabet, and handshakes of a send with its matching receive. Successors
    are returned unsettled.
    """
    cache = cache or StepCache(params)
    steps: list[tuple[Label, SystemState]] = []
    gen, chm, chr_, eu = state.gen, state.chm, state.chr, state.eu

    for label, gen2 in cache.gen_offers(gen):
        if label.kind not in ENCAPSULATED:
            steps.append((label, SystemState(gen2, chm, chr_, eu)))
            continue
        chm2 = channel_accept(chm, Direction.CHM, label.complement())
        if chm2 is not None:
            steps.append((_handshake(label, label.complement()), SystemState(gen2, chm2, chr_, eu)))

    for label, chm2 in channel_offers(chm, Direction.CHM):
        eu2 = cache.eu_accept(eu, label.complement())
        if eu2 is not None:
            steps.append((_handshake(label, label.complement()), SystemState(gen, chm2, chr_, eu2)))

    for label, eu2 in cache.eu_offers(eu):
        if label.kind not in ENCAPSULATED:
            steps.append((label, SystemState(gen, chm, chr_, eu2)))
            continue
        chr2 = channel_accept(chr_, Direction.CHR, label.complement())
        if chr2 is not None:
            steps.append((_handshake(label, label.complement()), SystemState(gen, chm, chr2, eu2)))

    for label, chr2 in channel_offers(chr_, Direction.CHR):
        gen2 = cache.gen_accept(gen, label.complement())
        if gen2 is not None:
            steps.append((_handshake(label, label.complement()), SystemState(gen2, chm, chr2, eu)))

    return steps


class StateSummaries(Mapping[str, str]):
    """Annotations `s<i>` -> summary of the i-th explored state, rendered on lookup."""

    def __init__(self, order: list[SystemState]):
        self._order = order

    def __getitem__(self, key: str) -> str:
        if not key.startswith("s") or not key[1:].isdigit():
            raise KeyError(key)
        i = int(key[1:])
        if i >= len(self._order):
            raise KeyError(key)
        return self._order[i].summary()

    def __iter__(self) -> Iterator[str]:
        return (f"s{i}" for i in range(len(self._order)))

    def __len__(self) -> int:
        return len(self._order)


@dataclass
class Composition:
    lts: Lts
    monitor: InvariantMonitor

    @property
    def peaks(self) -> AckPeaks:
        m = self.monitor
        return AckPeaks(unacked=m.peak_unacked, ack=m.peak_ack, pending=m.peak_pending, maxlen=m.params.maxlen)


def explore(thread: ThreadHandle, cfg: CompositionConfig) -> Composition:
    """Breadth-first exploration from the initial system state; states are numbered in visit order."""
    params = cfg.protocol_params()
    monitor = InvariantMonitor(params)
    cache = StepCache(params)
    init = SystemState.initial(thread, params)
    index = {init: 0}
    order = [init]
    transitions: list[Transition] = []
    terminating = set()
    hidden = cfg.abstraction
    logger.info(
        f"Composing {thread.state} with maxlen={cfg.maxlen} capacities={cfg.capacity_msg}/{cfg.capacity_reply} "
        f"mode={cfg.mode.value} strategy={cfg.strategy}"
    )

    queue = deque([init])
    while queue:
        state = queue.popleft()
        monitor.observe(state.gen, state.chm, state.chr, state.eu)
        src = f"s{index[state]}"
        if state.terminated:
            terminating.add(src)
        try:
            steps = system_steps(state, params, cache)
        except ProtocolViolation as e:
            logger.error(f"Protocol violation in state {state.summary()}: {e}")
            raise
        for label, nxt in steps:
            nxt = settle(nxt)
            if nxt not in index:
                if len(order) >= cfg.state_bound:
                    logger.error(f"State bound {cfg.state_bound} exceeded while composing {thread.state}")
                    raise StateBoundExceeded(cfg.state_bound)
                index[nxt] = len(order)
                order.append(nxt)
                queue.append(nxt)
            if label.kind in hidden:
                label = TAU
            transitions.append(Transition(src, label, f"s{index[nxt]}"))

    lts = Lts(
        tuple(f"s{i}" for i in range(len(order))),
        "s0",
        tuple(transitions),
        frozenset(terminating),
        StateSummaries(order),
    )
    logger.info(f"Composed {len(lts.states)} states and {len(lts.transitions)} transitions")
    if monitor.exceeds_maxlen:
        logger.info(
            f"Acknowledgement counts reached {max(monitor.peak_unacked, monitor.peak_ack, monitor.peak_pending)} "
            f"with maxlen={cfg.maxlen}"
        )
    return Composition(lts, monitor)


def compose(thread: ThreadHandle, cfg: CompositionConfig) -> Lts:
    return explore(thread, cfg).lts


def explore_stats(lts: Lts, peaks: AckPeaks | None = None) -> ExploreStats:
    deadlocks = lts.deadlock_states()
    return ExploreStats(
        state_count=len(lts.states),
        transition_count=len(lts.transitions),
        deadlock_states=deadlocks,
        terminating_states=len(lts.terminating),
        protocol_deadlocks=inaction_free_deadlocks(lts),
        peaks=peaks,
    )


def witness_trace(lts: Lts, target: str) -> list[str]:
    """Shortest path to `target`, one `<label> : <component-state-summary>` line per step."""
    path = lts.shortest_path(target)
    if path is None:
        return []
    lines = [f"init : {lts.annotations.get(lts.initial, lts.initial)}"]
    for label, state in path:
        lines.append(f"{label} : {lts.annotations.get(state, state)}")
    return lines
