"""
Discrete-event simulation of the protocol with transmission and execution
latencies, measuring how busy the execution unit is kept.

Time is logical and integral. Generator computation is free; a message is in
flight for `latency_msg`, a reply for `latency_reply`, and each basic action
keeps the execution unit busy for `exec_time`.
"""

import heapq
import itertools
import logging
from dataclasses import dataclass, field, replace
from enum import IntEnum
from typing import Iterable, Sequence

import numpy as np
import pandas as pd

from src.schema.configs import Environment, SimConfig
from src.schema.results import Metrics
from src.services.bta import BasicAction, Mark, ThreadHandle
from src.services.labels import I_ACT, STP, InstructionMessage, Label, symbol
from src.services.protocol import (
    ExecUnitState,
    GeneratorState,
    ProtocolViolation,
    Terminal,
    executable,
    message_for,
    updcm_outcome,
    updcr,
    updpm,
    updpr_outcome,
)
from src.services.strategies import select

logger = logging.getLogger(__name__)

CSV_COLUMNS = [
    "thread", "maxlen", "strategy", "seed", "env",
    "busy", "idle", "total", "utilization", "msgs", "replies", "discarded",
]


class DegenerateRunError(RuntimeError):
    """The horizon ran out before the execution unit executed anything."""


class EventKind(IntEnum):
    # Tie-breaking order at equal timestamps.
    MESSAGE_ARRIVAL = 0
    EXECUTION_DONE = 1
    REPLY_ARRIVAL = 2


class ReplyModel:
    """Replies of the services, fully determined by the environment and seed."""

    def __init__(self, env: Environment, seed: int, thread: ThreadHandle):
        self.env = env
        self.spec = thread.spec
        self.rng = np.random.default_rng(seed)
        self.position = 0

    def reply(self, action: BasicAction) -> bool:
        kind = self.env.kind
        if kind == "all-true":
            return True
        if kind == "all-false":
            return False
        if kind == "fixed":
            value = self.env.sequence[self.position % len(self.env.sequence)] == "T"
            self.position += 1
            return value
        threshold = 0.5 if kind == "random" else self.spec.probability(action)
        return bool(self.rng.random() < threshold)


@dataclass
class SimulationResult:
    metrics: Metrics
    events: list[str] = field(default_factory=list)
    trace: list[Label] = field(default_factory=list)

    def event_log(self) -> str:
        return "\n".join(self.events) + ("\n" if self.events else "")


class Simulator:
    """One run of the event loop over the protocol's update functions."""

    def __init__(self, thread: ThreadHandle, cfg: SimConfig):
        self.cfg = cfg
        self.strategy = cfg.selection
        self.replies = ReplyModel(cfg.environment, cfg.seed, thread)
        self.gen: GeneratorState | Terminal = GeneratorState.initial(thread)
        self.eu = ExecUnitState()
        self.queue: list[tuple[int, int, int, object]] = []
        self.seq = itertools.count()
        self.now = 0
        self.busy = 0
        self.msgs_in_flight = 0
        self.replies_in_flight = 0
        self.outcome: str | None = None
        self.counts = {"msgs": 0, "replies": 0, "discarded": 0, "steps": 0, "events": 0}
        self.events: list[str] = []
        self.trace: list[Label] = []

    def log(self, text: str):
        line = f"{self.now:>8} {text}"
        self.events.append(line)
        logger.debug(line)

    def push(self, delay: int, kind: EventKind, payload):
        heapq.heappush(self.queue, (self.now + delay, int(kind), next(self.seq), payload))

    def try_send(self):
        while isinstance(self.gen, GeneratorState) and self.msgs_in_flight < self.cfg.message_capacity:
            if not self.gen.frontier:
                self.gen = Terminal.GEN_DONE
                self.log("generator finished")
                return
            choices = select(self.gen.frontier, self.strategy, self.cfg.maxlen)
            if not choices:
                return
            entry = choices[0]
            msg = message_for(entry, self.gen)
            self.gen = updpm(entry, self.gen, self.strategy.wildcard)
            self.msgs_in_flight += 1
            self.counts["msgs"] += 1
            self.push(self.cfg.latency_msg, EventKind.MESSAGE_ARRIVAL, msg)
            self.log(f"send {msg}")

    def try_execute(self):
        eu = self.eu
        if self.outcome is not None or not eu.idle or eu.reply is not None:
            return
        instr = executable(eu)
        if instr is None:
            return
        if instr is Mark.STOP:
            self.trace.append(STP)
            self.outcome = "terminated"
            self.log("execute stop")
            return
        if instr is Mark.DEAD:
            self.trace.append(I_ACT)
            self.outcome = "dead"
            self.log("execute dead")
            return
        self.eu = replace(eu, awaiting=instr.focus)
        self.trace.append(Label.snd_f(instr.focus, instr.method))
        self.push(self.cfg.exec_time, EventKind.EXECUTION_DONE, instr)
        self.log(f"execute {instr}")

    def ship_reply(self):
        if self.eu.reply is None or self.replies_in_flight >= self.cfg.reply_capacity:
            return
        reply = self.eu.reply
        outcome = updpr_outcome(reply, self.eu, self.cfg.maxlen + 1)
        self.eu = outcome.state
        self.counts["discarded"] += outcome.discarded
        self.replies_in_flight += 1
        self.counts["replies"] += 1
        self.push(self.cfg.latency_reply, EventKind.REPLY_ARRIVAL, reply)
        self.log(f"reply {symbol(reply)}")
        self.try_execute()

    def on_message(self, msg: InstructionMessage):
        self.msgs_in_flight -= 1
        outcome = updcm_outcome(msg, self.eu)
        self.eu = outcome.state
        self.counts["discarded"] += outcome.discarded
        self.log(f"arrive {msg}{' (discarded)' if outcome.discarded else ''}")
        self.try_execute()
        self.try_send()

    def on_execution_done(self, instr: BasicAction):
        self.busy += self.cfg.exec_time
        self.counts["steps"] += 1
        reply = self.replies.reply(instr)
        self.trace.append(Label.rcv_f(instr.focus, reply))
        self.eu = replace(self.eu, reply=reply)
        self.log(f"done {instr} -> {symbol(reply)}")
        self.ship_reply()

    def on_reply(self, reply: bool):
        self.replies_in_flight -= 1
        if isinstance(self.gen, GeneratorState):
            self.gen = updcr(reply, self.gen, self.cfg.maxlen + 1)
        self.log(f"consume {symbol(reply)}")
        self.ship_reply()
        self.try_send()

    def horizon_reached(self) -> bool:
        used = self.counts["steps"] if self.cfg.horizon_kind == "steps" else self.counts["events"]
        return used >= self.cfg.horizon

    def run(self) -> SimulationResult:
        self.try_send()
        while self.outcome is None:
            if self.horizon_reached():
                self.outcome = "horizon"
                break
            if not self.queue:
                self.outcome = "stalled"
                break
            time, kind, _, payload = heapq.heappop(self.queue)
            self.now = time
            self.counts["events"] += 1
            if kind == EventKind.MESSAGE_ARRIVAL:
                self.on_message(payload)
            elif kind == EventKind.EXECUTION_DONE:
                self.on_execution_done(payload)
            else:
                self.on_reply(payload)

        if self.outcome in ("horizon", "stalled") and self.counts["steps"] == 0:
            raise DegenerateRunError(f"run ended ({self.outcome}) at time {self.now} before any instruction executed")
        metrics = Metrics(
            busy=self.busy,
            idle=self.now - self.busy,
            total=self.now,
            messages_sent=self.counts["msgs"],
            replies_sent=self.counts["replies"],
            discarded=self.counts["discarded"],
            steps=self.counts["steps"],
            outcome=self.outcome,
        )
        logger.info(
            f"Simulated maxlen={self.cfg.maxlen} strategy={self.cfg.strategy}: {metrics.outcome} at {metrics.total}, "
            f"utilization {metrics.utilization:.3f}"
        )
        return SimulationResult(metrics, self.events, self.trace)


def simulate(thread: ThreadHandle, cfg: SimConfig) -> SimulationResult:
    try:
        return Simulator(thread, cfg).run()
    except ProtocolViolation as e:
        logger.error(f"Protocol violation during simulation: {e}")
        raise


def metrics_row(thread_name: str, cfg: SimConfig, metrics: Metrics) -> dict:
    return {
        "thread": thread_name,
        "maxlen": cfg.maxlen,
        "strategy": cfg.strategy,
        "seed": cfg.seed,
        "env": str(cfg.environment),
        "busy": metrics.busy,
        "idle": metrics.idle,
        "total": metrics.total,
        "utilization": round(metrics.utilization, 6),
        "msgs": metrics.messages_sent,
        "replies": metrics.replies_sent,
        "discarded": metrics.discarded,
    }


def sweep(
    thread: ThreadHandle,
    base_cfg: SimConfig,
    maxlens: Iterable[int],
    strategies: Sequence[str],
    seeds: Sequence[int] | None = None,
    thread_name: str | None = None,
) -> pd.DataFrame:
    """One row per (maxlen, strategy, seed), in that nesting order."""
    name = thread_name or thread.state
    seeds = list(seeds) if seeds else [base_cfg.seed]
    rows = []
    for maxlen, strategy, seed in itertools.product(list(maxlens), list(strategies), seeds):
        cfg = base_cfg.model_copy(update={"maxlen": maxlen, "strategy": strategy, "seed": seed})
        cfg = SimConfig.model_validate(cfg.model_dump())
        rows.append(metrics_row(name, cfg, simulate(thread, cfg).metrics))
    logger.info(f"Sweep of {name} produced {len(rows)} rows")
    return pd.DataFrame(rows, columns=CSV_COLUMNS)


def to_csv(table: pd.DataFrame) -> str:
    return table.to_csv(index=False, lineterminator="\n")
