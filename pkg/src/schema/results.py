"""
Pydantic schemas for exploration statistics, verdicts and simulation metrics.
"""

import json
from typing import Literal, Optional

from pydantic import BaseModel, Field, model_validator

Obligation = Literal["termination", "deadlock", "missing-branch", "branching", "root", "divergence"]


class AckPeaks(BaseModel):
    """Largest acknowledgement counts observed during an exploration."""
    unacked: int = 0
    ack: int = 0
    pending: int = 0
    maxlen: int = 0

    @property
    def exceeds_maxlen(self) -> bool:
        return max(self.unacked, self.ack, self.pending) > self.maxlen


class ExploreStats(BaseModel):
    state_count: int
    transition_count: int
    deadlock_states: list[str] = Field(default_factory=list)
    terminating_states: int = 0
    protocol_deadlocks: list[str] = Field(default_factory=list, description="Deadlocks reachable without i")
    peaks: Optional[AckPeaks] = None

    def render(self) -> str:
        lines = [
            f"states: {self.state_count}",
            f"transitions: {self.transition_count}",
            f"terminating states: {self.terminating_states}",
            f"deadlock states: {len(self.deadlock_states)}",
            f"protocol deadlocks: {len(self.protocol_deadlocks)}",
        ]
        if self.peaks is not None:
            note = " (exceeds [0, maxlen])" if self.peaks.exceeds_maxlen else ""
            lines.append(
                f"ack peaks: unacked={self.peaks.unacked} ack={self.peaks.ack} "
                f"pending={self.peaks.pending}{note}"
            )
        return "\n".join(lines)


class Counterexample(BaseModel):
    """
    A visible trace after which one side reaches a state the other side cannot
    match. `basis` says how the mismatch is shown: weak ready sets and
    termination (`readiness`), or the final branching partition (`partition`).
    """
    trace: list[str] = Field(default_factory=list)
    obligation: Obligation
    side: Literal["lhs", "rhs"] = "lhs"
    witness: str = ""
    detail: str = ""
    basis: Literal["readiness", "partition"] = "readiness"
    certified: bool = False

    def render(self) -> str:
        trace = " · ".join(self.trace) if self.trace else "ε"
        return f"trace: {trace}\nobligation: {self.obligation}\n{self.side} state {self.witness}: {self.detail}"


class EquivVerdict(BaseModel):
    equivalent: bool
    counterexample: Optional[Counterexample] = None
    lhs_states: int = 0
    rhs_states: int = 0
    blocks: int = 0

    @model_validator(mode="after")
    def _counterexample_iff_inequivalent(self) -> "EquivVerdict":
        if self.equivalent == (self.counterexample is not None):
            raise ValueError("a counterexample accompanies exactly the negative verdicts")
        return self

    def render(self) -> str:
        if self.equivalent:
            return "equivalent"
        return "not equivalent\n" + self.counterexample.render()

    def to_json(self) -> str:
        data = {
            "equivalent": self.equivalent,
            "counterexample": None if self.counterexample is None else self.counterexample.trace,
        }
        if self.counterexample is not None:
            data["obligation"] = self.counterexample.obligation
        return json.dumps(data)


class Metrics(BaseModel):
    """Utilization counters of one simulation run."""
    busy: int = 0
    idle: int = 0
    total: int = 0
    messages_sent: int = 0
    replies_sent: int = 0
    discarded: int = 0
    steps: int = 0
    outcome: Literal["terminated", "dead", "horizon", "stalled"] = "horizon"

    @model_validator(mode="after")
    def _accounting(self) -> "Metrics":
        if self.busy + self.idle != self.total:
            raise ValueError(f"busy {self.busy} + idle {self.idle} != total {self.total}")
        if self.discarded > self.messages_sent:
            raise ValueError("more discarded than sent messages")
        return self

    @property
    def utilization(self) -> float:
        return self.busy / self.total if self.total else 0.0
