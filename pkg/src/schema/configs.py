"""
Pydantic schemas for run configurations.
"""

from typing import Literal, Optional

from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

from src.config import DEFAULT_STATE_BOUND
from src.services.labels import FALSE, TRUE, LabelKind
from src.services.protocol import GuardMode, ProtocolParams
from src.services.strategies import SelectionStrategy, parse_strategy


class CompositionConfig(BaseModel):
    """Parameters of the generator/channels/execution-unit composition."""
    model_config = ConfigDict(frozen=True)

    maxlen: int = Field(1, ge=0, description="Maximal run-ahead of the generator")
    capacity_msg: int = Field(1, ge=1, description="Capacity of the instruction message channel")
    capacity_reply: int = Field(1, ge=1, description="Capacity of the reply channel")
    mode: GuardMode = Field(GuardMode.SAFE, description="Receive guard of the generator")
    strategy: str = Field("breadth", description="breadth|prob50|prob95, optionally +wildcard")
    abstraction: frozenset[LabelKind] = Field(
        frozenset({LabelKind.J_ACT}), description="Label kinds renamed to tau"
    )
    state_bound: int = Field(DEFAULT_STATE_BOUND, ge=1, description="Exploration aborts beyond this many states")

    @field_validator("strategy")
    @classmethod
    def _known_strategy(cls, value: str) -> str:
        return parse_strategy(value).name

    @field_validator("abstraction")
    @classmethod
    def _no_tau(cls, value: frozenset[LabelKind]) -> frozenset[LabelKind]:
        if LabelKind.TAU in value:
            raise ValueError("tau cannot be abstracted")
        return value

    @property
    def selection(self) -> SelectionStrategy:
        return parse_strategy(self.strategy)

    @property
    def wildcard(self) -> bool:
        return self.selection.wildcard

    def protocol_params(self) -> ProtocolParams:
        return ProtocolParams(self.maxlen, self.mode, self.selection, self.capacity_msg, self.capacity_reply)


class EquivConfig(BaseModel):
    """How the two sides of the target equation are compared."""
    model_config = ConfigDict(frozen=True)

    lhs_abstraction: frozenset[LabelKind] = Field(frozenset({LabelKind.STP}))
    rhs_abstraction: frozenset[LabelKind] = Field(frozenset({LabelKind.J_ACT, LabelKind.STP}))
    rooted: bool = Field(True, description="Apply the root condition to the compared roots")
    tau_prefix: bool = Field(True, description="Prefix both sides with a fresh silent step")
    divergence_sensitive: bool = False

    @field_validator("lhs_abstraction", "rhs_abstraction")
    @classmethod
    def _no_tau(cls, value: frozenset[LabelKind]) -> frozenset[LabelKind]:
        if LabelKind.TAU in value:
            raise ValueError("abstraction sets contain label kinds, never tau")
        return value


class Environment(BaseModel):
    """Reply model of the services in a simulation."""
    model_config = ConfigDict(frozen=True)

    kind: Literal["all-true", "all-false", "fixed", "random", "prob"] = "all-true"
    sequence: str = Field("", description="Replies for kind 'fixed', e.g. TTF; cycled")

    @model_validator(mode="after")
    def _check_sequence(self) -> "Environment":
        if self.kind == "fixed":
            if not self.sequence or set(self.sequence) - {TRUE, FALSE}:
                raise ValueError("a fixed environment needs a nonempty sequence over T and F")
        return self

    @classmethod
    def parse(cls, text: str) -> "Environment":
        """`all-true`, `all-false`, `random`, `prob` or `fixed:TTF`."""
        kind, _, sequence = text.strip().partition(":")
        return cls(kind=kind.lower(), sequence=sequence.upper())

    def __str__(self) -> str:
        return f"fixed:{self.sequence}" if self.kind == "fixed" else self.kind


class SimConfig(BaseModel):
    """Latency, strategy and environment of one simulation run."""
    model_config = ConfigDict(frozen=True)

    maxlen: int = Field(0, ge=0)
    strategy: str = "breadth"
    latency_msg: int = Field(4, ge=0, description="Time from sending a message to its arrival")
    latency_reply: int = Field(4, ge=0, description="Time from sending a reply to its arrival")
    exec_time: int = Field(1, ge=1, description="Time the execution unit is busy per basic action")
    environment: Environment = Field(default_factory=Environment)
    seed: int = 0
    horizon: int = Field(10_000, gt=0)
    horizon_kind: Literal["steps", "events"] = "steps"
    capacity_msg: Optional[int] = Field(None, ge=1, description="Messages in flight; default maxlen+2")
    capacity_reply: Optional[int] = Field(None, ge=1, description="Replies in flight; default maxlen+2")

    @field_validator("strategy")
    @classmethod
    def _known_strategy(cls, value: str) -> str:
        return parse_strategy(value).name

    @property
    def selection(self) -> SelectionStrategy:
        return parse_strategy(self.strategy)

    @property
    def message_capacity(self) -> int:
        return self.capacity_msg if self.capacity_msg is not None else self.maxlen + 2

    @property
    def reply_capacity(self) -> int:
        return self.capacity_reply if self.capacity_reply is not None else self.maxlen + 2
