"""
Action labels shared by the extraction side and the protocol side, plus the
instruction message payload carried on channels 1 and 2.
"""

from dataclasses import dataclass
from enum import Enum
from typing import Any

from src.services.bta import ExtAction, parse_ext_action

TRUE = "T"
FALSE = "F"
STAR = "*"

# Reply sequences are strings over T, F and * (the wildcard).
ReplySeq = str


def symbol(reply: bool) -> str:
    return TRUE if reply else FALSE


def matches(sym: str, reply: bool) -> bool:
    return sym == STAR or sym == symbol(reply)


def render_seq(seq: ReplySeq) -> str:
    return seq or "ε"


@dataclass(frozen=True, order=True, slots=True)
class InstructionMessage:
    """(ack, prefix, instr): acknowledges `ack` replies; run `instr` after replies `prefix`."""
    ack: int
    prefix: ReplySeq
    instr: ExtAction

    def __str__(self) -> str:
        return f"<{self.ack},{render_seq(self.prefix)},{self.instr}>"

    def to_json(self) -> dict:
        return {"ack": self.ack, "prefix": self.prefix, "instr": str(self.instr)}

    @classmethod
    def from_json(cls, data: dict) -> "InstructionMessage":
        return cls(int(data["ack"]), data["prefix"], parse_ext_action(data["instr"]))


class LabelKind(str, Enum):
    SND_CH = "snd_ch"
    RCV_CH = "rcv_ch"
    SND_F = "snd_f"
    RCV_F = "rcv_f"
    STP = "stp"
    I_ACT = "i"
    J_ACT = "j"
    TAU = "tau"
    ACT = "act"


# Names accepted on the command line for abstraction sets.
KIND_ALIASES = {
    "stp": LabelKind.STP,
    "jact": LabelKind.J_ACT,
    "j": LabelKind.J_ACT,
    "iact": LabelKind.I_ACT,
    "i": LabelKind.I_ACT,
    "snd_f": LabelKind.SND_F,
    "rcv_f": LabelKind.RCV_F,
    "act": LabelKind.ACT,
}

# Encapsulated on channels 1-4.
ENCAPSULATED = frozenset({LabelKind.SND_CH, LabelKind.RCV_CH})


def parse_kinds(text: str) -> frozenset[LabelKind]:
    kinds = set()
    for part in filter(None, (p.strip().lower() for p in text.split(","))):
        if part not in KIND_ALIASES:
            raise ValueError(f"unknown label kind '{part}'")
        kinds.add(KIND_ALIASES[part])
    return frozenset(kinds)


@dataclass(frozen=True, slots=True)
class Label:
    """
    A transition label.

    `port` is the channel number for SND-CH/RCV-CH, the focus for SND-F/RCV-F
    and the action name for ACT. `payload` is an InstructionMessage (channels
    1, 2), a reply (channels 3, 4 and RCV-F) or a method name (SND-F).
    """
    kind: LabelKind
    port: int | str | None = None
    payload: Any = None

    @classmethod
    def snd_ch(cls, channel: int, payload) -> "Label":
        return cls(LabelKind.SND_CH, channel, payload)

    @classmethod
    def rcv_ch(cls, channel: int, payload) -> "Label":
        return cls(LabelKind.RCV_CH, channel, payload)

    @classmethod
    def snd_f(cls, focus: str, payload: str | bool) -> "Label":
        return cls(LabelKind.SND_F, focus, payload)

    @classmethod
    def rcv_f(cls, focus: str, payload: str | bool) -> "Label":
        return cls(LabelKind.RCV_F, focus, payload)

    @classmethod
    def action(cls, name: str) -> "Label":
        return cls(LabelKind.ACT, name)

    @property
    def is_tau(self) -> bool:
        return self.kind is LabelKind.TAU

    def complement(self) -> "Label":
        """The receive matching a send and vice versa."""
        flip = {
            LabelKind.SND_CH: LabelKind.RCV_CH,
            LabelKind.RCV_CH: LabelKind.SND_CH,
            LabelKind.SND_F: LabelKind.RCV_F,
            LabelKind.RCV_F: LabelKind.SND_F,
        }
        if self.kind not in flip:
            raise ValueError(f"{self} has no complement")
        return Label(flip[self.kind], self.port, self.payload)

    def __str__(self) -> str:
        kind = self.kind
        if kind in (LabelKind.SND_CH, LabelKind.RCV_CH, LabelKind.SND_F, LabelKind.RCV_F):
            verb = "snd" if kind in (LabelKind.SND_CH, LabelKind.SND_F) else "rcv"
            payload = symbol(self.payload) if isinstance(self.payload, bool) else str(self.payload)
            return f"{verb}_{self.port}({payload})"
        if kind is LabelKind.ACT:
            return str(self.port)
        return kind.value

    def to_json(self) -> dict:
        data: dict = {"kind": self.kind.value}
        if self.kind in (LabelKind.SND_CH, LabelKind.RCV_CH):
            data["channel"] = self.port
            data["payload"] = self.payload.to_json() if isinstance(self.payload, InstructionMessage) else self.payload
        elif self.kind in (LabelKind.SND_F, LabelKind.RCV_F):
            data["focus"] = self.port
            if isinstance(self.payload, bool):
                data["reply"] = self.payload
            else:
                data["method"] = self.payload
        elif self.kind is LabelKind.ACT:
            data["name"] = self.port
        return data

    @classmethod
    def from_json(cls, data: dict) -> "Label":
        kind = LabelKind(data["kind"])
        if kind in (LabelKind.SND_CH, LabelKind.RCV_CH):
            payload = data["payload"]
            if isinstance(payload, dict):
                payload = InstructionMessage.from_json(payload)
            return cls(kind, int(data["channel"]), payload)
        if kind in (LabelKind.SND_F, LabelKind.RCV_F):
            payload = data["reply"] if "reply" in data else data["method"]
            return cls(kind, data["focus"], payload)
        if kind is LabelKind.ACT:
            return cls(kind, data["name"])
        return cls(kind)


TAU = Label(LabelKind.TAU)
STP = Label(LabelKind.STP)
I_ACT = Label(LabelKind.I_ACT)
J_ACT = Label(LabelKind.J_ACT)


def gamma(a: Label, b: Label) -> Label | None:
    """
    Communication function: a send and the receive of the same payload on the
    same port communicate. Channels yield j, foci yield i; everything else is
    δ (None). Commutative.
    """
    pairs = {
        (LabelKind.SND_CH, LabelKind.RCV_CH): J_ACT,
        (LabelKind.SND_F, LabelKind.RCV_F): I_ACT,
    }
    for first, second in ((a, b), (b, a)):
        result = pairs.get((first.kind, second.kind))
        if result is not None and first.port == second.port and first.payload == second.payload:
            # bool payloads must not match ints that compare equal
            if type(first.payload) is type(second.payload):
                return result
    return None
