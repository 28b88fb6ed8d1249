import pytest

from src.services.bta import BasicAction, Mark
from src.services.labels import (
    I_ACT,
    J_ACT,
    STP,
    TAU,
    InstructionMessage,
    Label,
    LabelKind,
    gamma,
    parse_kinds,
)
from src.services.lts import Lts, inaction_free_deadlocks, tau_closure, visible_traces, weak_after

MSG = InstructionMessage(0, "T", BasicAction("f", "m"))


def test_gamma_channel_handshake():
    assert gamma(Label.snd_ch(1, MSG), Label.rcv_ch(1, MSG)) == J_ACT
    assert gamma(Label.rcv_ch(1, MSG), Label.snd_ch(1, MSG)) == J_ACT


def test_gamma_channel_mismatch():
    assert gamma(Label.snd_ch(1, MSG), Label.rcv_ch(2, MSG)) is None


def test_gamma_focus_handshake():
    assert gamma(Label.snd_f("f", "m"), Label.rcv_f("f", "m")) == I_ACT


def test_gamma_stp_never_communicates():
    assert gamma(STP, Label.rcv_ch(1, MSG)) is None
    assert gamma(STP, STP) is None


def test_gamma_keeps_reply_and_number_apart():
    assert gamma(Label.snd_ch(3, True), Label.rcv_ch(3, 1)) is None


def test_label_text():
    assert str(Label.snd_ch(1, MSG)) == "snd_1(<0,T,f.m>)"
    assert str(Label.rcv_f("f", False)) == "rcv_f(F)"
    assert str(Label.snd_f("f", "m")) == "snd_f(m)"
    assert str(TAU) == "tau"


def test_label_json_round_trip():
    for label in (Label.snd_ch(2, MSG), Label.rcv_ch(4, True), Label.snd_f("f", "m"), Label.action("a"), STP):
        assert Label.from_json(label.to_json()) == label


def test_stop_message_json():
    msg = InstructionMessage(1, "", Mark.STOP)
    assert InstructionMessage.from_json(msg.to_json()) == msg
    assert str(msg) == "<1,ε,stop>"


def test_parse_kinds():
    assert parse_kinds("jact,stp") == frozenset({LabelKind.J_ACT, LabelKind.STP})
    assert parse_kinds("") == frozenset()
    with pytest.raises(ValueError):
        parse_kinds("tau")


def a(name):
    return Label.action(name)


def test_lts_rejects_foreign_states():
    with pytest.raises(ValueError):
        Lts(("p",), "p", (), frozenset({"q"}))


def test_deadlock_states():
    lts = Lts.build("p", [("p", a("a"), "q"), ("p", STP, "r")], terminating=["r"])
    assert lts.deadlock_states() == ["q"]


def test_json_round_trip_preserves_structure():
    lts = Lts.build("p", [("p", a("a"), "q"), ("q", TAU, "p"), ("p", STP, "r")], terminating=["r"])
    assert Lts.loads(lts.dumps()) == lts


def test_hide_and_closure():
    lts = Lts.build("p", [("p", J_ACT, "q"), ("q", a("a"), "r")]).hide({LabelKind.J_ACT})
    assert tau_closure(lts, ["p"]) == frozenset({"p", "q"})
    assert weak_after(lts, tau_closure(lts, ["p"]), a("a")) == frozenset({"r"})


def test_visible_traces_elide_tau():
    lts = Lts.build("p", [("p", a("a"), "q"), ("q", TAU, "r"), ("r", a("b"), "s")])
    assert visible_traces(lts, 3) == {(), ("a",), ("a", "b")}


def test_reachable_drops_orphans():
    lts = Lts(("p", "q", "x"), "p", Lts.build("p", [("p", a("a"), "q")]).transitions)
    assert lts.reachable().states == ("p", "q")


def test_renumber_is_breadth_first():
    lts = Lts.build("x", [("x", a("b"), "z"), ("x", a("a"), "y")]).renumber()
    assert lts.states == ("s0", "s1", "s2")
    assert [(t.source, str(t.label), t.target) for t in lts.transitions] == [
        ("s0", "a", "s1"),
        ("s0", "b", "s2"),
    ]


def test_inaction_free_deadlocks_skip_states_after_i():
    lts = Lts.build("p", [("p", a("a"), "q"), ("p", I_ACT, "d")])
    assert inaction_free_deadlocks(lts) == ["q"]
