import pytest

from src.services.bta import BasicAction, Mark
from src.services.labels import I_ACT, J_ACT, STP, InstructionMessage, Label
from src.services.protocol import (
    ChannelState,
    Direction,
    ExecUnitState,
    GeneratorState,
    GuardMode,
    InvariantMonitor,
    ProtocolParams,
    ProtocolViolation,
    Terminal,
    channel_steps,
    enable,
    eu_accept,
    eu_offers,
    gen_accept,
    gen_steps,
    message_universe,
    settle_exec_unit,
    settle_messages,
    settle_replies,
    updcm,
    updcm_outcome,
    updcr,
    updpm,
    updpr,
)
from src.services.strategies import AnnotatedEntry, parse_strategy
from tests.conftest import thread

FM = BasicAction("f", "m")
A = BasicAction("f", "a")
B = BasicAction("f", "b")
SAFE = ProtocolParams(maxlen=1)
STRICT = ProtocolParams(maxlen=1, mode=GuardMode.STRICT)


@pytest.fixture
def spec():
    return thread("X = f.m ? Y : Z\nY = S\nZ = D\nW = f.m ? Y : Y\nP = S\nQ = S").spec


def e(prefix, t, actions=None):
    return AnnotatedEntry(prefix, actions if actions is not None else (FM,) * len(prefix), t)


def gen(unacked, *entries):
    return GeneratorState(unacked, frozenset(entries))


# --- generator updates ----------------------------------------------------

def test_updpm_splits_on_both_replies(spec):
    x, y, z = spec.handle("X"), spec.handle("Y"), spec.handle("Z")
    assert updpm(e("", x), gen(0, e("", x))) == gen(0, e("T", y), e("F", z))


def test_updpm_of_stop_empties_frontier_and_resets(spec):
    y = spec.handle("Y")
    assert updpm(e("", y), gen(1, e("", y))) == gen(0)


def test_updpm_wildcard_collapses_identical_branches(spec):
    w, y = spec.handle("W"), spec.handle("Y")
    assert updpm(e("", w), gen(0, e("", w)), wildcard=True) == gen(0, e("*", y))


def test_updpm_rejects_foreign_entry(spec):
    with pytest.raises(ProtocolViolation):
        updpm(e("", spec.handle("X")), gen(0))


def test_updcr_reroots_matching_entry(spec):
    y, z = spec.handle("Y"), spec.handle("Z")
    assert updcr(True, gen(0, e("T", y), e("F", z))) == gen(1, e("", y, ()))


def test_updcr_prunes_everything(spec):
    p, q = spec.handle("P"), spec.handle("Q")
    assert updcr(False, gen(0, e("TT", p), e("TF", q))) == gen(1)


def test_updcr_wildcard_matches_either_reply(spec):
    y = spec.handle("Y")
    assert updcr(True, gen(0, e("*", y))) == gen(1, e("", y, ()))


def test_updcr_bound(spec):
    with pytest.raises(ProtocolViolation):
        updcr(True, gen(2), bound=2)


# --- execution unit updates -----------------------------------------------

def test_updcm_strips_acknowledged_replies():
    state = updcm(InstructionMessage(1, "TF", A), ExecUnitState("TT"))
    assert state.pending_acks == 1
    assert state.store == frozenset({("F", A)})


def test_updcm_without_acknowledgement():
    state = updcm(InstructionMessage(0, "", Mark.STOP), ExecUnitState())
    assert state.pending_acks == 0
    assert state.store == frozenset({("", Mark.STOP)})


def test_updcm_strips_whole_prefix():
    # The unacknowledged reply stays pending until a message acknowledges it.
    state = updcm(InstructionMessage(0, "T", A), ExecUnitState("T"))
    assert state.pending_acks == 1
    assert state.store == frozenset({("", A)})


def test_updcm_discards_dead_speculation():
    outcome = updcm_outcome(InstructionMessage(0, "T", A), ExecUnitState("F"))
    assert outcome.discarded == 1
    assert outcome.state == ExecUnitState("F")


def test_updcm_never_strips_past_prefix_end():
    with pytest.raises(ProtocolViolation):
        updcm(InstructionMessage(0, "T", A), ExecUnitState("TT"))


def test_updcm_rejects_overacknowledgement():
    with pytest.raises(ProtocolViolation):
        updcm(InstructionMessage(2, "", A), ExecUnitState("T"))


def test_updcm_rejects_second_executable_instruction():
    with pytest.raises(ProtocolViolation):
        updcm(InstructionMessage(0, "", B), ExecUnitState("", frozenset({("", A)})))


def test_updpr_keeps_matching_branch():
    state = updpr(True, ExecUnitState("", frozenset({("T", A), ("F", B)})))
    assert state.pending_acks == 1
    assert state.store == frozenset({("", A)})


def test_updpr_drops_executed_entry():
    state = updpr(False, ExecUnitState("", frozenset({("", A)})))
    assert state.pending_acks == 1
    assert state.store == frozenset()


def test_updpr_wildcard():
    state = updpr(True, ExecUnitState("", frozenset({("*T", A)})))
    assert state.store == frozenset({("T", A)})


def test_updpr_bound():
    with pytest.raises(ProtocolViolation):
        updpr(True, ExecUnitState("TT"), bound=2)


@pytest.mark.parametrize(
    "instr, store, expected",
    [
        (A, {("", A)}, True),
        (A, {("T", A)}, False),
        (Mark.STOP, set(), False),
    ],
)
def test_enable(instr, store, expected):
    assert enable(instr, store) is expected


# --- generator steps -------------------------------------------------------

@pytest.mark.parametrize("params", [SAFE, STRICT])
def test_gen_initial_steps(spec, params):
    steps = gen_steps(GeneratorState.initial(spec.handle("X")), params)
    labels = [label for label, _ in steps]
    assert labels == [
        Label.snd_ch(1, InstructionMessage(0, "", FM)),
        Label.rcv_ch(4, True),
        Label.rcv_ch(4, False),
    ]


def test_gen_strict_deadlocks_beyond_run_ahead(spec):
    state = gen(0, e("T", spec.handle("Y")), e("F", spec.handle("Z")))
    assert gen_steps(state, ProtocolParams(maxlen=0, mode=GuardMode.STRICT)) == []
    assert len(gen_steps(state, ProtocolParams(maxlen=0))) == 2


def test_gen_empty_frontier_finishes():
    assert gen_steps(gen(3), SAFE) == [(J_ACT, Terminal.GEN_DONE)]


def test_finished_generator_drains_replies_in_safe_mode():
    label = Label.rcv_ch(4, True)
    assert gen_accept(Terminal.GEN_DONE, label, SAFE) is Terminal.GEN_DONE
    assert gen_accept(Terminal.GEN_DONE, label, STRICT) is None


def test_strict_steps_are_safe_steps(spec):
    state = gen(0, e("T", spec.handle("Y")), e("F", spec.handle("Z")))
    for maxlen in (0, 1, 2):
        strict = gen_steps(state, ProtocolParams(maxlen=maxlen, mode=GuardMode.STRICT))
        safe = gen_steps(state, ProtocolParams(maxlen=maxlen))
        assert all(step in safe for step in strict)


# --- execution unit steps --------------------------------------------------

def test_eu_dispatches_basic_action():
    steps = eu_offers(ExecUnitState("", frozenset({("", FM)})), SAFE)
    assert (Label.snd_f("f", "m"), ExecUnitState("", frozenset({("", FM)}), awaiting="f")) in steps


def test_eu_stop_and_dead():
    assert eu_offers(ExecUnitState("", frozenset({("", Mark.STOP)})), SAFE) == [(STP, Terminal.EU_DONE)]
    assert eu_offers(ExecUnitState("", frozenset({("", Mark.DEAD)})), SAFE) == [(I_ACT, Terminal.EU_DEAD)]


def test_eu_reply_cycle():
    awaiting = ExecUnitState("", frozenset({("", FM), ("T", A)}), awaiting="f")
    (label, replying), _ = eu_offers(awaiting, SAFE)
    assert label == Label.rcv_f("f", True)
    [(sent, idle)] = eu_offers(replying, SAFE)
    assert sent == Label.snd_ch(3, True)
    assert idle == ExecUnitState("T", frozenset({("", A)}))


def test_eu_accepts_messages_while_awaiting_but_not_while_replying():
    msg = Label.rcv_ch(2, InstructionMessage(0, "T", A))
    awaiting = ExecUnitState("", frozenset({("", FM)}), awaiting="f")
    assert eu_accept(awaiting, msg).store == frozenset({("", FM), ("T", A)})
    assert eu_accept(ExecUnitState("", frozenset(), awaiting="f", reply=True), msg) is None
    assert eu_accept(Terminal.EU_DONE, msg) is None


# --- channels --------------------------------------------------------------

D1 = InstructionMessage(0, "", FM)
D2 = InstructionMessage(0, "T", FM)


def test_empty_channel_only_receives():
    steps = channel_steps(ChannelState(1), Direction.CHM, [D1, D2])
    assert [label for label, _ in steps] == [Label.rcv_ch(1, D1), Label.rcv_ch(1, D2)]


def test_full_channel_only_sends():
    steps = channel_steps(ChannelState(1, (D1,)), Direction.CHM, [D1, D2])
    assert steps == [(Label.snd_ch(2, D1), ChannelState(1))]


def test_larger_channel_is_fifo():
    steps = channel_steps(ChannelState(2, (D1,)), Direction.CHM, [D2])
    assert steps == [
        (Label.snd_ch(2, D1), ChannelState(2)),
        (Label.rcv_ch(1, D2), ChannelState(2, (D1, D2))),
    ]


def test_reply_channel_ports():
    steps = channel_steps(ChannelState(1, (True,)), Direction.CHR, [False])
    assert steps == [(Label.snd_ch(4, True), ChannelState(1))]


def test_channel_over_capacity():
    with pytest.raises(ProtocolViolation):
        ChannelState(1, (D1, D2))


def test_message_universe_size():
    assert len(message_universe([FM], SAFE)) == 3 * 3 * 3
    wild = ProtocolParams(maxlen=1, strategy=parse_strategy("breadth+wildcard"))
    assert len(message_universe([FM], wild)) == 3 * 4 * 3


# --- reachable-state invariants --------------------------------------------

def test_monitor_accepts_consistent_state(spec):
    monitor = InvariantMonitor(SAFE)
    state = gen(1, e("", spec.handle("Y"), ()))
    monitor.observe(state, ChannelState(1), ChannelState(1), ExecUnitState("T"))
    assert monitor.checked == 1
    assert monitor.violations == []


def test_monitor_rejects_comparable_prefixes(spec):
    state = gen(0, e("", spec.handle("X"), ()), e("T", spec.handle("Y")))
    with pytest.raises(ProtocolViolation):
        InvariantMonitor(SAFE).observe(state, ChannelState(1), ChannelState(1), ExecUnitState())


def test_monitor_checks_reply_conservation(spec):
    state = gen(0, e("", spec.handle("Y"), ()))
    monitor = InvariantMonitor(SAFE)
    with pytest.raises(ProtocolViolation):
        monitor.observe(state, ChannelState(1), ChannelState(1), ExecUnitState("T"))
    assert monitor.violations


def test_monitor_finds_comparable_prefixes_among_many(spec):
    y = spec.handle("Y")
    state = gen(0, e("F", y), e("FF", y), e("T", y), e("TT", y))
    with pytest.raises(ProtocolViolation, match="comparable"):
        InvariantMonitor(ProtocolParams(maxlen=2)).observe(state, ChannelState(1), ChannelState(1), ExecUnitState())


def test_monitor_counts_repeated_components(spec):
    monitor = InvariantMonitor(SAFE)
    state = gen(1, e("", spec.handle("Y"), ()))
    for _ in range(3):
        monitor.observe(state, ChannelState(1), ChannelState(1), ExecUnitState("T"))
    assert monitor.checked == 3
    assert monitor.peak_unacked == 1
    assert monitor.violations == []


# --- canonical states -----------------------------------------------------

def test_settle_replaces_decided_discards():
    eu = ExecUnitState("T")
    live, dead = InstructionMessage(0, "T", FM), InstructionMessage(0, "FT", FM)
    chm = ChannelState(3, (live, dead))
    settled = settle_messages(chm, eu)
    assert settled.buffer == (live, InstructionMessage(0, "F", Mark.DEAD))
    for original, canonical in zip(chm.buffer, settled.buffer):
        assert updcm_outcome(canonical, eu) == updcm_outcome(original, eu)


def test_settle_follows_acks():
    eu = ExecUnitState("TF")
    sees_f = InstructionMessage(1, "F", FM)
    assert settle_messages(ChannelState(2, (sees_f,)), eu).buffer == (sees_f,)
    contradicted = InstructionMessage(1, "TT", FM)
    assert settle_messages(ChannelState(2, (contradicted,)), eu).buffer == (InstructionMessage(1, "T", Mark.DEAD),)
    overdrawn = InstructionMessage(3, "T", FM)
    chm = ChannelState(1, (overdrawn,))
    assert settle_messages(chm, eu) is chm


def test_settle_keeps_live_messages_and_empty_channels():
    chm = ChannelState(2, (InstructionMessage(0, "*T", FM),))
    assert settle_messages(chm, ExecUnitState("F")) is chm
    empty = ChannelState(1)
    assert settle_messages(empty, ExecUnitState("T")) is empty


def test_settle_uses_unshipped_reply():
    eu = ExecUnitState("", frozenset({("", FM), ("T", A), ("F", B)}), awaiting="f", reply=True)
    settled = settle_exec_unit(eu)
    assert settled.store == frozenset({("", FM), ("T", A)})
    assert updpr(True, settled) == updpr(True, eu)
    assert settle_exec_unit(ExecUnitState("", frozenset({("F", B)}), awaiting="f")).store == frozenset({("F", B)})
    chm = ChannelState(1, (InstructionMessage(0, "F", A),))
    assert settle_messages(chm, eu).buffer == (InstructionMessage(0, "F", Mark.DEAD),)


def test_settle_after_termination():
    chm = ChannelState(2, (InstructionMessage(1, "T", FM), InstructionMessage(0, "", Mark.STOP)))
    assert settle_messages(chm, Terminal.EU_DONE).buffer == (
        InstructionMessage(1, "", Mark.DEAD),
        InstructionMessage(0, "", Mark.DEAD),
    )
    replies = ChannelState(2, (False, True))
    assert settle_replies(replies, Terminal.GEN_DONE).buffer == (True, True)
    assert settle_replies(replies, gen(0)) is replies


def test_params_validation():
    with pytest.raises(ValueError):
        ProtocolParams(maxlen=-1)
    with pytest.raises(ValueError):
        ProtocolParams(capacity_msg=0)
