"""
Process extraction: the reference transition system of a regular thread.
"""

import logging

from src.services.bta import Constant, Postcond, ThreadHandle, reachable_names
from src.services.labels import I_ACT, STP, Label
from src.services.lts import Lts, Transition

logger = logging.getLogger(__name__)

DONE = "√"
DEAD = "δ"


def extract_lts(t: ThreadHandle) -> Lts:
    """
    One state per residual thread plus one wait state per postconditional
    residual. S performs stp into a terminating sink, D performs i into a sink
    that neither terminates nor moves.
    """
    spec = t.spec
    states: list[str] = []
    transitions: list[Transition] = []
    annotations: dict[str, str] = {}
    sinks: dict[str, bool] = {}

    for name in reachable_names(spec, t.state):
        rhs = spec.table[name]
        states.append(name)
        annotations[name] = f"{name} = {rhs}"
        if isinstance(rhs, Postcond):
            wait = f"{name}?"
            states.append(wait)
            annotations[wait] = f"awaiting reply to {rhs.action}"
            focus = rhs.action.focus
            transitions.append(Transition(name, Label.snd_f(focus, rhs.action.method), wait))
            transitions.append(Transition(wait, Label.rcv_f(focus, True), rhs.on_true))
            transitions.append(Transition(wait, Label.rcv_f(focus, False), rhs.on_false))
        elif rhs is Constant.TERMINATE:
            sinks[DONE] = True
            transitions.append(Transition(name, STP, DONE))
        else:
            sinks[DEAD] = True
            transitions.append(Transition(name, I_ACT, DEAD))

    for sink in (DONE, DEAD):
        if sink in sinks:
            states.append(sink)
            annotations[sink] = "terminated" if sink == DONE else "inaction"

    lts = Lts(
        tuple(states),
        t.state,
        tuple(transitions),
        frozenset({DONE} & set(sinks)),
        annotations,
    ).renumber()
    logger.debug(f"Extracted {len(lts.states)} states and {len(lts.transitions)} transitions from {t.state}")
    return lts
