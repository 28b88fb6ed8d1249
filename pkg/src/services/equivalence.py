"""
Rooted branching bisimilarity of finite transition systems.

The checker refines signatures: two states stay together while they can reach
the same (label, block) pairs through silent steps that do not leave their
own block. Strongly connected components of the silent steps are collapsed
once with networkx; every round then summarizes the components from the
sinks up.
"""

import logging
from collections import ChainMap, deque
from dataclasses import dataclass
from typing import Iterable

import networkx as nx

from src.config import DEFAULT_ORACLE_BOUND
from src.schema.configs import CompositionConfig, EquivConfig
from src.schema.results import Counterexample, EquivVerdict
from src.services.bta import ThreadHandle
from src.services.composition import Composition, explore
from src.services.extraction import extract_lts
from src.services.labels import TAU, Label, LabelKind
from src.services.lts import Lts, Transition, tau_closure, weak_after

logger = logging.getLogger(__name__)

TICK = "√"
DIV = "⟳"
CERTIFICATE_SEARCH_LIMIT = 10_000


class OracleBoundExceeded(ValueError):
    pass


class UncertifiedCounterexample(RuntimeError):
    """A counterexample failed its own re-check; the checker is inconsistent."""


def fresh_state(lts: Lts, base: str) -> str:
    name = base
    known = set(lts.states)
    while name in known:
        name += "'"
    return name


def normalize_termination(lts: Lts) -> Lts:
    """Redirect every stp step to one fresh terminating sink and drop orphaned states."""
    if not any(t.label.kind is LabelKind.STP for t in lts.transitions):
        return lts
    sink = fresh_state(lts, "√")
    transitions = tuple(
        Transition(t.source, t.label, sink) if t.label.kind is LabelKind.STP else t
        for t in lts.transitions
    )
    annotations = ChainMap({sink: "terminated"}, lts.annotations)
    normalized = Lts(
        lts.states + (sink,),
        lts.initial,
        transitions,
        lts.terminating | {sink},
        annotations,
    )
    return normalized.reachable()


def with_tau_root(lts: Lts) -> Lts:
    root = fresh_state(lts, "τ0")
    annotations = ChainMap({root: "fresh silent root"}, lts.annotations)
    return Lts(
        (root,) + lts.states,
        root,
        (Transition(root, TAU, lts.initial),) + lts.transitions,
        lts.terminating,
        annotations,
    )


def prepare(lts: Lts, abstraction: Iterable[LabelKind], tau_prefix: bool) -> Lts:
    """Termination normalization, then abstraction, then the optional τ-prefix."""
    prepared = normalize_termination(lts).hide(abstraction)
    return with_tau_root(prepared) if tau_prefix else prepared


def disjoint_union(a: Lts, b: Lts) -> tuple[Lts, str, str]:
    def tag(prefix: str, lts: Lts):
        name = {s: f"{prefix}:{s}" for s in lts.states}
        transitions = tuple(Transition(name[t.source], t.label, name[t.target]) for t in lts.transitions)
        return name, transitions

    left, lt = tag("L", a)
    right, rt = tag("R", b)
    union = Lts(
        tuple(left.values()) + tuple(right.values()),
        left[a.initial],
        lt + rt,
        frozenset(left[s] for s in a.terminating) | frozenset(right[s] for s in b.terminating),
    )
    return union, left[a.initial], right[b.initial]


# --- signature refinement -------------------------------------------------

@dataclass
class _SilentQuotient:
    """
    The LTS with its τ-strongly connected components collapsed. States on a
    τ-cycle are branching bisimilar, so refinement runs on components.
    """
    component: dict[str, int]
    order: list[int]  # successors before predecessors
    moves: dict[int, set[tuple[Label, int]]]
    terminating: set[int]
    cyclic: set[int]

    @classmethod
    def of(cls, lts: Lts) -> "_SilentQuotient":
        silent = nx.DiGraph()
        silent.add_nodes_from(lts.states)
        silent.add_edges_from((t.source, t.target) for t in lts.transitions if t.label.is_tau)
        dag = nx.condensation(silent)
        component = dag.graph["mapping"]
        cyclic = {
            c for c in dag
            if len(dag.nodes[c]["members"]) > 1 or any(silent.has_edge(m, m) for m in dag.nodes[c]["members"])
        }
        moves: dict[int, set[tuple[Label, int]]] = {c: set() for c in dag}
        for t in lts.transitions:
            c, d = component[t.source], component[t.target]
            if not (t.label.is_tau and c == d):
                moves[c].add((t.label, d))
        terminating = {component[s] for s in lts.terminating}
        order = list(reversed(list(nx.topological_sort(dag))))
        return cls(component, order, moves, terminating, cyclic)

    def signatures(self, block: dict[int, int], divergence_sensitive: bool) -> dict[int, frozenset]:
        sigs: dict[int, frozenset] = {}
        for c in self.order:
            sig = set()
            if c in self.terminating:
                sig.add(TICK)
            for label, d in self.moves[c]:
                if label.is_tau and block[d] == block[c]:
                    sig |= sigs[d]
                else:
                    sig.add((label, block[d]))
            if divergence_sensitive and c in self.cyclic:
                sig.add(DIV)
            sigs[c] = frozenset(sig)
        return sigs


def branching_partition(lts: Lts, divergence_sensitive: bool = False) -> dict[str, int]:
    """Block numbers of the coarsest branching bisimulation respecting termination."""
    quotient = _SilentQuotient.of(lts)
    block = {c: 0 for c in quotient.order}
    count = 1
    rounds = 0
    while True:
        rounds += 1
        sigs = quotient.signatures(block, divergence_sensitive)
        keys: dict[tuple, int] = {}
        refined = {c: keys.setdefault((block[c], sigs[c]), len(keys)) for c in quotient.order}
        if len(keys) == count:
            logger.debug(f"Partition stable after {rounds} rounds with {count} blocks")
            break
        block, count = refined, len(keys)
    # renumber in state order so block ids do not depend on the condensation
    ids: dict[int, int] = {}
    return {s: ids.setdefault(refined[quotient.component[s]], len(ids)) for s in lts.states}


def root_condition(lts: Lts, r1: str, r2: str, block: dict[str, int]) -> bool:
    """Initial moves, silent ones included, must be matched by single steps into equivalent states."""
    def moves(r):
        return {(label, block[t]) for label, t in lts.successors[r]}

    return moves(r1) == moves(r2) and (r1 in lts.terminating) == (r2 in lts.terminating)


# --- counterexamples ------------------------------------------------------

@dataclass(frozen=True)
class _Profile:
    ready: frozenset[Label]
    terminates: bool
    diverges: bool


class _Observer:
    """Weak ready sets and termination of the states of one prepared side."""

    def __init__(self, lts: Lts, divergence_sensitive: bool):
        self.lts = lts
        self.divergence_sensitive = divergence_sensitive
        self._cache: dict[str, _Profile] = {}
        self._divergent = self._divergent_states() if divergence_sensitive else frozenset()

    def _divergent_states(self) -> frozenset[str]:
        silent = nx.DiGraph()
        silent.add_nodes_from(self.lts.states)
        silent.add_edges_from((t.source, t.target) for t in self.lts.transitions if t.label.is_tau)
        cyclic = set()
        for component in nx.strongly_connected_components(silent):
            if len(component) > 1 or any(silent.has_edge(m, m) for m in component):
                cyclic |= component
        reaching = set(cyclic)
        for s in cyclic:
            reaching |= nx.ancestors(silent, s)
        return frozenset(reaching)

    def profile(self, s: str) -> _Profile:
        if s not in self._cache:
            closure = tau_closure(self.lts, [s])
            ready = frozenset(
                label for x in closure for label, _ in self.lts.successors[x] if not label.is_tau
            )
            terminates = any(x in self.lts.terminating for x in closure)
            self._cache[s] = _Profile(ready, terminates, s in self._divergent)
        return self._cache[s]


def _classify(witness: _Profile, others: list[_Profile], divergence_sensitive: bool) -> tuple[str, str]:
    if all(o.terminates != witness.terminates for o in others):
        verb = "can" if witness.terminates else "cannot"
        return "termination", f"{verb} terminate, unlike every matching state"
    if not witness.ready and not witness.terminates:
        return "deadlock", "is deadlocked, while every matching state can still move"
    offered = frozenset().union(*(o.ready for o in others)) if others else frozenset()
    missing = witness.ready - offered
    if missing:
        return "missing-branch", f"offers {', '.join(sorted(map(str, missing)))} which the other side cannot"
    if divergence_sensitive and any(
        o.ready == witness.ready and o.terminates == witness.terminates for o in others
    ):
        return "divergence", "differs in divergence from every matching state"
    ready = "{" + ", ".join(sorted(map(str, witness.ready))) + "}"
    return "branching", f"offers exactly {ready}, which no single matching state does"


def _unmatched(side: frozenset[str], other: frozenset[str], obs: _Observer, other_obs: _Observer) -> str | None:
    profiles = {other_obs.profile(y) for y in other}
    for x in sorted(side):
        if obs.profile(x) not in profiles:
            return x
    return None


def _separated(cx: Counterexample, union: Lts, r1: str, r2: str, block: dict[str, int]) -> bool:
    """The trace leads the witness into a block no state of the other side reaches by that trace."""
    tag, mine, theirs = ("L", r1, r2) if cx.side == "lhs" else ("R", r2, r1)
    by_text = {str(t.label): t.label for t in union.transitions}
    a = tau_closure(union, [mine])
    b = tau_closure(union, [theirs])
    for step in cx.trace:
        if step not in by_text:
            return False
        a = weak_after(union, a, by_text[step])
        b = weak_after(union, b, by_text[step])
    witness = f"{tag}:{cx.witness}"
    return witness in a and block[witness] not in {block[y] for y in b}


def replay(cx: Counterexample, lhs: Lts, rhs: Lts, divergence_sensitive: bool = False) -> bool:
    """True iff the trace reaches the witness on its side and the other side cannot match it."""
    if cx.obligation == "root" or cx.basis == "partition":
        union, r1, r2 = disjoint_union(lhs, rhs)
        block = branching_partition(union, divergence_sensitive)
        if cx.obligation == "root":
            return block[r1] == block[r2] and not root_condition(union, r1, r2, block)
        return _separated(cx, union, r1, r2, block)
    sides = {"lhs": lhs, "rhs": rhs}
    mine, theirs = sides[cx.side], sides["rhs" if cx.side == "lhs" else "lhs"]
    by_text_mine = {str(t.label): t.label for t in mine.transitions}
    by_text_theirs = {str(t.label): t.label for t in theirs.transitions}
    a = tau_closure(mine, [mine.initial])
    b = tau_closure(theirs, [theirs.initial])
    for step in cx.trace:
        if step not in by_text_mine:
            return False
        a = weak_after(mine, a, by_text_mine[step])
        b = weak_after(theirs, b, by_text_theirs[step]) if step in by_text_theirs else frozenset()
    if cx.witness not in a:
        return False
    obs, other_obs = _Observer(mine, divergence_sensitive), _Observer(theirs, divergence_sensitive)
    witness = obs.profile(cx.witness)
    return all(other_obs.profile(y) != witness for y in b)


def find_counterexample(lhs: Lts, rhs: Lts, divergence_sensitive: bool = False) -> Counterexample | None:
    """
    Shortest visible trace after which one side reaches a state whose weak
    ready set, termination and divergence no state of the other side shares.
    """
    observers = {"lhs": _Observer(lhs, divergence_sensitive), "rhs": _Observer(rhs, divergence_sensitive)}
    start = (tau_closure(lhs, [lhs.initial]), tau_closure(rhs, [rhs.initial]))
    queue = deque([(start, ())])
    seen = {start}
    while queue and len(seen) <= CERTIFICATE_SEARCH_LIMIT:
        (a, b), trace = queue.popleft()
        for side, mine, theirs in (("lhs", a, b), ("rhs", b, a)):
            other = "rhs" if side == "lhs" else "lhs"
            x = _unmatched(mine, theirs, observers[side], observers[other])
            if x is None:
                continue
            others = [observers[other].profile(y) for y in sorted(theirs)]
            obligation, detail = _classify(observers[side].profile(x), others, divergence_sensitive)
            return Counterexample(
                trace=[str(label) for label in trace],
                obligation=obligation,
                side=side,
                witness=x,
                detail=detail,
            )
        labels = {label for s in a for label, _ in lhs.successors[s] if not label.is_tau}
        labels &= {label for s in b for label, _ in rhs.successors[s] if not label.is_tau}
        for label in sorted(labels, key=str):
            nxt = (weak_after(lhs, a, label), weak_after(rhs, b, label))
            if nxt not in seen:
                seen.add(nxt)
                queue.append((nxt, trace + (label,)))
    return None


def _split(a: frozenset[str], b: frozenset[str], block: dict[str, int]) -> tuple[str, str] | None:
    """A state of either set in a block the other set does not meet."""
    for side, mine, theirs in (("lhs", a, b), ("rhs", b, a)):
        blocks = {block[y] for y in theirs}
        for x in sorted(mine):
            if block[x] not in blocks:
                return side, x
    return None


def separating_counterexample(union: Lts, r1: str, r2: str, block: dict[str, int]) -> Counterexample:
    """
    Deepest common weak trace after which one side reaches a state whose block
    none of the states reached by the other side is in. For roots in different
    blocks the empty trace already qualifies, so a result always exists.
    """
    start = (tau_closure(union, [r1]), tau_closure(union, [r2]))
    queue = deque([(start, ())])
    seen = {start}
    best: tuple[tuple[Label, ...], tuple[str, str]] | None = None
    while queue and len(seen) <= CERTIFICATE_SEARCH_LIMIT:
        (a, b), trace = queue.popleft()
        found = _split(a, b, block)
        if found is not None and (best is None or len(trace) > len(best[0])):
            best = (trace, found)
        labels = {label for s in a for label, _ in union.successors[s] if not label.is_tau}
        labels &= {label for s in b for label, _ in union.successors[s] if not label.is_tau}
        for label in sorted(labels, key=str):
            nxt = (weak_after(union, a, label), weak_after(union, b, label))
            if nxt not in seen:
                seen.add(nxt)
                queue.append((nxt, trace + (label,)))
    if best is None:
        raise UncertifiedCounterexample("the roots are not separated by the partition")
    trace, (side, witness) = best
    return Counterexample(
        trace=[str(label) for label in trace],
        obligation="branching",
        side=side,
        witness=witness.split(":", 1)[1],
        detail="is not branching bisimilar to any state the other side reaches by the same trace",
        basis="partition",
    )


# --- public entry points --------------------------------------------------

def branching_bisim(l1: Lts, l2: Lts, cfg: EquivConfig | None = None) -> EquivVerdict:
    cfg = cfg or EquivConfig()
    lhs = prepare(l1, cfg.lhs_abstraction, cfg.tau_prefix)
    rhs = prepare(l2, cfg.rhs_abstraction, cfg.tau_prefix)
    union, r1, r2 = disjoint_union(lhs, rhs)
    block = branching_partition(union, cfg.divergence_sensitive)
    same_block = block[r1] == block[r2]
    rooted_ok = not cfg.rooted or root_condition(union, r1, r2, block)
    sizes = dict(lhs_states=len(lhs.states), rhs_states=len(rhs.states), blocks=len(set(block.values())))
    if same_block and rooted_ok:
        return EquivVerdict(equivalent=True, **sizes)

    if not same_block:
        cx = find_counterexample(lhs, rhs, cfg.divergence_sensitive)
        if cx is None or not replay(cx, lhs, rhs, cfg.divergence_sensitive):
            logger.info("No readiness certificate found; certifying through the partition")
            cx = separating_counterexample(union, r1, r2, block)
            if not _separated(cx, union, r1, r2, block):
                raise UncertifiedCounterexample(f"trace {cx.trace} does not separate {cx.witness}")
    else:
        cx = Counterexample(
            trace=[],
            obligation="root",
            side="lhs",
            witness=lhs.initial,
            detail="an initial step is matched only after silent steps",
        )
        if root_condition(union, r1, r2, block):
            raise UncertifiedCounterexample("the root condition holds")
    cx = cx.model_copy(update={"certified": True})
    logger.info(f"Not equivalent: {cx.obligation} after {' '.join(cx.trace) or 'ε'}")
    return EquivVerdict(equivalent=False, counterexample=cx, **sizes)


def naive_bisim_oracle(l1: Lts, l2: Lts, cfg: EquivConfig | None = None, bound: int = DEFAULT_ORACLE_BOUND) -> bool:
    """Greatest fixpoint over state pairs, shrinking the full relation until it is a branching bisimulation."""
    cfg = cfg or EquivConfig()
    lhs = prepare(l1, cfg.lhs_abstraction, cfg.tau_prefix)
    rhs = prepare(l2, cfg.rhs_abstraction, cfg.tau_prefix)
    union, r1, r2 = disjoint_union(lhs, rhs)
    if len(union.states) > bound:
        raise OracleBoundExceeded(f"{len(union.states)} combined states exceed the oracle bound {bound}")

    succ = union.successors
    reach = {s: tau_closure(union, [s]) for s in union.states}
    term = union.terminating
    relation = {(s, t) for s in union.states for t in union.states}

    def diverges_within(s: str, t: str) -> bool:
        inside = {x for x in reach[s] if (x, t) in relation}
        if s not in inside:
            return False
        graph = nx.DiGraph()
        graph.add_nodes_from(inside)
        graph.add_edges_from(
            (x, y) for x in inside for label, y in succ[x] if label.is_tau and y in inside
        )
        reachable = nx.descendants(graph, s) | {s}
        return not nx.is_directed_acyclic_graph(graph.subgraph(reachable))

    def simulated(s: str, t: str) -> bool:
        for label, s2 in succ[s]:
            if label.is_tau and (s2, t) in relation:
                continue
            if not any(
                (s, t1) in relation and any(l == label and (s2, t2) in relation for l, t2 in succ[t1])
                for t1 in reach[t]
            ):
                return False
        if s in term and not any(t1 in term and (s, t1) in relation for t1 in reach[t]):
            return False
        if cfg.divergence_sensitive and diverges_within(s, t) and not diverges_within(t, s):
            return False
        return True

    changed = True
    while changed:
        changed = False
        for s, t in sorted(relation):
            if (s, t) in relation and not (simulated(s, t) and simulated(t, s)):
                relation.discard((s, t))
                relation.discard((t, s))
                changed = True

    if (r1, r2) not in relation:
        return False
    if not cfg.rooted:
        return True

    def root_matched(a: str, b: str) -> bool:
        return all(
            any(l == label and (x, y) in relation for l, y in succ[b]) for label, x in succ[a]
        ) and ((a in term) <= (b in term))

    return root_matched(r1, r2) and root_matched(r2, r1)


@dataclass
class CheckOutcome:
    verdict: EquivVerdict
    reference: Lts
    composition: Composition


def check_thread(
    thread: ThreadHandle, comp_cfg: CompositionConfig, equiv_cfg: EquivConfig | None = None
) -> CheckOutcome:
    """Extract, compose with every label visible, then compare under the configured abstractions."""
    equiv_cfg = equiv_cfg or EquivConfig()
    reference = extract_lts(thread)
    composition = explore(thread, comp_cfg.model_copy(update={"abstraction": frozenset()}))
    verdict = branching_bisim(reference, composition.lts, equiv_cfg)
    return CheckOutcome(verdict, reference, composition)
