import pytest

from src.services.bta import BasicAction
from src.services.strategies import (
    BREADTH,
    PROB50,
    PROB95,
    SelectionStrategy,
    AnnotatedEntry,
    parse_strategy,
    residual_probability,
    select,
    wildcard_expand,
)
from tests.conftest import thread

FM = BasicAction("f", "m")
GN = BasicAction("g", "n")


def entry(prefix, t, actions=None):
    return AnnotatedEntry(prefix, actions if actions is not None else (FM,) * len(prefix), t)


@pytest.fixture
def skewed():
    return thread("P = S\nQ = S\nR = S\nX = f.m ? P : Q\n@start X\n@prob f.m 0.8")


def test_parse_strategy_names():
    assert parse_strategy("breadth") == BREADTH
    assert parse_strategy("prob95+wildcard") == PROB95.with_wildcard()
    assert parse_strategy("PROB50").name == "prob50"
    assert parse_strategy("breadth+wildcard").name == "breadth+wildcard"
    with pytest.raises(ValueError):
        parse_strategy("depth")
    with pytest.raises(ValueError):
        parse_strategy("breadth+turbo")


def test_residual_probability_empty_prefix(skewed):
    assert residual_probability(entry("", skewed)) == 1.0


def test_residual_probability_single_factor(skewed):
    assert residual_probability(entry("T", skewed)) == pytest.approx(0.8)


def test_residual_probability_product(skewed):
    e = entry("TF", skewed, (FM, GN))
    assert residual_probability(e, {FM: 0.8, GN: 0.6}) == pytest.approx(0.32)


def test_residual_probability_wildcard_is_certain(skewed):
    assert residual_probability(entry("*T", skewed)) == pytest.approx(0.8)


def test_residual_probability_matches_enumeration(skewed):
    probs = {FM: 0.8, GN: 0.6}
    total = sum(
        residual_probability(entry(u, skewed, (FM, GN)), probs) for u in ("TT", "TF", "FT", "FF")
    )
    assert total == pytest.approx(1.0)


def test_entry_length_mismatch(skewed):
    with pytest.raises(ValueError):
        AnnotatedEntry("T", (), skewed)


def test_select_minimum_length(skewed):
    p, q, r = skewed.spec.handle("P"), skewed.spec.handle("Q"), skewed.spec.handle("R")
    frontier = {entry("T", p), entry("F", q), entry("TT", r)}
    assert set(select(frontier, BREADTH, 2)) == {entry("T", p), entry("F", q)}


def test_select_length_bound(skewed):
    assert select({entry("TT", skewed.spec.handle("P"))}, BREADTH, 1) == ()


def test_select_threshold(skewed):
    p, q = skewed.spec.handle("P"), skewed.spec.handle("Q")
    assert select({entry("T", p), entry("F", q)}, PROB50, 2) == (entry("T", p),)


def test_select_threshold_keeps_empty_prefix(skewed):
    lone = entry("", skewed)
    assert select({lone}, PROB95, 0) == (lone,)


def test_select_deep_orders_by_probability(skewed):
    p, q, r = skewed.spec.handle("P"), skewed.spec.handle("Q"), skewed.spec.handle("R")
    chosen = select({entry("F", q), entry("TT", r), entry("T", p)}, SelectionStrategy(0.5, False), 2)
    assert chosen == (entry("T", p), entry("TT", r))


def test_wildcard_expand_identical_branches():
    t = thread("X = f.m ? Y : Y\nY = S")
    (child,) = wildcard_expand(entry("", t))
    assert (child.prefix, child.actions, child.thread.state) == ("*", (FM,), "Y")


def test_wildcard_expand_distinct_branches():
    t = thread("X = f.m ? Y : Z\nY = S\nZ = D")
    assert [c.prefix for c in wildcard_expand(entry("", t))] == ["T", "F"]


def test_wildcard_expand_uses_semantic_equality():
    t = thread("X = f.m ? Y : Z\nY = f.m ? Y : Y\nZ = f.m ? Z : Z")
    (child,) = wildcard_expand(entry("", t))
    assert child.prefix == "*"


def test_wildcard_expand_rejects_constants(stop_thread):
    with pytest.raises(ValueError):
        wildcard_expand(entry("", stop_thread))
