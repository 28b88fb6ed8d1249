import pytest

from src.services.bta import (
    DEADLOCK_HANDLE,
    BasicAction,
    Constant,
    Mark,
    Postcond,
    ThreadSpec,
    ThreadSpecError,
    act,
    minimize,
    parse_spec,
    print_spec,
    residuals,
    threads_equal,
    thrf,
    thrt,
)
from tests.conftest import thread

FM = BasicAction("f", "m")


def test_parse_single_terminate():
    spec = parse_spec("X = S")
    assert spec.equations == (("X", Constant.TERMINATE),)
    assert spec.start == "X"


def test_parse_three_equations():
    spec = parse_spec("X = f.m ? Y : Z\nY = S\nZ = D")
    assert spec.start == "X"
    assert spec.table == {
        "X": Postcond(FM, "Y", "Z"),
        "Y": Constant.TERMINATE,
        "Z": Constant.DEADLOCK,
    }


def test_parse_unknown_variable_reports_line():
    with pytest.raises(ThreadSpecError) as exc:
        parse_spec("X = f.m ? Y : W\nY = S")
    assert exc.value.errors == ["unknown variable W at line 1"]


@pytest.mark.parametrize(
    "text, message",
    [
        ("X = S\nX = D", "duplicate equation for X at line 2"),
        ("@start X\n@start Y\nX = S\nY = D", "duplicate start directive at line 2 (first at line 1)"),
        ("X = Y", "unguarded equation for X at line 1"),
        ("X = F.m ? X : X", "malformed action name 'F.m' at line 1"),
        ("@start Q\nX = S", "missing start variable Q at line 1"),
        ("X = S\n@prob f.m 1.5", "probability 1.5 for f.m out of range at line 2"),
        ("", "no equations defined"),
    ],
)
def test_parse_errors(text, message):
    with pytest.raises(ThreadSpecError) as exc:
        parse_spec(text)
    assert message in exc.value.errors


def test_parse_collects_every_error():
    with pytest.raises(ThreadSpecError) as exc:
        parse_spec("X = f.m ? A : B\nY = Z")
    assert len(exc.value.errors) == 3


def test_parse_nested_terms_get_fresh_names():
    spec = parse_spec("X = f.a ? (f.b ? X : S) : D")
    assert spec.table["X"] == Postcond(BasicAction("f", "a"), "X_1", "X_2")
    assert spec.table["X_1"] == Postcond(BasicAction("f", "b"), "X", "X_3")
    assert spec.table["X_2"] is Constant.DEADLOCK
    assert spec.table["X_3"] is Constant.TERMINATE


def test_parse_comments_and_directives():
    spec = parse_spec("# loop\nY = S  # done\nX = f.m ? X : Y\n@start X\n@prob f.m 0.95\n")
    assert spec.start == "X"
    assert spec.probability(FM) == 0.95
    assert spec.probability(BasicAction("g", "n")) == 0.5


def test_print_single_terminate():
    assert print_spec(parse_spec("X = S")) == "X = S\n"


def test_print_canonical_whitespace():
    spec = parse_spec("X   =  f.m?Y:Z\nY=S\nZ = D")
    assert print_spec(spec) == "X = f.m ? Y : Z\nY = S\nZ = D\n"
    assert parse_spec(print_spec(spec)) == spec


def test_print_probabilities():
    spec = parse_spec("X = f.m ? X : X\n@prob f.m 0.95")
    assert "@prob f.m 0.95" in print_spec(spec).splitlines()


def test_act():
    assert act(thread("X = S")) is Mark.STOP
    assert act(thread("X = D")) is Mark.DEAD
    assert act(thread("X = f.m ? Y : Z\nY = S\nZ = D")) == FM


def test_thrt_thrf(branch_thread):
    assert thrt(branch_thread).state == "Y"
    assert thrf(branch_thread).state == "Z"
    assert thrf(thread("X = S")) == DEADLOCK_HANDLE
    assert thrt(thread("X = D")) == DEADLOCK_HANDLE


def test_residuals():
    assert {t.state for t in residuals(thread("X = S"))} == {"X"}
    assert {t.state for t in residuals(thread("X = f.m ? X : Y\nY = S"))} == {"X", "Y"}
    assert {t.state for t in residuals(thread("X = f.m ? Y : Z\nY = S\nZ = D"))} == {"X", "Y", "Z"}


def test_minimize_merges_identical_leaves():
    spec, mapping = minimize(parse_spec("X = f.m ? Y : Z\nY = S\nZ = S"))
    assert len(spec.equations) == 2
    assert mapping["Y"] == mapping["Z"]


def test_minimize_keeps_distinguishable_leaves():
    spec, _ = minimize(parse_spec("X = f.m ? Y : Z\nY = S\nZ = D"))
    assert len(spec.equations) == 3


def test_minimize_unfolding():
    folded, _ = minimize(parse_spec("X = f.m ? X : X"))
    unfolded, _ = minimize(parse_spec("X = f.m ? Y : Y\nY = f.m ? Y : Y"))
    assert len(folded.equations) == 1
    assert len(unfolded.equations) == 1


def test_threads_equal_across_specs():
    a = thread("X = f.m ? X : X")
    b = thread("P = f.m ? Q : Q\nQ = f.m ? P : P")
    c = thread("X = f.m ? X : Y\nY = S")
    assert threads_equal(a, b)
    assert not threads_equal(a, c)


def test_spec_rejects_dangling_reference():
    with pytest.raises(ThreadSpecError):
        ThreadSpec((("X", Postcond(FM, "X", "W")),), "X")
