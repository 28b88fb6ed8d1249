import json

import pytest

from src.main import EXIT_NEGATIVE, EXIT_OK, EXIT_USAGE, run
from src.services.lts import Lts


@pytest.fixture
def branch(threads_dir):
    return str(threads_dir / "branch.bta")


def test_validate(branch, capsys):
    assert run(["validate", branch]) == EXIT_OK
    assert "ok (3 equations, start X)" in capsys.readouterr().out


def test_validate_reports_line_numbers(tmp_path, capsys):
    bad = tmp_path / "bad.bta"
    bad.write_text("X = f.m ? Y : W\nY = S\n")
    assert run(["validate", str(bad)]) == EXIT_USAGE
    assert "unknown variable W at line 1" in capsys.readouterr().err


def test_missing_file(tmp_path, capsys):
    assert run(["validate", str(tmp_path / "nope.bta")]) == EXIT_USAGE
    assert "cannot read" in capsys.readouterr().err


def test_unknown_flag(branch):
    with pytest.raises(SystemExit) as exc:
        run(["check", branch, "--turbo"])
    assert exc.value.code == 2


def test_extract_writes_lts_json(branch, tmp_path):
    out = tmp_path / "ref.json"
    assert run(["extract", branch, "--out", str(out)]) == EXIT_OK
    lts = Lts.loads(out.read_text())
    assert len(lts.states) == 6


def test_compose_is_deterministic(branch, capsys):
    run(["compose", branch, "--maxlen", "1"])
    first = capsys.readouterr().out
    run(["compose", branch, "--maxlen", "1"])
    assert capsys.readouterr().out == first
    assert json.loads(first)["initial"] == "s0"


def test_check_equivalent(branch, capsys):
    assert run(["check", branch, "--maxlen", "1", "--mode", "safe"]) == EXIT_OK
    assert capsys.readouterr().out == "equivalent\n"


def test_check_abstraction_asymmetry(threads_dir, capsys):
    stop = str(threads_dir / "stop.bta")
    assert run(["check", stop, "--rhs-abstract", "jact"]) == EXIT_NEGATIVE
    assert "not equivalent" in capsys.readouterr().out
    assert run(["check", stop]) == EXIT_OK


def test_check_json_for_several_threads(threads_dir, capsys):
    files = [str(threads_dir / name) for name in ("stop.bta", "branch.bta")]
    assert run(["check", *files, "--json"]) == EXIT_OK
    lines = capsys.readouterr().out.splitlines()
    assert [json.loads(line)["equivalent"] for line in lines] == [True, True]


def test_explore_strict_reports_deadlocks(branch, capsys):
    assert run(["explore", branch, "--maxlen", "0", "--mode", "strict"]) == EXIT_OK
    out = capsys.readouterr().out
    count = int(out.split("protocol deadlocks: ")[1].split()[0])
    assert count >= 1
    assert "protocol deadlock s" in out


def test_explore_fail_on_deadlock(branch):
    assert run(["explore", branch, "--maxlen", "0", "--mode", "strict", "--fail-on-deadlock"]) == EXIT_NEGATIVE
    assert run(["explore", branch, "--maxlen", "0", "--fail-on-deadlock"]) == EXIT_OK


def test_simulate_csv(threads_dir, tmp_path):
    out = tmp_path / "sweep.csv"
    linear = str(threads_dir / "linear8.bta")
    args = ["simulate", linear, "--maxlen", "0,1,2", "--strategy", "breadth+wildcard", "--csv", str(out)]
    assert run(args) == EXIT_OK
    lines = out.read_text().splitlines()
    assert lines[0] == "thread,maxlen,strategy,seed,env,busy,idle,total,utilization,msgs,replies,discarded"
    assert len(lines) == 4
    assert lines[1].startswith("linear8,0,breadth+wildcard,0,all-true,")


def test_simulate_event_log(threads_dir, tmp_path):
    log = tmp_path / "events.log"
    assert run(["simulate", str(threads_dir / "stop.bta"), "--log", str(log), "--csv", str(tmp_path / "s.csv")]) == EXIT_OK
    assert log.read_text().splitlines()[0].split() == ["0", "send", "<0,ε,stop>"]


def test_simulate_bad_environment(branch, capsys):
    assert run(["simulate", branch, "--env", "fixed:XY"]) == EXIT_USAGE
    assert capsys.readouterr().err.startswith("error:")


def test_unexpected_error_exits_with_usage_code(branch, monkeypatch, caplog):
    def broken(path):
        raise RuntimeError("disk on fire")

    monkeypatch.setattr("src.main.load_thread", broken)
    assert run(["validate", branch]) == EXIT_USAGE
    assert "Unexpected error in validate: disk on fire" in caplog.text
