import pytest

from src.schema.configs import CompositionConfig, SimConfig
from src.services.equivalence import check_thread
from src.services.results_recorder import ResultsRecorder
from src.services.simulation import CSV_COLUMNS, sweep


@pytest.fixture
def recorder(tmp_path):
    return ResultsRecorder(f"sqlite:///{tmp_path / 'results.db'}")


def test_record_check(recorder, branch_thread):
    cfg = CompositionConfig(maxlen=1)
    run = recorder.record_check("branch", cfg, check_thread(branch_thread, cfg).verdict)
    assert run.id == 1
    checks = recorder.load_checks()
    assert list(checks["thread"]) == ["branch"]
    assert bool(checks["equivalent"].iloc[0])


def test_record_and_load_sweep(recorder, branch_thread):
    table = sweep(branch_thread, SimConfig(), [0, 1], ["breadth"], thread_name="branch")
    assert recorder.record_sweep(table) == 2
    loaded = recorder.load_sweeps("branch")
    assert list(loaded.columns) == CSV_COLUMNS
    assert loaded.to_dict(orient="records") == table.to_dict(orient="records")
    assert recorder.load_sweeps("other").empty
