import pytest

from src.schema.configs import CompositionConfig, Environment, SimConfig
from src.services.composition import compose
from src.services.lts import visible_traces
from src.services.simulation import CSV_COLUMNS, DegenerateRunError, simulate, sweep, to_csv
from tests.conftest import THREADS_DIR, thread
from src.services.bta import parse_spec


@pytest.fixture
def linear():
    return parse_spec((THREADS_DIR / "linear8.bta").read_text()).handle()


@pytest.fixture
def skewed():
    return parse_spec((THREADS_DIR / "skewed.bta").read_text()).handle()


def test_stop_thread_sends_one_message(stop_thread):
    metrics = simulate(stop_thread, SimConfig(latency_msg=3, latency_reply=7)).metrics
    assert metrics.busy == 0
    assert metrics.messages_sent == 1
    assert metrics.outcome == "terminated"
    assert metrics.total == 3


def test_run_ahead_keeps_unit_busier(linear):
    cfg = SimConfig(strategy="breadth+wildcard")
    slow = simulate(linear, cfg).metrics
    fast = simulate(linear, cfg.model_copy(update={"maxlen": 2})).metrics
    assert slow.outcome == fast.outcome == "terminated"
    assert fast.utilization >= slow.utilization


def test_ping_pong_idle_time(linear):
    metrics = simulate(linear, SimConfig(strategy="breadth+wildcard")).metrics
    assert metrics.steps == 8
    assert metrics.idle / metrics.steps >= 8


def test_accounting_holds(branch_thread):
    for env in ("all-true", "all-false", "random", "fixed:FT"):
        metrics = simulate(branch_thread, SimConfig(maxlen=1, environment=Environment.parse(env))).metrics
        assert metrics.busy + metrics.idle == metrics.total
        assert metrics.discarded <= metrics.messages_sent
        assert metrics.messages_sent >= metrics.steps


def test_dead_thread_outcome(branch_thread):
    result = simulate(branch_thread, SimConfig(environment=Environment.parse("all-false")))
    assert result.metrics.outcome == "dead"


def test_sweep_rows_in_order(linear):
    table = sweep(linear, SimConfig(), [0, 1, 2], ["breadth"], thread_name="linear8")
    assert list(table.columns) == CSV_COLUMNS
    assert list(table["maxlen"]) == [0, 1, 2]
    utilization = list(table["utilization"])
    assert utilization == sorted(utilization)


def test_sweep_empty_range(linear):
    table = sweep(linear, SimConfig(), [], ["breadth"])
    assert table.empty
    assert to_csv(table) == ",".join(CSV_COLUMNS) + "\n"


def test_probabilistic_selection_discards_less(skewed):
    cfg = SimConfig(maxlen=1, horizon=200)
    table = sweep(skewed, cfg, [1], ["breadth", "prob95"], thread_name="skewed")
    discarded = dict(zip(table["strategy"], table["discarded"]))
    assert discarded["prob95"] < discarded["breadth"]


def test_csv_is_deterministic(branch_thread):
    cfg = SimConfig(environment=Environment.parse("random"), seed=3)
    first = to_csv(sweep(branch_thread, cfg, [0, 1], ["breadth", "prob50"], seeds=[1, 2]))
    second = to_csv(sweep(branch_thread, cfg, [0, 1], ["breadth", "prob50"], seeds=[1, 2]))
    assert first == second
    assert first.splitlines()[0] == "thread,maxlen,strategy,seed,env,busy,idle,total,utilization,msgs,replies,discarded"


def test_event_log_is_reproducible(linear):
    cfg = SimConfig(maxlen=1, environment=Environment.parse("prob"), seed=9)
    assert simulate(linear, cfg).event_log() == simulate(linear, cfg).event_log()


def test_degenerate_run(branch_thread):
    with pytest.raises(DegenerateRunError):
        simulate(branch_thread, SimConfig(horizon=1, horizon_kind="events"))


@pytest.mark.parametrize("env", ["all-true", "all-false"])
def test_simulated_trace_is_a_composition_trace(branch_thread, env):
    result = simulate(branch_thread, SimConfig(maxlen=1, environment=Environment.parse(env)))
    lts = compose(branch_thread, CompositionConfig(maxlen=1))
    trace = tuple(str(label) for label in result.trace)
    assert trace in visible_traces(lts, len(trace))


def test_loop_trace_is_a_composition_trace():
    t = thread("X = f.a ? X : Y\nY = f.b ? S : X")
    cfg = SimConfig(maxlen=1, environment=Environment.parse("fixed:TFTFFT"), horizon=4)
    result = simulate(t, cfg)
    lts = compose(t, CompositionConfig(maxlen=1))
    trace = tuple(str(label) for label in result.trace)
    assert trace in visible_traces(lts, len(trace))


def test_environment_parsing():
    assert str(Environment.parse("fixed:tf")) == "fixed:TF"
    with pytest.raises(ValueError):
        Environment.parse("fixed:")
    with pytest.raises(ValueError):
        Environment.parse("sometimes")


def test_default_capacities_follow_maxlen():
    cfg = SimConfig(maxlen=3)
    assert (cfg.message_capacity, cfg.reply_capacity) == (5, 5)
    assert SimConfig(capacity_msg=1).message_capacity == 1
