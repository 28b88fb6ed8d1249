"""
Command-line entry point: validate, extract, compose, check, explore, simulate.
"""

import argparse
import logging
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

from pydantic import ValidationError

from src.config import DATABASE_URL, DEFAULT_STATE_BOUND, LOG_LEVEL
from src.schema.configs import CompositionConfig, Environment, EquivConfig, SimConfig
from src.services.bta import ThreadHandle, ThreadSpecError, parse_spec
from src.services.composition import StateBoundExceeded, explore, explore_stats, witness_trace
from src.services.equivalence import check_thread, normalize_termination
from src.services.extraction import extract_lts
from src.services.labels import parse_kinds
from src.services.protocol import GuardMode, ProtocolViolation
from src.services.simulation import DegenerateRunError, simulate, sweep, to_csv
from src.services.strategies import parse_strategy

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_NEGATIVE = 1
EXIT_USAGE = 2


class UsageError(Exception):
    pass


def load_thread(path: str) -> ThreadHandle:
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as e:
        raise UsageError(f"cannot read {path}: {e.strerror}") from e
    return parse_spec(text).handle()


def write_output(text: str, path: str | None):
    if path is None:
        sys.stdout.write(text)
        return
    try:
        Path(path).write_text(text, encoding="utf-8")
    except OSError as e:
        raise UsageError(f"cannot write {path}: {e.strerror}") from e
    logger.info(f"Wrote {path}")


def int_list(text: str) -> list[int]:
    try:
        return [int(part) for part in text.split(",") if part.strip()]
    except ValueError as e:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got '{text}'") from e


def strategy_list(text: str) -> list[str]:
    names = [part.strip() for part in text.split(",") if part.strip()]
    try:
        return [parse_strategy(name).name for name in names]
    except ValueError as e:
        raise argparse.ArgumentTypeError(str(e)) from e


def kinds(text: str):
    try:
        return parse_kinds(text)
    except ValueError as e:
        raise argparse.ArgumentTypeError(str(e)) from e


def composition_config(args, abstraction=None) -> CompositionConfig:
    fields = dict(
        maxlen=args.maxlen,
        capacity_msg=args.capacity_msg,
        capacity_reply=args.capacity_reply,
        mode=GuardMode(args.mode),
        strategy=args.strategy,
        state_bound=args.state_bound,
    )
    if abstraction is not None:
        fields["abstraction"] = abstraction
    return CompositionConfig(**fields)


# --- commands -------------------------------------------------------------

def cmd_validate(args) -> int:
    handle = load_thread(args.thread)
    print(f"{args.thread}: ok ({len(handle.spec.equations)} equations, start {handle.state})")
    return EXIT_OK


def cmd_extract(args) -> int:
    lts = extract_lts(load_thread(args.thread))
    write_output(lts.dumps(), args.out)
    return EXIT_OK


def cmd_compose(args) -> int:
    cfg = composition_config(args, args.abstract)
    lts = explore(load_thread(args.thread), cfg).lts
    write_output(lts.dumps(), args.out)
    return EXIT_OK


def _check_one(path: str, comp_cfg: CompositionConfig, equiv_cfg: EquivConfig):
    outcome = check_thread(load_thread(path), comp_cfg, equiv_cfg)
    return outcome.verdict


def cmd_check(args) -> int:
    comp_cfg = composition_config(args)
    equiv_cfg = EquivConfig(
        lhs_abstraction=args.lhs_abstract,
        rhs_abstraction=args.rhs_abstract,
        rooted=not args.unrooted,
        tau_prefix=not args.no_tau_prefix,
        divergence_sensitive=args.divergence_sensitive,
    )
    for path in args.threads:
        load_thread(path)
    if args.jobs > 1 and len(args.threads) > 1:
        with ProcessPoolExecutor(max_workers=args.jobs) as pool:
            verdicts = list(pool.map(_check_one, args.threads,
                                     [comp_cfg] * len(args.threads), [equiv_cfg] * len(args.threads)))
    else:
        verdicts = [_check_one(path, comp_cfg, equiv_cfg) for path in args.threads]

    recorder = None
    if args.record:
        from src.services.results_recorder import ResultsRecorder
        recorder = ResultsRecorder(DATABASE_URL)

    failures = 0
    lines = []
    for path, verdict in zip(args.threads, verdicts):
        failures += not verdict.equivalent
        if args.json:
            lines.append(verdict.to_json())
        elif len(args.threads) > 1:
            lines.append(f"{path}: {verdict.render()}")
        else:
            lines.append(verdict.render())
        if recorder is not None:
            recorder.record_check(Path(path).stem, comp_cfg, verdict)
    write_output("\n".join(lines) + "\n", args.out)
    return EXIT_NEGATIVE if failures else EXIT_OK


def cmd_explore(args) -> int:
    composition = explore(load_thread(args.thread), composition_config(args))
    lts = composition.lts if args.raw else normalize_termination(composition.lts)
    stats = explore_stats(lts, composition.peaks)
    lines = [stats.render()]
    for state in stats.deadlock_states:
        kind = "protocol deadlock" if state in stats.protocol_deadlocks else "deadlock after i"
        lines.append(f"\n{kind} {state}:")
        lines.extend(f"  {line}" for line in witness_trace(lts, state))
    write_output("\n".join(lines) + "\n", args.out)
    if args.fail_on_deadlock and stats.protocol_deadlocks:
        return EXIT_NEGATIVE
    return EXIT_OK


def cmd_simulate(args) -> int:
    handle = load_thread(args.thread)
    base = SimConfig(
        maxlen=args.maxlen[0] if args.maxlen else 0,
        strategy=args.strategy[0] if args.strategy else "breadth",
        latency_msg=args.latency_msg,
        latency_reply=args.latency_reply,
        exec_time=args.exec_time,
        environment=Environment.parse(args.env),
        seed=args.seed[0] if args.seed else 0,
        horizon=args.horizon,
        horizon_kind=args.horizon_kind,
        capacity_msg=args.capacity_msg,
        capacity_reply=args.capacity_reply,
    )
    if args.log:
        write_output(simulate(handle, base).event_log(), args.log)
    table = sweep(handle, base, args.maxlen, args.strategy, args.seed, thread_name=Path(args.thread).stem)
    write_output(to_csv(table), args.csv)
    if args.record:
        from src.services.results_recorder import ResultsRecorder
        ResultsRecorder(DATABASE_URL).record_sweep(table)
    return EXIT_OK


# --- parser ---------------------------------------------------------------

def add_composition_flags(p: argparse.ArgumentParser):
    p.add_argument("--maxlen", type=int, default=1, help="Run-ahead depth of the generator")
    p.add_argument("--capacity-msg", type=int, default=1)
    p.add_argument("--capacity-reply", type=int, default=1)
    p.add_argument("--mode", choices=[m.value for m in GuardMode], default=GuardMode.SAFE.value)
    p.add_argument("--strategy", default="breadth", help="breadth|prob50|prob95[+wildcard]")
    p.add_argument("--state-bound", type=int, default=DEFAULT_STATE_BOUND)
    p.add_argument("--out", help="Write output here instead of stdout")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="isp-lab",
        description="Verification and simulation of a run-ahead instruction stream protocol",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("validate", help="Parse a thread file and check closedness")
    p.add_argument("thread")
    p.set_defaults(func=cmd_validate)

    p = sub.add_parser("extract", help="Write the reference LTS of a thread")
    p.add_argument("thread")
    p.add_argument("--out")
    p.set_defaults(func=cmd_extract)

    p = sub.add_parser("compose", help="Write the LTS of the protocol composition")
    p.add_argument("thread")
    add_composition_flags(p)
    p.add_argument("--abstract", type=kinds, default=parse_kinds("jact"), help="Label kinds renamed to tau")
    p.set_defaults(func=cmd_compose)

    p = sub.add_parser("check", help="Decide the reference LTS and the composition equivalent")
    p.add_argument("threads", nargs="+")
    add_composition_flags(p)
    p.add_argument("--lhs-abstract", type=kinds, default=parse_kinds("stp"))
    p.add_argument("--rhs-abstract", type=kinds, default=parse_kinds("jact,stp"))
    p.add_argument("--divergence-sensitive", action="store_true")
    p.add_argument("--unrooted", action="store_true", help="Skip the root condition")
    p.add_argument("--no-tau-prefix", action="store_true", help="Compare the roots without a leading silent step")
    p.add_argument("--json", action="store_true", help="One JSON verdict per thread")
    p.add_argument("--jobs", type=int, default=1)
    p.add_argument("--record", action="store_true", help="Store verdicts in the results database")
    p.set_defaults(func=cmd_check)

    p = sub.add_parser("explore", help="Print state space statistics and deadlocks")
    p.add_argument("thread")
    add_composition_flags(p)
    p.add_argument("--raw", action="store_true", help="Skip termination normalization")
    p.add_argument("--fail-on-deadlock", action="store_true")
    p.set_defaults(func=cmd_explore)

    p = sub.add_parser("simulate", help="Run the performance harness and write CSV")
    p.add_argument("thread")
    p.add_argument("--maxlen", type=int_list, default=[0])
    p.add_argument("--strategy", type=strategy_list, default=["breadth"])
    p.add_argument("--seed", type=int_list, default=[0])
    p.add_argument("--env", default="all-true", help="all-true|all-false|random|prob|fixed:TTF")
    p.add_argument("--latency-msg", type=int, default=4)
    p.add_argument("--latency-reply", type=int, default=4)
    p.add_argument("--exec-time", type=int, default=1)
    p.add_argument("--horizon", type=int, default=10_000)
    p.add_argument("--horizon-kind", choices=["steps", "events"], default="steps")
    p.add_argument("--capacity-msg", type=int, default=None)
    p.add_argument("--capacity-reply", type=int, default=None)
    p.add_argument("--csv", help="Write the CSV here instead of stdout")
    p.add_argument("--log", help="Write the event log of the first configuration here")
    p.add_argument("--record", action="store_true", help="Store rows in the results database")
    p.set_defaults(func=cmd_simulate)
    return parser


def run(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except ThreadSpecError as e:
        for error in e.errors:
            print(f"error: {error}", file=sys.stderr)
        return EXIT_USAGE
    except (UsageError, ValidationError, ValueError) as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_USAGE
    except (StateBoundExceeded, DegenerateRunError) as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_USAGE
    except ProtocolViolation as e:
        logger.error(f"Protocol violation: {e}", exc_info=True)
        return EXIT_USAGE
    except Exception as e:
        logger.error(f"Unexpected error in {args.command}: {e}", exc_info=True)
        return EXIT_USAGE


def main():
    logging.basicConfig(level=LOG_LEVEL, format="%(levelname)s %(name)s: %(message)s")
    sys.exit(run())


if __name__ == "__main__":
    main()
