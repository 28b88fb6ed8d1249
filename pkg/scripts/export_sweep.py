#!/usr/bin/env python
"""
Script to run a performance sweep over every thread file in a directory and
store the rows in the results database.

Usage:
    python scripts/export_sweep.py <directory> [--csv PATH]

Examples:
    # Sweep the bundled threads and write one combined CSV
    python scripts/export_sweep.py threads/ --csv sweep.csv
"""

import argparse
import sys
from pathlib import Path

import pandas as pd

# Add project root to path
project_root = Path(__file__).parent.parent
sys.path.insert(0, str(project_root))

from src.config import DATABASE_URL
from src.schema.configs import SimConfig
from src.services.bta import ThreadSpecError, parse_spec
from src.services.results_recorder import ResultsRecorder
from src.services.simulation import DegenerateRunError, sweep, to_csv

STRATEGIES = ["breadth", "breadth+wildcard", "prob50", "prob95"]


def main():
    parser = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    parser.add_argument("directory", type=Path)
    parser.add_argument("--csv", type=Path)
    parser.add_argument("--maxlen", default="0,1,2,3")
    parser.add_argument("--seeds", default="0,1,2")
    args = parser.parse_args()

    maxlens = [int(m) for m in args.maxlen.split(",")]
    seeds = [int(s) for s in args.seeds.split(",")]
    base = SimConfig.model_validate({"environment": {"kind": "prob"}, "horizon": 2000})
    recorder = ResultsRecorder(DATABASE_URL)

    tables = []
    for path in sorted(args.directory.glob("*.bta")):
        print(f"Processing: {path}")
        try:
            handle = parse_spec(path.read_text()).handle()
            table = sweep(handle, base, maxlens, STRATEGIES, seeds, thread_name=path.stem)
        except (ThreadSpecError, DegenerateRunError) as e:
            print(f"  ✗ skipped: {e}")
            continue
        recorder.record_sweep(table)
        tables.append(table)
        print(f"  ✓ {len(table)} rows")

    if args.csv and tables:
        args.csv.write_text(to_csv(pd.concat(tables, ignore_index=True)))
        print(f"Wrote {args.csv}")


if __name__ == "__main__":
    main()
