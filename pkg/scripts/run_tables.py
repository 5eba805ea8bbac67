#!/usr/bin/env python3
"""Run one or more replicated experiments from config files.

Full-scale runs (1000 replications over five grids) take hours on a laptop;
use --reps / --grids to downscale while keeping everything else identical.

    python scripts/run_tables.py scripts/configs/one_component_gaussian.cfg \
        --out results/ --reps 100 --grids 25x25,50x50 --jobs 4
"""

import argparse
import dataclasses
import os
import sys
import time

from lad2d.montecarlo import emit_table, read_experiment_config, run_experiment
from lad2d.model import Grid


def main() -> int:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("configs", nargs="+", help="experiment config files")
    parser.add_argument("--out", required=True, help="output directory")
    parser.add_argument("--reps", type=int, default=None, help="override replication count")
    parser.add_argument("--grids", default=None, help="override grid list, e.g. 25x25,50x50")
    parser.add_argument("--jobs", type=int, default=1, help="worker processes")
    args = parser.parse_args()

    os.makedirs(args.out, exist_ok=True)
    for path in args.configs:
        with open(path) as fh:
            spec = read_experiment_config(fh.read())
        if args.reps is not None:
            spec = dataclasses.replace(spec, replications=args.reps)
        if args.grids is not None:
            grids = tuple(
                Grid(int(t), int(s))
                for t, _, s in (g.strip().partition("x") for g in args.grids.split(","))
            )
            spec = dataclasses.replace(spec, grids=grids)
        stem = os.path.splitext(os.path.basename(path))[0]
        started = time.time()
        result = run_experiment(spec, n_jobs=args.jobs)
        elapsed = time.time() - started
        for fmt, ext in (("csv", "csv"), ("text", "txt")):
            out_path = os.path.join(args.out, f"{stem}.{ext}")
            with open(out_path, "w", newline="\n") as fh:
                fh.write(emit_table(result, fmt))
        print(f"{stem}: {spec.replications} reps x {len(spec.grids)} grids "
              f"in {elapsed:.0f}s -> {args.out}/{stem}.csv")
    return 0


if __name__ == "__main__":
    sys.exit(main())
