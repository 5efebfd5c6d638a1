#!/usr/bin/env python3
"""Run the lowering pipeline end to end and write its artifacts.

Thin wrapper over meandimlab.pipeline.run_pipeline, equivalent to the
`meandimlab pipeline` subcommand; kept as a script so a fresh checkout can
drive a run without the console entry point installed.
"""

import argparse
from dataclasses import replace

from meandimlab.config import default_config, load_config
from meandimlab.pipeline import run_pipeline, write_report


def main() -> int:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--config", help="JSON config path (default: built-in D=1 run)")
    ap.add_argument("--seed", type=int, help="override the sampling seed")
    ap.add_argument("--out", default="out", help="artifact directory (default: out)")
    args = ap.parse_args()

    config = load_config(args.config) if args.config else default_config()
    if args.seed is not None:
        config = replace(config, seed=args.seed)

    report = run_pipeline(config)
    for line in report.lines():
        print(line)
    names = write_report(report, args.out)
    print(f"wrote {', '.join(names)} to {args.out}/")
    return 0 if report.passed else 1


if __name__ == "__main__":
    raise SystemExit(main())
