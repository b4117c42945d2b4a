"""Command line entry point: ``run``, ``validate`` and ``--dump-defaults``."""

import argparse
import sys

from .config import SCHEMES, SWEEPS, dump_config, load_config
from .oracles import run_validation
from .sweep import run_sweep


def _parser():
    p = argparse.ArgumentParser(prog="emcris", description="Active RIS anti-jamming simulator.")
    p.add_argument("--dump-defaults", action="store_true", help="print the default config and exit")
    sub = p.add_subparsers(dest="command")

    run = sub.add_parser("run", help="run a Monte Carlo sweep and write CSV")
    run.add_argument("--config", required=True)
    run.add_argument("--sweep", choices=SWEEPS)
    run.add_argument("--schemes", help="comma list from " + ",".join(SCHEMES) + " (may be empty)")
    run.add_argument("--trials", type=int)
    run.add_argument("--seed", type=int)
    run.add_argument("--grid", help="comma list of sweep values")
    run.add_argument("--out", help="CSV path (default stdout)")
    run.add_argument("--jobs", type=int, default=1, help="worker processes")
    run.add_argument("--timing", action="store_true", help="record wall time (breaks byte identity)")

    val = sub.add_parser("validate", help="run the oracle suites")
    val.add_argument("--config", required=True)
    val.add_argument("--draws", type=int, default=200_000, help="sampling draws for expectation checks")
    return p


def _run(args):
    cfg = load_config(args.config)
    changes = {}
    if args.sweep is not None:
        changes["sweep"] = args.sweep
    if args.schemes is not None:
        changes["schemes"] = tuple(s.strip() for s in args.schemes.split(",") if s.strip())
    if args.trials is not None:
        changes["trials"] = args.trials
    if args.seed is not None:
        changes["seed"] = args.seed
    if args.grid is not None:
        changes["sweep_grid"] = tuple(float(v) for v in args.grid.split(",") if v.strip())
    if args.timing:
        changes["timing"] = True
    cfg = cfg.replace(**changes)
    text, recs, bad = run_sweep(cfg, jobs=args.jobs)
    if args.out:
        with open(args.out, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)
    failed = [r for r in recs if not r.ok]
    for r in failed:
        print(f"warning: {r.scheme} value={r.sweep_value} trial={r.trial} failed: {r.message}", file=sys.stderr)
    for msg in bad:
        print(f"invariant violated: {msg}", file=sys.stderr)
    return 1 if bad else 0


def _validate(args):
    cfg = load_config(args.config)
    ok = True
    for res in run_validation(cfg.seed, args.draws):
        print(f"{'PASS' if res.passed else 'FAIL'}  {res.name}: {res.detail}")
        ok &= res.passed
    return 0 if ok else 1


def main(argv=None):
    p = _parser()
    args = p.parse_args(argv)
    try:
        if args.dump_defaults:
            sys.stdout.write(dump_config())
            return 0
        if args.command == "run":
            return _run(args)
        if args.command == "validate":
            return _validate(args)
    except (OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    p.print_help(sys.stderr)
    return 2


if __name__ == "__main__":
    sys.exit(main())
