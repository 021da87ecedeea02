"""Command line front-end.

    oqslab run CONFIG [--out DIR] [--jobs N] [--seed S]
    oqslab compare CONFIG [--out DIR]
    oqslab check [--only FILTER]

run executes one TOML scenario (or its [sweep], with --jobs concurrent
sub-runs, each in its own subdirectory). compare produces the
side-by-side two-picture report for composite-capable configs. check
runs the built-in acceptance criteria.

Output directory precedence: --out, then the config's output.dir, then
$OQS_OUT/<name>, then ./oqslab-out/<name>.

Exit codes: 0 success, 1 failed built-in assertion or criterion,
2 configuration problem, 3 numerical failure.
"""

import argparse
import sys


def build_parser():
    ap = argparse.ArgumentParser(
        prog="oqslab",
        description="open-quantum-system scenario runner and checks")
    sub = ap.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="execute a TOML scenario config")
    p_run.add_argument("config", help="path to the scenario TOML file")
    p_run.add_argument("--out", default=None, metavar="DIR",
                       help="output directory (overrides config/OQS_OUT)")
    p_run.add_argument("--jobs", type=int, default=1, metavar="N",
                       help="concurrent sweep sub-runs (default 1)")
    p_run.add_argument("--seed", type=int, default=None, metavar="S",
                       help="override the config's seed")

    p_cmp = sub.add_parser(
        "compare", help="two-picture comparison report for a config")
    p_cmp.add_argument("config", help="path to the scenario TOML file")
    p_cmp.add_argument("--out", default=None, metavar="DIR")

    p_chk = sub.add_parser("check", help="run the acceptance criteria")
    p_chk.add_argument("--only", default=None, metavar="FILTER",
                       help="criterion number or name substring")
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    if args.command == "run":
        from .scenarios import run_config_file
        if args.jobs < 1:
            print("error: --jobs must be >= 1")
            return 2
        return run_config_file(args.config, out_dir=args.out,
                               jobs=args.jobs, seed=args.seed)
    if args.command == "compare":
        from .scenarios import compare_config_file
        return compare_config_file(args.config, out_dir=args.out)
    from .checks import run_checks
    return run_checks(only=args.only)


if __name__ == "__main__":
    sys.exit(main())
