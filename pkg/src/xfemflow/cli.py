"""Command-line entry point: ``xfemflow run <config>`` and ``xfemflow sweep <config> --axis <name>``."""
from __future__ import annotations

import argparse
import json
import logging
import sys
import warnings
from pathlib import Path

from .config import SWEEP_AXES, load_config
from .errors import XfemError
from .runner import run_case, run_convergence_sweep, write_results

log = logging.getLogger("xfemflow")


def _parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="xfemflow", description="FEM/XFEM potential-flow case runner")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("config", type=Path, help="JSON case configuration")
    common.add_argument("--out", type=Path, default=Path("results"), help="output directory")
    common.add_argument("--workers", type=int, default=1, help="parallel sweep points")
    sub.add_parser("run", parents=[common], help="run one case")
    sw = sub.add_parser("sweep", parents=[common], help="convergence sweep along one axis")
    sw.add_argument("--axis", required=True, choices=SWEEP_AXES)
    sw.add_argument("--values", type=float, nargs="+", help="override the axis values in the config")
    return p


def main(argv=None) -> int:
    args = _parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    if args.workers < 1:
        print("error: --workers must be at least 1", file=sys.stderr)
        return 2
    try:
        cfg = load_config(args.config)
        if args.command == "run":
            rows = run_case(cfg)
            paths = write_results(rows, args.out, cfg.name, cfg)
        else:
            with warnings.catch_warnings(record=True) as caught:
                warnings.simplefilter("always")
                rows, slopes = run_convergence_sweep(cfg, args.axis, args.values, args.workers)
            for w in caught:
                print(f"warning: {w.message}", file=sys.stderr)
            paths = write_results(rows, args.out, f"{cfg.name}_sweep_{args.axis}", cfg,
                                  {"axis": args.axis, "slopes": slopes})
            if slopes:
                print(json.dumps({"slopes": slopes}))
    except XfemError as exc:
        name = args.config.name
        print(f"error [{name}]: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 2
    for path in paths:
        print(path)
    return 0


if __name__ == "__main__":
    sys.exit(main())
