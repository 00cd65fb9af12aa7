"""Command line entry point: ``atvmc {ground-state,quench,compare,validate-config}``.

Exit codes: 0 success, 2 configuration error, 3 numerical failure.
"""

from __future__ import annotations

import argparse
import logging
import sys

from .config import ExperimentConfig
from .errors import CapacityError, ConfigError, NumericalError

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_NUMERICAL = 3


def _parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="atvmc", description=__doc__.splitlines()[0])
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)
    for name, helptext in [
        ("validate-config", "parse and validate a configuration file"),
        ("ground-state", "optimize the g1 ground state and write a checkpoint"),
        ("quench", "run the (adaptive) tVMC quench from a checkpoint"),
        ("compare", "run a quench and compare with exact dynamics (small N)"),
    ]:
        sp = sub.add_parser(name, help=helptext)
        sp.add_argument("config")
        sp.add_argument("--set", dest="overrides", action="append", default=[], metavar="SECTION.KEY=VALUE")
        if name != "validate-config":
            sp.add_argument("--checkpoint", default=None, help="checkpoint path (default: <output>/checkpoint.json)")
    return p


def main(argv=None) -> int:
    args = _parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    from . import runner

    try:
        cfg = ExperimentConfig.from_file(args.config, args.overrides)
        if args.command == "validate-config":
            print(f"{args.config}: ok (hash {cfg.config_hash()[:12]})")
        elif args.command == "ground-state":
            path, result = runner.run_ground_state(cfg, args.checkpoint)
            print(f"checkpoint: {path}  E={result.energy:.12g}  Var(H)={result.variance:.3e}")
        elif args.command == "quench":
            res = runner.run_quench(cfg, args.checkpoint)
            print(f"trajectory: {res.trajectory}")
            if res.events:
                print(f"events: {res.events}")
        elif args.command == "compare":
            path, rows = runner.run_compare(cfg, args.checkpoint)
            worst = max((abs(r[3]) for r in rows), default=0.0)
            ok = all(r[7] for r in rows)
            print(f"comparison: {path}  max|dsigma_x|={worst:.3e}  bound_holds={ok}")
    except (ConfigError, CapacityError) as exc:
        print(f"{args.config}: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except NumericalError as exc:
        print(f"numerical failure: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
