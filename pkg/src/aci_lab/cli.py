"""Command-line entry point: ``aci-lab <subcommand> [--config PATH] ...``.

Exit status is 0 on success, 1 when an invariant or in-run assertion fails
and 2 on configuration or I/O errors.
"""
from __future__ import annotations

import argparse
import logging
import sys
from typing import List, Optional

from .config import KINDS, OUT_DIR_ENV, load_config, resolve
from .experiments import run

log = logging.getLogger("aci_lab")

HELP = {
    "bounds": "normalized JaKoB curves with Random/Oracle references",
    "tails": "tail leverage m_G(B/K) for Gaussian and Pareto scores",
    "benchmark": "exact benchmark boundary and single-letter limit",
    "simulate": "policy simulation (top/random/oracle) against the bounds",
    "figure3": "finite-length validation sweep",
    "check": "run the invariant suite; nonzero exit on failure",
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="aci-lab", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)
    for kind in KINDS:
        p = sub.add_parser(kind, help=HELP[kind])
        p.add_argument("--config", help="TOML config file")
        p.add_argument("--seed", type=int, help="master seed (u64)")
        p.add_argument("--out", help=f"output directory (default: ${OUT_DIR_ENV} or ./aci_out)")
        p.add_argument("--replications", type=int, help="Monte Carlo replications per point")
        p.add_argument("--threads", type=int, help="worker threads; does not change results")
        p.add_argument("-v", "--verbose", action="store_true")
    return parser


def main(argv: Optional[List[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    overrides = {}
    if args.seed is not None:
        overrides["seed"] = args.seed
    if args.replications is not None:
        overrides["replications"] = args.replications
    if args.threads is not None:
        overrides["threads"] = args.threads
    if args.out is not None:
        overrides["output"] = {"dir": args.out}
    try:
        if args.config:
            cfg = load_config(args.config, args.command)
            cfg = resolve(cfg.kind, _merge_overrides(cfg.data, overrides))
        else:
            cfg = resolve(args.command, overrides)
        result = run(cfg)
    except (OSError, ValueError) as exc:
        print(f"aci-lab: error: {exc}", file=sys.stderr)
        return 2
    for path in result.files:
        print(path)
    if not result.ok:
        for v in result.violations:
            print(f"FAILED: {v}", file=sys.stderr)
        return 1
    return 0


def _merge_overrides(data: dict, overrides: dict) -> dict:
    merged = dict(data)
    for key, value in overrides.items():
        if isinstance(value, dict):
            merged[key] = {**merged.get(key, {}), **value}
        else:
            merged[key] = value
    return merged


if __name__ == "__main__":
    sys.exit(main())
