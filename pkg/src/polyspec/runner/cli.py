"""``polyspec`` command line: ``run`` and ``compare`` subcommands."""
from __future__ import annotations

import argparse
import json
import logging
import sys

from ..errors import ConfigError, PolyspecError
from .config import OUTPUT_KINDS, ExperimentConfig, load_config
from .pipeline import compare_against_oracle, run


def _add_common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="JSON configuration file; flags override its fields")
    p.add_argument("--dim", type=int, dest="d", help="lattice dimension (2 or 3)")
    p.add_argument("--grid", type=int, dest="L", help="sites per axis L")
    p.add_argument("--crystal", type=int, dest="Lc", help="crystallite edge length Lc")
    p.add_argument("--samples", type=int)
    p.add_argument("--seed", type=int)
    p.add_argument("--bins", type=int, help="spectral function bins K")
    p.add_argument("--sigma1-re", type=float)
    p.add_argument("--sigma1-im", type=float)
    p.add_argument("--sigma2-re", type=float)
    p.add_argument("--sigma2-im", type=float)
    p.add_argument("--e0-axis", type=int, help="1-based axis of the applied field")
    p.add_argument("--measure", type=int, nargs=2, metavar=("J", "K"), help="measure indices")
    p.add_argument("--outputs", nargs="+", choices=OUTPUT_KINDS)
    p.add_argument("--out", help="output directory")
    p.add_argument("--workers", type=int, help="worker processes")
    p.add_argument("-v", "--verbose", action="store_true")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="polyspec",
        description="Spectral measures and effective conductivity of random uniaxial polycrystals.",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    _add_common(sub.add_parser("run", help="run an experiment and write its artifacts"))
    _add_common(sub.add_parser("compare", help="compare the spectral path against the direct solver"))
    return parser


def config_from_args(args: argparse.Namespace) -> ExperimentConfig:
    base = load_config(args.config) if args.config else ExperimentConfig()
    overrides = {
        key: getattr(args, key)
        for key in ("d", "L", "Lc", "samples", "seed", "bins", "e0_axis", "out", "workers")
    }
    s1, s2 = list(base.sigma1), list(base.sigma2)
    for pair, name in ((s1, "sigma1"), (s2, "sigma2")):
        re, im = getattr(args, f"{name}_re"), getattr(args, f"{name}_im")
        if re is not None:
            pair[0] = re
        if im is not None:
            pair[1] = im
    overrides["sigma1"], overrides["sigma2"] = s1, s2
    if args.measure is not None:
        overrides["measure"] = list(args.measure)
    if args.outputs is not None:
        overrides["outputs"] = list(args.outputs)
    return base.with_overrides(**overrides)


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = config_from_args(args)
        if args.command == "run":
            result = run(cfg)
            for name, path in sorted(result.artifacts.items()):
                print(f"{name}: {path}")
            return result.status
        report = compare_against_oracle(cfg)
        summary = {k: report[k] for k in ("samples", "quarantined", "sigma_star", "E", "J")}
        print(json.dumps(summary, indent=1))
        return 0
    except ConfigError as exc:
        print(f"config error at {exc}", file=sys.stderr)
        return 2
    except PolyspecError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
