"""Command line entry point ``evans-lab``."""

from __future__ import annotations

import argparse
import logging
import sys

from .harness import RUNNERS, ConfigError, SweepConfig, rows_to_csv


def _floats(text: str) -> list[float]:
    try:
        return [float(t) for t in text.split(",") if t.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma separated numbers, got {text!r}") from None


def _decades(text: str) -> tuple[float, float]:
    try:
        lo, hi = (float(t) for t in text.split(":"))
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected LO:HI, got {text!r}") from None
    if hi < lo:
        raise argparse.ArgumentTypeError(f"empty decade range {text!r}")
    return lo, hi


def _lambdas(text: str) -> list[str]:
    return [t for t in text.split(",") if t.strip()]


# Flag name -> SweepConfig field.
_OVERRIDES = {
    "problem": "problem",
    "method": "method",
    "expm": "expm_backend",
    "h": "h_list",
    "lambdas": "lambda_list",
    "lambda_decades": "lambda_decades",
    "points_per_decade": "points_per_decade",
    "L": "L",
    "coords": "coords",
    "quantity": "quantity",
    "out": "output_path",
    "workers": "workers",
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="evans-lab", description="Error sweeps for Evans-function shooting.")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in RUNNERS:
        sp = sub.add_parser(name)
        sp.add_argument("--config", help="JSON file with SweepConfig fields")
        sp.add_argument("--problem")
        sp.add_argument("--method", choices=["magnus4", "expmid", "gl4"])
        sp.add_argument("--expm", choices=["eig", "pade"])
        sp.add_argument("--h", type=_floats, help="step sizes, e.g. 0.1,0.05")
        sp.add_argument("--lambdas", type=_lambdas, help="explicit lambda list, e.g. 1e4j,100j")
        sp.add_argument("--lambda-decades", type=_decades, help="exponent range LO:HI of i*10^p")
        sp.add_argument("--points-per-decade", type=int)
        sp.add_argument("--L", type=float)
        sp.add_argument("--coords", choices=["transformed", "raw"])
        if name == "order-study":
            sp.add_argument("--quantity", choices=["local", "global", "evans"])
        sp.add_argument("--workers", type=int)
        sp.add_argument("--out", help="output CSV path (default: stdout)")
    return parser


def make_config(args: argparse.Namespace) -> SweepConfig:
    cfg = SweepConfig.from_json(args.config) if args.config else SweepConfig()
    for flag, fld in _OVERRIDES.items():
        v = getattr(args, flag, None)
        if v is not None:
            setattr(cfg, fld, v)
    cfg.normalize()
    return cfg


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = make_config(args)
        to_stdout = cfg.output_path is None
        rows = RUNNERS[args.command](cfg)
    except ConfigError as exc:
        print(f"evans-lab: config error: {exc}", file=sys.stderr)
        return 2
    if to_stdout:
        sys.stdout.write(rows_to_csv(rows))
    failed = sum(1 for r in rows if r.error)
    if failed:
        print(f"evans-lab: {failed} of {len(rows)} rows failed", file=sys.stderr)
    return 0


if __name__ == "__main__":
    sys.exit(main())
