"""Command-line front end.

Exit codes: 0 success, 2 invalid configuration or unwritable output,
3 numerical blow-up, 4 verification failure (identity residual above
tolerance).
"""

from __future__ import annotations

import argparse
import sys

from .errors import ConfigError
from .experiments import EXPERIMENT_KINDS, load_config, run_experiment


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(
        prog="poiseflow",
        description="Spectral decay / stability experiments for perturbations "
                    "of plane Poiseuille flow.")
    sub = ap.add_subparsers(dest="command", required=True)
    for kind in EXPERIMENT_KINDS:
        sp = sub.add_parser(kind, help=f"run the {kind} experiment")
        sp.add_argument("--config", required=True, help="JSON config file")
        sp.add_argument("--out", default=None, help="output directory "
                        "(overrides the config's output_dir)")
        sp.add_argument("--workers", type=int, default=None,
                        help="worker pool size for independent cells")
        sp.add_argument("--seed", type=int, default=None,
                        help="RNG seed (overrides the config's seed)")
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = load_config(args.config)
    except ConfigError as e:
        print(f"error: {e}", file=sys.stderr)
        return 2
    if cfg.experiment != args.command:
        print(f"error: config declares experiment {cfg.experiment!r} but the "
              f"{args.command!r} subcommand was invoked", file=sys.stderr)
        return 2
    try:
        manifest, code = run_experiment(cfg, out_dir=args.out,
                                        workers=args.workers, seed=args.seed)
    except ConfigError as e:
        print(f"error: {e}", file=sys.stderr)
        return 2
    if manifest.failure:
        print(f"run failed: {manifest.failure}", file=sys.stderr)
    else:
        print(f"{cfg.experiment}: done, manifest in "
              f"{args.out or cfg.output_dir}/manifest.json")
    return code


if __name__ == "__main__":
    raise SystemExit(main())
