"""``linres`` command line: one subcommand per experiment kind.

Exit codes: 0 success, 2 invalid configuration, 3 a requested numerical
verification failed (outputs are still written).
"""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

from .config import EXPERIMENTS, ConfigError, load, validate
from .engine import PlanError

log = logging.getLogger("linres")

EXIT_OK, EXIT_CONFIG, EXIT_VERIFY = 0, 2, 3


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="linres", description=__doc__.splitlines()[0])
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True)
    for name in EXPERIMENTS:
        p = sub.add_parser(name)
        p.add_argument("--config", help="TOML run configuration")
        p.add_argument("--seed", type=int, help="override the configured seed")
        p.add_argument("--out", help="output directory (overrides output.dir)")
        p.add_argument("--threads", type=int, help="worker threads for independent runs")
        if name == "compress":
            p.add_argument("--n", type=int, help="chain length")
            p.add_argument("--steps", type=int, help="Trotter steps")
    return ap


def resolve_config(args) -> dict:
    """Load (or default) the configuration, apply flag overrides, re-validate."""
    if args.config:
        cfg = load(args.config)
    elif args.command in ("compress", "oracle"):
        cfg = validate({"comment": f"{args.command} with defaults", "experiment": args.command})
    else:
        raise ConfigError("--config is required for this subcommand", "config")
    if cfg["experiment"] != args.command:
        raise ConfigError(f"config is for {cfg['experiment']!r}, not {args.command!r}",
                          "experiment")
    if args.seed is not None:
        cfg["seed"] = args.seed
    if args.out is not None:
        cfg["output"]["dir"] = args.out
    if args.threads is not None:
        cfg["threads"] = args.threads
    if args.command == "compress":
        if args.n is not None:
            cfg["compress"]["n"] = args.n
        if args.steps is not None:
            cfg["compress"]["steps"] = args.steps
    return validate(cfg)


def write_outputs(out_dir: Path, files: dict):
    out_dir.mkdir(parents=True, exist_ok=True)
    for name, text in sorted(files.items()):
        with open(out_dir / name, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s")
    try:
        cfg = resolve_config(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG

    from .experiments import run  # heavy imports only after the config is known good

    try:
        result = run(cfg)
    except (PlanError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    out = Path(cfg["output"]["dir"])
    write_outputs(out, result.files)
    log.info("wrote %d files to %s", len(result.files), out)
    for key, val in result.report.items():
        print(f"{key}: {val}")
    if result.verified is False:
        print("verification FAILED", file=sys.stderr)
        return EXIT_VERIFY
    return EXIT_OK


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
