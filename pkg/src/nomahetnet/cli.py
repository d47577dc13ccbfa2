"""Command line entry point: ``sim run`` and ``sim cdf``."""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

from .config import ConfigError, NetworkConfig, load_json
from .harness import (
    CDF_COLUMNS,
    SCHEMES,
    CampaignSpec,
    cdf_rows,
    emit,
    run_campaign,
    user_rate_samples,
)

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_IO = 3

CAMPAIGN_KEYS = {"sweep", "schemes", "trials", "mues_per_small_cell", "paired"}

log = logging.getLogger("nomahetnet")


def parse_sweep(text: str) -> tuple[str, list[str]]:
    name, sep, values = text.partition("=")
    if not sep or not name or not values:
        raise ConfigError(f"--sweep expects field=v1,v2,... (got {text!r})")
    return name.strip(), [v.strip() for v in values.split(",") if v.strip()]


def build_spec(doc: dict, args: argparse.Namespace) -> CampaignSpec:
    """Merge the JSON document with command line overrides."""
    net = {k: v for k, v in doc.items() if k not in CAMPAIGN_KEYS}
    if args.seed is not None:
        net["seed"] = args.seed
    base = NetworkConfig.from_dict(net)

    sweep_field, sweep_values = None, []
    sweep = doc.get("sweep")
    if sweep is not None:
        if not isinstance(sweep, dict) or "field" not in sweep or "values" not in sweep:
            raise ConfigError('"sweep" must look like {"field": ..., "values": [...]}')
        sweep_field, sweep_values = sweep["field"], list(sweep["values"])
    if getattr(args, "sweep", None):
        sweep_field, sweep_values = parse_sweep(args.sweep)

    schemes = doc.get("schemes", ["noma-eq", "ofdma-eq"])
    if args.schemes:
        schemes = [s.strip() for s in args.schemes.split(",") if s.strip()]
    trials = args.trials if args.trials is not None else doc.get("trials", 100)
    return CampaignSpec(
        base=base,
        schemes=list(schemes),
        trials=int(trials),
        seed=base.seed,
        sweep_field=sweep_field,
        sweep_values=sweep_values,
        mues_per_small_cell=doc.get("mues_per_small_cell"),
        paired=bool(doc.get("paired", False)),
    )


def cmd_run(args: argparse.Namespace) -> int:
    spec = build_spec(load_json(args.config), args)
    result = run_campaign(spec, workers=args.workers)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    path = emit(result.rows, args.format, out / f"sweep.{args.format}")
    print(path)
    return EXIT_OK


def cmd_cdf(args: argparse.Namespace) -> int:
    spec = build_spec(load_json(args.config), args)
    spec.sweep_field, spec.sweep_values = None, []
    result = run_campaign(spec, workers=args.workers, keep_reports=True)
    samples = {s: user_rate_samples(result.reports[(0, s)]) for s in spec.schemes}
    samples = {s: v for s, v in samples.items() if v.size}
    if not samples:
        raise ConfigError("every trial was infeasible; no rates to summarize")
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    path = emit(cdf_rows(samples, args.points), args.format, out / f"cdf.{args.format}", CDF_COLUMNS)
    print(path)
    return EXIT_OK


def make_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="sim", description="NOMA HetNet energy-efficiency simulator")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--config", required=True, help="JSON scenario/campaign document")
        p.add_argument("--out", required=True, help="output directory")
        p.add_argument("--seed", type=int, help="master seed (overrides the config)")
        p.add_argument("--trials", type=int, help="Monte Carlo trials per point")
        p.add_argument("--schemes", help=f"comma separated subset of {','.join(SCHEMES)}")
        p.add_argument("--format", choices=["csv", "json"], default="csv")
        p.add_argument("--workers", type=int, default=1, help="worker processes")

    run = sub.add_parser("run", help="sweep one parameter and write mean metrics")
    common(run)
    run.add_argument("--sweep", help="field=v1,v2,...")
    run.set_defaults(func=cmd_run)

    cdf = sub.add_parser("cdf", help="per-user rate CDF at the base configuration")
    common(cdf)
    cdf.add_argument("--points", type=int, default=100, help="rate grid size")
    cdf.set_defaults(func=cmd_cdf)
    return parser


def main(argv=None) -> int:
    logging.basicConfig(level=logging.WARNING, format="%(levelname)s %(message)s")
    args = make_parser().parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        log.error("config error: %s", exc)
        return EXIT_CONFIG
    except OSError as exc:
        log.error("I/O error: %s", exc)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
