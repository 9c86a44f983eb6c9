"""Command line entry point.

    leo-precoding run --config campaign.yaml --out results/
    leo-precoding plot-data --records results/records.csv --kind sir_cdf --out plots/
    leo-precoding config [--config campaign.yaml]

Exit codes: 0 success, 1 configuration error, 2 runtime error.
"""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

import yaml

from .config import CELL_AXES, ConfigError, config_from_dict, parse_config
from .export import PLOT_KINDS, emit_plot_data, export_results, parse_filter, read_results
from .simulation import run_campaign

log = logging.getLogger("leo_precoding")

_AXIS_KEYS = {"space": "spaces", "terminal": "terminals", "scenario": "scenarios",
              "propagation": "propagations", "power_dbw_mhz": "power_density_dbw_mhz",
              "scheme": "schemes", "normalization": "normalizations"}


def _load(args) -> "CampaignConfig":  # noqa: F821
    overrides = {"seed": args.seed, "iterations": getattr(args, "iterations", None)}
    if args.config:
        cfg = parse_config(args.config, overrides)
    else:
        cfg = config_from_dict({}, overrides)
    cells = getattr(args, "cells", None)
    if cells:
        try:
            flt = parse_filter(cells)
        except ValueError as exc:
            raise ConfigError(f"--cells: {exc}") from None
        data = cfg.model_dump()
        for key, values in flt.items():
            data[_AXIS_KEYS[key]] = values
        cfg = config_from_dict(data)
    return cfg


def cmd_run(args) -> int:
    cfg = _load(args)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    (out / "config_echo.yaml").write_text(yaml.safe_dump(cfg.echo(), sort_keys=True))
    log.info("running %d cells x %d iterations (fingerprint %s)", len(cfg.cells()),
             cfg.iterations, cfg.fingerprint())
    result = run_campaign(cfg, workers=args.threads)
    path = export_results(result.records, out / f"records.{args.format}", args.format)
    result.mean_se().to_csv(out / "mean_se.csv", index=False, float_format="%.17g",
                            lineterminator="\n")
    if result.skipped:
        with (out / "skipped.txt").open("w") as fh:
            for it, cell, msg in result.skipped:
                fh.write(f"{it}\t{'/'.join(map(str, cell))}\t{msg}\n")
    print(f"wrote {len(result.records)} records to {path}")
    return 0


def cmd_plot_data(args) -> int:
    records = read_results(args.records)
    try:
        flt = parse_filter(args.filter)
    except ValueError as exc:
        raise ConfigError(f"--filter: {exc}") from None
    path = emit_plot_data(records, args.kind, args.out, flt)
    print(f"wrote {path}")
    return 0


def cmd_config(args) -> int:
    cfg = _load(args)
    sys.stdout.write(yaml.safe_dump(cfg.echo(), sort_keys=True))
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="leo-precoding", description=__doc__.split("\n")[0])
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="run a Monte Carlo campaign")
    run.add_argument("--config", type=Path)
    run.add_argument("--out", type=Path, default=Path("results"))
    run.add_argument("--format", choices=("csv", "jsonl"), default="csv")
    run.add_argument("--seed", type=int)
    run.add_argument("--iterations", type=int)
    run.add_argument("--cells", help=f"restrict axes, e.g. 'scheme=mmse;normalization=spc' "
                                     f"(keys: {', '.join(CELL_AXES)})")
    run.add_argument("--threads", type=int, default=1,
                     help="worker processes; output is identical for any value")
    run.set_defaults(func=cmd_run)

    plot = sub.add_parser("plot-data", help="emit plot-ready data and a plotting script")
    plot.add_argument("--records", type=Path, required=True)
    plot.add_argument("--kind", choices=PLOT_KINDS, required=True)
    plot.add_argument("--filter")
    plot.add_argument("--out", type=Path, default=Path("plots"))
    plot.set_defaults(func=cmd_plot_data)

    conf = sub.add_parser("config", help="print the fully materialised configuration")
    conf.add_argument("--config", type=Path)
    conf.add_argument("--seed", type=int)
    conf.set_defaults(func=cmd_config)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 1
    except Exception as exc:  # noqa: BLE001
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
