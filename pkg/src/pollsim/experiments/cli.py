"""Command-line interface: run scenarios, sweep parameters, plot tables."""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from .config import ConfigError, apply_overrides, load_config
from .output import (
    read_csv,
    svg_errorbar_chart,
    svg_line_chart,
    svg_quartile_chart,
    write_csv,
)
from .runner import aggregate, run_scenario, summaries_table, sweep

EXIT_OK, EXIT_ERROR, EXIT_CONFIG, EXIT_IO = 0, 1, 2, 3


def _parse_overrides(pairs) -> dict:
    out = {}
    for pair in pairs or ():
        if "=" not in pair:
            raise ConfigError(f"override {pair!r} is not key=value")
        key, _, value = pair.partition("=")
        out[key.strip()] = value.strip()
    return out


def _load(args) -> "ScenarioConfig":
    config = load_config(args.scenario)
    overrides = _parse_overrides(getattr(args, "set", None))
    if getattr(args, "seed", None):
        overrides["seeds"] = repr(tuple(args.seed))
    if getattr(args, "workers", None):
        overrides["workers"] = str(args.workers)
    if getattr(args, "out", None):
        overrides["out_dir"] = args.out
    return apply_overrides(config, overrides)


def _cmd_run(args) -> int:
    config = _load(args)
    result = run_scenario(config)
    out = Path(config.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    table = summaries_table(result.summaries)
    path = out / f"{config.name}_summaries.csv"
    write_csv(table, path)
    for s in result.summaries:
        alarm = ("none" if s.first_alarm_time is None
                 else f"{s.first_alarm_time / 86400:.1f} d")
        print(f"seed {s.seed}: polls={s.polls_total} "
              f"alarms={s.alarms_total} first_alarm={alarm} "
              f"foothold_max={s.max_avg_foothold:.3f} "
              f"irrecoverable={s.irrecoverable}")
    print(f"wrote {path}")
    return EXIT_OK


def _cmd_sweep(args) -> int:
    config = _load(args)
    key, _, values_text = args.param.partition("=")
    if not values_text:
        raise ConfigError("--param must be key=v1,v2,...")
    from .config import _coerce
    values = [_coerce(key.strip(), v) for v in values_text.split(",")]
    table, results = sweep(config, key.strip(), values, metric=args.metric)
    out = Path(config.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    csv_path = out / f"{config.name}_sweep_{key.strip()}.csv"
    write_csv(table, csv_path)
    for res in results:
        per_seed = out / (f"{config.name}_{key.strip()}="
                          f"{res.config.__getattribute__(key.strip())}"
                          f"_summaries.csv")
        write_csv(summaries_table(res.summaries), per_seed)
    svg_path = csv_path.with_suffix(".svg")
    svg_errorbar_chart(table, "key", ("min", "mean", "max"), svg_path,
                       title=f"{args.metric} vs {key.strip()}",
                       xlabel=key.strip(), ylabel=args.metric)
    print(f"wrote {csv_path} and {svg_path}")
    return EXIT_OK


def _cmd_plot(args) -> int:
    table = read_csv(args.table)
    style = args.style
    x = args.x or table.columns[0]
    if style == "line":
        ys = args.y or [c for c in table.columns[1:]]
        svg_line_chart(table, x, ys, args.output, title=args.title,
                       logy=args.logy)
    elif style == "quartile":
        svg_quartile_chart(table, x, path=args.output, title=args.title)
    else:
        svg_errorbar_chart(table, x, path=args.output, title=args.title,
                           logy=args.logy)
    print(f"wrote {args.output}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="pollsim",
        description="Deterministic sampled-voting preservation simulator")
    sub = parser.add_subparsers(dest="command", required=True)

    run_p = sub.add_parser("run", help="run a scenario file")
    run_p.add_argument("scenario")
    run_p.add_argument("--seed", type=int, nargs="+",
                       help="override the seed list")
    run_p.add_argument("--workers", type=int)
    run_p.add_argument("--out", help="output directory")
    run_p.add_argument("--set", nargs="*", metavar="KEY=VALUE",
                       help="override scenario keys")
    run_p.set_defaults(fn=_cmd_run)

    sweep_p = sub.add_parser("sweep", help="sweep one scenario parameter")
    sweep_p.add_argument("scenario")
    sweep_p.add_argument("--param", required=True, metavar="KEY=V1,V2,...")
    sweep_p.add_argument("--metric", default="first_alarm_time")
    sweep_p.add_argument("--seed", type=int, nargs="+")
    sweep_p.add_argument("--workers", type=int)
    sweep_p.add_argument("--out")
    sweep_p.add_argument("--set", nargs="*", metavar="KEY=VALUE")
    sweep_p.set_defaults(fn=_cmd_sweep)

    plot_p = sub.add_parser("plot", help="render a CSV table to SVG")
    plot_p.add_argument("table")
    plot_p.add_argument("-o", "--output", required=True)
    plot_p.add_argument("--style", default="line",
                        choices=("line", "quartile", "errorbar"))
    plot_p.add_argument("--x")
    plot_p.add_argument("--y", nargs="*")
    plot_p.add_argument("--title", default="")
    plot_p.add_argument("--logy", action="store_true")
    plot_p.set_defaults(fn=_cmd_plot)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.fn(args)
    except ConfigError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except OSError as exc:
        print(f"i/o error: {exc}", file=sys.stderr)
        return EXIT_IO
    except Exception as exc:   # noqa: BLE001 - CLI boundary
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
