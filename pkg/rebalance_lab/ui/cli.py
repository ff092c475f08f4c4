"""Command-line interface: fit / simulate / sweep / report."""

import argparse
import dataclasses
import logging
import os
import sys
from typing import List, Optional, Sequence

from .. import __version__
from ..config.manager import ConfigManager, override
from ..config.settings import MINUTES_PER_DAY, LabSettings, parse_float
from ..core.errors import ConfigError, DataError, LabError
from ..core.facade import RebalancingLab
from ..sim.report import station_events, tradeoff_table
from ..sim.simulator import REPORT_COLUMNS
from ..utils.cache import RunManifest, manifest_path
from ..utils.helpers import write_csv
from .loading import LoadingIndicator

logger = logging.getLogger(__name__)


class _Parser(argparse.ArgumentParser):
    """Argument parser whose usage errors map onto exit code 1."""

    def error(self, message):
        self.print_usage(sys.stderr)
        raise ConfigError(message)


def _int_list(text: str) -> List[int]:
    """``"0,1,2"`` or ``"1-20"``."""
    values = []
    for part in text.split(","):
        part = part.strip()
        if not part:
            continue
        if "-" in part[1:]:
            lo, hi = part.split("-", 1)
            values.extend(range(int(lo), int(hi) + 1))
        else:
            values.append(int(part))
    if not values:
        raise argparse.ArgumentTypeError(f"empty list: {text!r}")
    return values


def _float_list(text: str) -> List[float]:
    try:
        return [parse_float(v) for v in text.split(",") if v.strip()]
    except ConfigError as e:
        raise argparse.ArgumentTypeError(str(e)) from e


def _alpha(text: str) -> float:
    try:
        return parse_float(text)
    except ConfigError as e:
        raise argparse.ArgumentTypeError(str(e)) from e


def _clock(text: str) -> int:
    hours, _, minutes = text.partition(":")
    return int(hours) * 60 + int(minutes or 0)


def _window(text: str):
    """``"07:00-22:00"`` as minutes after midnight."""
    try:
        start, end = text.split("-")
        return _clock(start), _clock(end)
    except ValueError as e:
        raise argparse.ArgumentTypeError(f"bad operating window {text!r}; expected HH:MM-HH:MM") from e


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="rebalance-lab", description="Bike-sharing rebalancing laboratory")
    parser.add_argument("--config", default="config.json", help="JSON or TOML settings file")
    parser.add_argument("--log-level", default=None, help="DEBUG, INFO, WARNING or ERROR")
    parser.add_argument("--corpus", default=None,
                        help="directory with stations.csv, rides.csv and snapshot.json (synthetic if omitted)")
    parser.add_argument("--cache-dir", "--rates-cache", dest="cache_dir", default=None,
                        help="model cache directory")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    fit = sub.add_parser("fit", help="fit rate model, geometry and customer response")
    fit.add_argument("--jobs", type=int, default=1)
    fit.add_argument("--c-max", type=float, default=None)
    fit.add_argument("--p-max", type=float, default=None)
    fit.add_argument("--dump-plateaus", default=None, help="write the plateau table of one day to this CSV")
    fit.add_argument("--day-type", choices=("weekday", "weekend"), default=None)

    sim = sub.add_parser("simulate", help="run one closed-loop simulation")
    sim.add_argument("--seed", type=int, default=None)
    sim.add_argument("--trucks", type=int, default=None)
    sim.add_argument("--alpha", type=_alpha, default=None, help="payout weight; 'inf' disables prices")
    sim.add_argument("--day-type", choices=("weekday", "weekend"), default=None)
    sim.add_argument("--branching", type=int, default=None)
    sim.add_argument("--price-horizon", type=int, default=None)
    sim.add_argument("--window", type=_window, default=None, help="truck operating window HH:MM-HH:MM")
    sim.add_argument("--event-log", default=None)
    sim.add_argument("--out", default="results/simulate.csv")
    sim.add_argument("--fit-on-the-fly", action="store_true")
    sim.add_argument("--jobs", type=int, default=1)

    sweep = sub.add_parser("sweep", help="run a grid of truck counts and payout weights over seeds")
    sweep.add_argument("--trucks", type=_int_list, default=None, help="e.g. 0,1,2,3")
    sweep.add_argument("--alphas", type=_float_list, default=None, help="e.g. inf,0.1")
    sweep.add_argument("--seeds", type=_int_list, default=None, help="e.g. 1-20")
    sweep.add_argument("--day-types", default=None, help="e.g. weekday,weekend")
    sweep.add_argument("--window", type=_window, default=None)
    sweep.add_argument("--jobs", type=int, default=None)
    sweep.add_argument("--resume", action="store_true")
    sweep.add_argument("--out", default="results/sweep.csv")
    sweep.add_argument("--fit-on-the-fly", action="store_true")

    report = sub.add_parser("report", help="aggregate run tables into the trade-off table")
    report.add_argument("runs", nargs="+", help="run CSVs from simulate or sweep")
    report.add_argument("--event-log", default=None, help="also rank stations by no-service events")
    report.add_argument("--out", default="results/report.csv")
    return parser


def _settings(args) -> LabSettings:
    settings = ConfigManager(args.config).get_settings()
    if args.log_level:
        settings = dataclasses.replace(settings, log_level=args.log_level.upper())
    if args.cache_dir:
        settings = dataclasses.replace(settings, cache=override(settings.cache, directory=args.cache_dir))
    command = args.command
    if command == "fit":
        settings = dataclasses.replace(settings, customer=override(settings.customer, c_max=args.c_max,
                                                                   p_max=args.p_max))
    if command in ("simulate", "sweep") and args.window is not None:
        start, end = args.window
        settings = dataclasses.replace(settings, routing=override(settings.routing, window_start=start,
                                                                  window_end=end))
    if command == "simulate":
        settings = dataclasses.replace(
            settings,
            sim=override(settings.sim, seed=args.seed, trucks=args.trucks, alpha=args.alpha, day_type=args.day_type),
            routing=override(settings.routing, branching=args.branching),
            pricing=override(settings.pricing, horizon=args.price_horizon),
        )
    if command == "sweep":
        day_types = tuple(d.strip() for d in args.day_types.split(",")) if args.day_types else None
        settings = dataclasses.replace(settings, sweep=override(
            settings.sweep, trucks=args.trucks, alphas=args.alphas, seeds=args.seeds, day_types=day_types,
            jobs=args.jobs))
    return settings.validate()


def _configure_logging(level: str):
    logging.basicConfig(level=getattr(logging, level.upper(), logging.INFO),
                        format="%(asctime)s %(levelname)s %(name)s: %(message)s", stream=sys.stderr)


def _manifest(lab: RebalancingLab, command: str, seed: Optional[int], outputs: dict) -> RunManifest:
    return RunManifest(command=command, config=dataclasses.asdict(lab.settings),
                       corpus_digest=lab.corpus_digest, seed=seed, version=__version__, outputs=outputs)


def cmd_fit(lab: RebalancingLab, args) -> int:
    print("🔧 Fitting models...")
    with LoadingIndicator("🔧 Fitting: "):
        _, hit = lab.fit(jobs=args.jobs)
    if hit:
        print("✅ Model cache up to date; nothing to fit")
    else:
        print(f"✅ Models written to {lab.settings.cache.directory}")
    if args.dump_plateaus:
        lab.dump_plateaus(args.dump_plateaus, range(0, MINUTES_PER_DAY, 5), args.day_type)
        print(f"📋 Plateau table written to {args.dump_plateaus}")
    return 0


def _require_models(lab: RebalancingLab, args):
    if not args.fit_on_the_fly and not lab.is_fitted():
        raise DataError("no fitted models for this corpus and settings; run 'fit' first or pass --fit-on-the-fly")
    lab.fit(jobs=getattr(args, "jobs", 1) or 1)


def cmd_simulate(lab: RebalancingLab, args) -> int:
    _require_models(lab, args)
    sim = lab.settings.sim
    print(f"🚲 Simulating {sim.day_type}: R={sim.trucks}, alpha={sim.alpha:g}, seed={sim.seed}")
    report = lab.simulate(sim, event_log=args.event_log)
    write_csv(args.out, [report.to_row(sim)], REPORT_COLUMNS)
    outputs = {"report": args.out}
    if args.event_log:
        outputs["events"] = args.event_log
    _manifest(lab, "simulate", sim.seed, outputs).write(manifest_path(args.out))
    print(f"✅ Service level {report.service_level:.4f} "
          f"({report.empty_events} empty, {report.full_events} full, payouts {report.payout_total:.2f})")
    print(f"📋 Report written to {args.out}")
    return 0


def cmd_sweep(lab: RebalancingLab, args) -> int:
    _require_models(lab, args)
    grid = lab.settings.sweep
    print(f"🔧 Sweep: trucks {list(grid.trucks)} x alphas {list(grid.alphas)} x {len(grid.seeds)} seeds")
    runs, summary = lab.sweep(args.out, resume=args.resume)
    summary_path = os.path.splitext(args.out)[0] + "-summary.csv"
    write_csv(summary_path, summary.to_dict("records"), list(summary.columns))
    _manifest(lab, "sweep", None, {"runs": args.out, "summary": summary_path}).write(manifest_path(args.out))
    print(f"✅ {len(runs)} runs; summary written to {summary_path}")
    return 0


def cmd_report(lab: RebalancingLab, args) -> int:
    table = tradeoff_table(args.runs)
    write_csv(args.out, table.to_dict("records"), list(table.columns))
    print(f"📋 Trade-off table ({len(table)} rows) written to {args.out}")
    if args.event_log:
        stations = station_events(args.event_log)
        path = os.path.splitext(args.out)[0] + "-stations.csv"
        write_csv(path, stations.to_dict("records"), list(stations.columns))
        top = stations.head(5)
        if len(top) and stations["total"].sum():
            share = top["total"].sum() / stations["total"].sum()
            print(f"📋 Top {len(top)} stations account for {share:.0%} of no-service events")
        print(f"📋 Station ranking written to {path}")
    return 0


COMMANDS = {"fit": cmd_fit, "simulate": cmd_simulate, "sweep": cmd_sweep, "report": cmd_report}


def main(argv: Optional[Sequence[str]] = None) -> int:
    """Run the CLI; returns the process exit code."""
    try:
        args = build_parser().parse_args(argv)
        settings = _settings(args)
        _configure_logging(settings.log_level)
        lab = RebalancingLab(settings=settings, corpus_dir=args.corpus)
        return COMMANDS[args.command](lab, args)
    except LabError as e:
        print(f"❌ {e}", file=sys.stderr)
        return e.exit_code
    except KeyboardInterrupt:
        print("\n⚠️ Interrupted", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
