"""``aeropipe`` command line: simulate, serve, export, analyze, insights, config-dump.

Exit codes: 0 success, 1 operational failure, 2 usage error.
"""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path
from typing import Any, Sequence

from . import __version__
from .config import dump_toml, resolve_config
from .core import CityDayRecord, DatasetError, parse_city_day_csv

log = logging.getLogger("aeropipe")

EXIT_OK, EXIT_FAIL, EXIT_USAGE = 0, 1, 2
DATASET_HINT = (
    "The public CPCB city-day export (city_day.csv, daily data for Indian cities 2015-2020) "
    "is not bundled. Download it (it is published as the 'Air Quality Data in India' dataset on Kaggle) "
    "and pass its path with --dataset, or use --dataset synthetic for the bundled 200-row fixture."
)
INSIGHT_TABLES = ("correlation", "vehicular", "industrial", "rankings", "trends", "extremes")


class CliError(Exception):
    """Operational failure: message goes to stderr, exit code 1."""


def load_dataset(path: str) -> list[CityDayRecord]:
    if path == "synthetic":
        from .synthetic import load_fixture

        return load_fixture()
    p = Path(path)
    if not p.is_file():
        raise CliError(f"dataset not found at {p.resolve()}. {DATASET_HINT}")
    with open(p, "rb") as fh:
        try:
            return parse_city_day_csv(fh)
        except DatasetError as exc:
            raise CliError(f"{p}: {exc}") from None


def write_output(path: Path, data: bytes | str) -> None:
    from .ingest.store import atomic_write

    atomic_write(path, data.encode("utf-8") if isinstance(data, str) else data)
    print(f"wrote {path}")


# -- subcommands -------------------------------------------------------------


def cmd_simulate(args: argparse.Namespace, config: dict[str, Any]) -> int:
    from .ingest import HttpSink, IngestService, ServiceSink
    from .sensors import load_scenario_file, run_fleet

    try:
        devices, scenario, settings = load_scenario_file(args.scenario)
    except (OSError, ValueError, KeyError) as exc:
        raise CliError(f"cannot load scenario {args.scenario}: {exc}") from None
    section = config["simulate"]
    duration = float(args.duration if args.duration is not None else settings.get("duration", section["duration"]))
    url = args.url or settings.get("url") or section["url"]
    api_key = args.api_key or settings.get("api_key") or section["api_key"]

    if url:
        sinks = {d.device_id: HttpSink(url, api_key) for d in devices}
    else:
        data_dir = args.data_dir or config["serve"]["data_dir"]
        service = IngestService(data_dir, default_interval=float(config["serve"]["min_update_interval"]))
        for spec in config["serve"].get("channels", []):
            service.ensure_channel(spec)
        if not api_key:
            raise CliError("no --api-key given for the local sink")
        if not any(c.write_api_key == api_key for c in service.channels):
            service.create_channel(api_key)
        sinks = {d.device_id: ServiceSink(service, api_key) for d in devices}

    run_fleet(devices, scenario, duration, lambda d: sinks[d.device_id])
    failed = 0
    for device_id, sink in sinks.items():
        print(f"{device_id}: delivered={sink.delivered} rejected={sink.rejected} failed={sink.failed}")
        failed += sink.failed
    total = sum(s.delivered for s in sinks.values())
    print(f"total delivered={total} failed={failed}")
    return EXIT_FAIL if failed else EXIT_OK


def _service_from_config(config: dict[str, Any], data_dir: str | None = None):
    from .ingest import IngestService

    section = config["serve"]
    service = IngestService(data_dir or section["data_dir"], default_interval=float(section["min_update_interval"]))
    for spec in section.get("channels", []):
        service.ensure_channel(spec)
    return service


def cmd_serve(args: argparse.Namespace, config: dict[str, Any]) -> int:
    from .ingest import make_server

    section = config["serve"]
    service = _service_from_config(config)
    if args.channel_key and not any(c.write_api_key == args.channel_key for c in service.channels):
        service.create_channel(args.channel_key)
    server = make_server(service, section["host"], int(section["port"]))
    host, port = server.server_address[:2]
    print(f"serving on http://{host}:{port} (data dir {service.data_dir})", flush=True)
    for c in service.channels:
        print(f"  channel {c.channel_id}: {len(c.entries)} entries")
    try:
        server.serve_forever()
    except KeyboardInterrupt:
        pass
    finally:
        server.server_close()
    return EXIT_OK


def cmd_export(args: argparse.Namespace, config: dict[str, Any]) -> int:
    from .ingest import NotFound
    from .ingest.store import parse_ts

    service = _service_from_config(config, args.data_dir)
    start = parse_ts(args.start) if args.start else None
    end = parse_ts(args.end) if args.end else None
    try:
        data = service.export_csv(args.channel, start, end)
    except NotFound as exc:
        raise CliError(str(exc)) from None
    if args.out == "-":
        sys.stdout.write(data.decode("utf-8"))
    else:
        write_output(Path(args.out), data)
    return EXIT_OK


def cmd_analyze(args: argparse.Namespace, config: dict[str, Any]) -> int:
    from .config import load_toml
    from .ml.experiment import ExperimentSpec, render_table, reports_to_csv, run_experiment

    section = dict(config["analyze"])
    if args.spec:
        section.update(load_toml(args.spec))
    if args.models:
        section["models"] = args.models.split(",")
    if args.smote is not None:
        section["smote"] = {"both": [False, True], "off": [False], "on": [True]}[args.smote]
    records = load_dataset(section["dataset"])
    spec = ExperimentSpec.from_mapping(section)
    try:
        reports = run_experiment(records, spec)
    except ValueError as exc:
        raise CliError(str(exc)) from None
    print(render_table(reports))
    out_dir = Path(section["out_dir"])
    write_output(out_dir / f"{spec.task}_report.csv", reports_to_csv(reports))
    return EXIT_OK


def cmd_insights(args: argparse.Namespace, config: dict[str, Any]) -> int:
    from . import insights as ins

    section = config["insights"]
    records = load_dataset(section["dataset"])
    out_dir = Path(section["out_dir"])
    cities = list(section.get("cities") or [])
    which = INSIGHT_TABLES if args.which == "all" else (args.which,)
    for name in which:
        if name == "correlation":
            rows = ins.correlation_matrix(records).tidy()
        elif name in ("vehicular", "industrial"):
            rows = ins.rows_of(ins.group_pollution_by_city(records, name, cities or None))
        elif name == "rankings":
            rows = [
                {"group": group, "rank": i, "city": city, "score": score}
                for group in ("industrial", "vehicular")
                for i, (city, score) in enumerate(ins.city_scores(records, group)[: int(section["top_n"])], start=1)
            ]
        elif name == "trends":
            targets = cities or sorted({r.city for r in records})
            rows = []
            for city in targets:
                try:
                    series = ins.aqi_trend(records, city, args.granularity)
                except KeyError as exc:
                    raise CliError(str(exc)) from None
                rows.extend({"city": city, "period": p, "mean_aqi": v} for p, v in series)
        else:
            ex = ins.extremes(records, section["max_by"])
            rows = [
                {"extreme": "max", "city": ex.max_city, "period": ex.max_period, "aqi": ex.max_aqi},
                {"extreme": "min", "city": ex.min_city, "period": "all", "aqi": ex.min_aqi},
            ]
            max_label = "mean AQI" if section["max_by"] == "yearly-mean" else "AQI"
            for row, label in zip(rows, (max_label, "mean AQI")):
                print(f"{row['extreme']}: {row['city']} ({row['period']}) {label} {row['aqi']:.1f}")
        write_output(out_dir / f"{name}.csv", ins.tidy_csv(rows))
        write_output(out_dir / f"{name}.json", ins.to_json(rows))
    return EXIT_OK


def cmd_config_dump(args: argparse.Namespace, config: dict[str, Any]) -> int:
    sys.stdout.write(dump_toml(config))
    return EXIT_OK


# -- parser ------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="aeropipe", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"aeropipe {__version__}")
    parser.add_argument("--config", help="TOML config file (default: $AEROPIPE_CONFIG)")
    parser.add_argument("-v", "--verbose", action="store_true", help="debug logging")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="run virtual sensor devices against the ingest endpoints")
    p.add_argument("scenario", help="scenario TOML file ([[device]] entries and [scenario.<gas>] knots)")
    p.add_argument("--url", help="base URL of a running service; omit to write into --data-dir directly")
    p.add_argument("--api-key", help="channel write API key")
    p.add_argument("--duration", type=float, help="virtual seconds to simulate")
    p.add_argument("--data-dir", help="local data directory when no --url is given")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("serve", help="run the ThingSpeak-compatible HTTP service")
    p.add_argument("--host")
    p.add_argument("--port", type=int)
    p.add_argument("--data-dir", help="data directory (env AEROPIPE_DATA_DIR)")
    p.add_argument("--min-update-interval", type=float, help="seconds between accepted updates per channel")
    p.add_argument("--channel-key", help="create a channel with this write key if none uses it")
    p.set_defaults(func=cmd_serve)

    p = sub.add_parser("export", help="export a channel feed as CSV")
    p.add_argument("--channel", type=int, required=True)
    p.add_argument("--out", default="-", help="output path, '-' for stdout")
    p.add_argument("--data-dir")
    p.add_argument("--start", help="ISO-8601 lower bound (inclusive)")
    p.add_argument("--end", help="ISO-8601 upper bound (inclusive)")
    p.set_defaults(func=cmd_export)

    p = sub.add_parser("analyze", help="train and compare the model suite on a city-day dataset")
    p.add_argument("--dataset", help="city_day.csv path, or 'synthetic'")
    p.add_argument("--spec", help="experiment TOML (task, models, smote, test_fraction, seed)")
    p.add_argument("--task", choices=("regression", "classification"))
    p.add_argument("--models", help="comma-separated model names")
    p.add_argument("--smote", choices=("both", "off", "on"))
    p.add_argument("--seed", type=int)
    p.add_argument("--test-fraction", type=float)
    p.add_argument("--out-dir")
    p.set_defaults(func=cmd_analyze)

    p = sub.add_parser("insights", help="emit correlation, grouping, ranking and trend tables")
    p.add_argument("which", nargs="?", default="all", choices=("all", *INSIGHT_TABLES))
    p.add_argument("--dataset", help="city_day.csv path, or 'synthetic'")
    p.add_argument("--cities", help="comma-separated city filter")
    p.add_argument("--top-n", type=int)
    p.add_argument("--granularity", default="yearly", choices=("daily", "monthly", "yearly"))
    p.add_argument("--max-by", choices=("yearly-mean", "worst-day"))
    p.add_argument("--out-dir")
    p.set_defaults(func=cmd_insights)

    p = sub.add_parser("config-dump", help="print the effective configuration as TOML")
    p.set_defaults(func=cmd_config_dump)
    return parser


def _flags(args: argparse.Namespace) -> dict[str, dict[str, Any]]:
    cmd = args.command
    if cmd == "serve":
        return {"serve": {"host": args.host, "port": args.port, "data_dir": args.data_dir,
                          "min_update_interval": args.min_update_interval}}
    if cmd == "analyze":
        return {"analyze": {"dataset": args.dataset, "task": args.task, "seed": args.seed,
                            "test_fraction": args.test_fraction, "out_dir": args.out_dir}}
    if cmd == "insights":
        return {"insights": {"dataset": args.dataset, "top_n": args.top_n, "max_by": args.max_by,
                             "out_dir": args.out_dir,
                             "cities": args.cities.split(",") if args.cities else None}}
    return {}


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        config = resolve_config(args.config, _flags(args))
    except (OSError, ValueError) as exc:
        print(f"aeropipe: cannot read config: {exc}", file=sys.stderr)
        return EXIT_USAGE
    try:
        return args.func(args, config)
    except CliError as exc:
        print(f"aeropipe: {exc}", file=sys.stderr)
        return EXIT_FAIL


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
