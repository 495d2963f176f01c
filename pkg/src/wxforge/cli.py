"""``wxforge`` command line: the batch pipeline end to end.

Subcommands: ingest, augment, embed, metrics, contrastive, correlate,
report, serve. Exit codes: 0 success, 1 domain error (printed as
``error:<kind>: message``), 2 usage error. Identical invocations produce
byte-identical outputs; ``--workers`` never changes bytes.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from pathlib import Path

from . import __version__
from .errors import WxforgeError

log = logging.getLogger("wxforge")

CONFIG_ENV = "WXFORGE_CONFIG"


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="wxforge",
        description="Adverse-weather augmentation and embedding-distance toolkit.",
    )
    parser.add_argument("--version", action="version", version=f"wxforge {__version__}")
    parser.add_argument("--config", default=None,
                        help=f"config file (default: ${CONFIG_ENV})")
    parser.add_argument("--set", dest="overrides", action="append", default=[],
                        metavar="KEY=VALUE", help="override a config key")
    parser.add_argument("--print-config", action="store_true",
                        help="print the fully resolved configuration and exit")
    parser.add_argument("--log-level", default=None,
                        choices=["debug", "info", "warning", "error"])
    parser.add_argument("--workers", type=int, default=None,
                        help="worker threads for per-image jobs (default 1)")
    sub = parser.add_subparsers(dest="command", metavar="COMMAND")

    p = sub.add_parser("ingest", help="intersect detection attributes with "
                                      "segmentation labels into source records")
    p.add_argument("--attributes", required=True, help="BDD-style detection JSON")
    p.add_argument("--seg-dir", required=True, help="segmentation PNG directory")
    p.add_argument("--image-dir", required=True, help="source image directory")
    p.add_argument("--depth-dir", default=None, help="optional depth PNG directory")
    p.add_argument("--exclusions", default=None, help="QA exclusion list file")
    p.add_argument("--allowed-weather", default=None,
                   help="comma-separated weather attributes to keep")
    p.add_argument("--allowed-timeofday", default=None,
                   help="comma-separated timeofday attributes to keep")
    p.add_argument("--out", required=True, help="output records JSON")

    p = sub.add_parser("augment", help="render one augmentation subset")
    p.add_argument("--manifest", required=True,
                   help="source records JSON from ingest")
    p.add_argument("--family", required=True)
    p.add_argument("--level", type=int, default=None)
    p.add_argument("--preset", default=None,
                   help="custom preset reference, e.g. custom/fog_misty")
    p.add_argument("--seed", type=int, default=0, help="seed base for the subset")
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--tables", default=None, help="intensity tables TOML")
    p.add_argument("--max-range-m", type=float, default=200.0)

    p = sub.add_parser("embed", help="run the external embedding extractor")
    p.add_argument("--extractor", required=True,
                   help="command template with {input_list} and {output}")
    p.add_argument("--images", required=True,
                   help="image directory or list file (one path per line)")
    p.add_argument("--out", required=True, help="output WXE1 file")

    p = sub.add_parser("metrics", help="cross distance matrix between sets "
                                       "and triggers")
    p.add_argument("--set", dest="sets", action="append", required=True,
                   metavar="NAME=PATH", help="named embedding file (repeat)")
    p.add_argument("--trigger", dest="triggers", action="append", required=True,
                   metavar="NAME=PATH", help="named trigger embedding file (repeat)")
    p.add_argument("--which", choices=["fid", "cmmd", "both"], default="both")
    p.add_argument("--mmd-sigma", type=float, default=10.0)
    p.add_argument("--mmd-scale", type=float, default=1000.0)
    p.add_argument("--out", required=True, help="output CSV")

    p = sub.add_parser("contrastive", help="append contrastive columns to a "
                                           "distance CSV")
    p.add_argument("--distances", required=True, help="distance matrix CSV")
    p.add_argument("--target", required=True, help="target trigger name")
    p.add_argument("--metric", choices=["fid", "cmmd", "both"], default="both")
    p.add_argument("--out", default=None,
                   help="output CSV (default: append in place)")

    p = sub.add_parser("correlate", help="Pearson correlation between result "
                                         "columns")
    p.add_argument("--results-fid", default=None)
    p.add_argument("--results-cmmd", default=None)
    p.add_argument("--results-contrastive", default=None)
    p.add_argument("--bundled", action="store_true",
                   help="use the packaged transcribed result tables")
    p.add_argument("--x", required=True, help="x column, e.g. fid.acdc_rain")
    p.add_argument("--y", required=True, help="y column, e.g. retrain_miou")
    p.add_argument("--filter", choices=["abdd", "albu", "all"], default="abdd")
    p.add_argument("--out", default=None, help="optional CSV report path")

    p = sub.add_parser("report", help="minimal-distance (spider) report from a "
                                      "distance CSV")
    p.add_argument("--distances", required=True, help="distance matrix CSV")
    p.add_argument("--grouping", default=None,
                   help="JSON file mapping set name to group label")
    p.add_argument("--out-prefix", required=True,
                   help="writes <prefix>.csv and <prefix>.txt")

    p = sub.add_parser("serve", help="local preview service for the studio UI")
    p.add_argument("--records", required=True, help="source records JSON")
    p.add_argument("--tables", default=None,
                   help="intensity tables TOML (presets are appended here)")
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--port", type=int, default=8765)
    p.add_argument("--static", default=None, help="studio static asset directory")
    p.add_argument("--max-edge", type=int, default=960,
                   help="preview downscale limit (long edge, px)")
    return parser


def resolve_config(args) -> dict:
    """defaults < config file < --set overrides < dedicated flags."""
    config = {"workers": 1, "log_level": "warning", "tables": None}
    path = args.config or os.environ.get(CONFIG_ENV)
    if path:
        try:
            import tomllib
        except ModuleNotFoundError:
            import tomli as tomllib
        try:
            with open(path, "rb") as fh:
                config.update(tomllib.load(fh))
        except FileNotFoundError:
            from .errors import IoError

            raise IoError(f"config file not found: {path}") from None
        except tomllib.TOMLDecodeError as exc:
            from .errors import ParseError

            raise ParseError(f"bad config file {path}: {exc}") from exc
        config["config_path"] = path
    for item in args.overrides:
        if "=" not in item:
            from .errors import ParseError

            raise ParseError(f"--set expects KEY=VALUE, got {item!r}")
        key, value = item.split("=", 1)
        try:
            config[key] = json.loads(value)
        except json.JSONDecodeError:
            config[key] = value
    if args.log_level is not None:
        config["log_level"] = args.log_level
    if args.workers is not None:
        config["workers"] = args.workers
    if int(config["workers"]) < 1:
        from .errors import ParseError

        raise ParseError("workers must be >= 1")
    return config


def _load_tables_arg(path, config):
    from .params import default_tables, load_tables

    path = path or config.get("tables")
    return load_tables(path) if path else default_tables()


def cmd_ingest(args, config) -> int:
    from .manifest import filter_candidates, ingest, save_records

    result = ingest(args.attributes, args.seg_dir, args.image_dir,
                    depth_dir=args.depth_dir, exclusions_file=args.exclusions)
    records = result.records
    if args.allowed_weather or args.allowed_timeofday:
        weather = set((args.allowed_weather or "").split(",")) - {""}
        timeofday = set((args.allowed_timeofday or "").split(",")) - {""}
        records = filter_candidates(
            records,
            weather or {r.attributes["weather"] for r in records},
            timeofday or {r.attributes["timeofday"] for r in records},
        )
    save_records(records, args.out)
    print(f"ingested {len(records)} records -> {args.out}")
    for reason, count in sorted(result.drops.items()):
        print(f"  dropped {count}: {reason}")
    return 0


def cmd_augment(args, config) -> int:
    from .batch import run_manifest
    from .manifest import build_manifest, load_records, save_manifest

    tables = _load_tables_arg(args.tables, config)
    records = load_records(args.manifest)
    if args.preset is not None:
        preset = tables.find_preset(args.preset, args.family)
        manifest = build_manifest(records, preset.family, 0, args.seed, args.out,
                                  tables=tables, params=preset.params,
                                  level_name=preset.name)
    else:
        if args.level is None:
            from .errors import ParseError

            raise ParseError("one of --level or --preset is required")
        manifest = build_manifest(records, args.family, args.level, args.seed,
                                  args.out, tables=tables)
    paths = run_manifest(manifest, workers=int(config["workers"]),
                         max_range_m=args.max_range_m)
    manifest_path = save_manifest(manifest)
    print(f"wrote {len(paths)} images and {manifest_path}")
    return 0


def _registry_from_config(config) -> dict | None:
    """Optional ``space_tags`` config section: tag -> [dim, normalize]."""
    raw = config.get("space_tags")
    if raw is None:
        return None
    registry = {}
    for tag, entry in raw.items():
        if isinstance(entry, dict):
            registry[tag] = (int(entry["dim"]), bool(entry.get("normalize", False)))
        else:
            dim, normalize = entry
            registry[tag] = (int(dim), bool(normalize))
    return registry


def cmd_embed(args, config) -> int:
    from .embeddings import run_extractor

    images_arg = Path(args.images)
    if images_arg.is_dir():
        image_list = sorted(
            str(p) for p in images_arg.iterdir()
            if p.suffix.lower() in (".png", ".jpg", ".jpeg")
        )
    else:
        image_list = [ln for ln in images_arg.read_text().splitlines() if ln.strip()]
    es = run_extractor(args.extractor, image_list, args.out,
                       registry=_registry_from_config(config))
    print(f"embedded {es.n} images (dim {es.dim}, space {es.space_tag}) -> {args.out}")
    return 0


def _parse_named(pairs) -> dict:
    from .embeddings import load_embeddings
    from .errors import ParseError

    out = {}
    for item in pairs:
        if "=" not in item:
            raise ParseError(f"expected NAME=PATH, got {item!r}")
        name, path = item.split("=", 1)
        out[name] = load_embeddings(path)
    return out


def cmd_metrics(args, config) -> int:
    from .metrics import cross_matrix, matrix_to_csv

    matrix = cross_matrix(_parse_named(args.sets), _parse_named(args.triggers),
                          which=args.which, mmd_sigma=args.mmd_sigma,
                          mmd_scale=args.mmd_scale,
                          workers=int(config["workers"]))
    Path(args.out).parent.mkdir(parents=True, exist_ok=True)
    Path(args.out).write_text(matrix_to_csv(matrix))
    print(f"wrote {len(matrix.row_sets)}x{len(matrix.col_triggers)} matrix -> {args.out}")
    return 0


def cmd_contrastive(args, config) -> int:
    from .errors import InvalidDataError
    from .metrics import contrastive, matrix_from_csv

    text = Path(args.distances).read_text()
    matrix = matrix_from_csv(text)
    if args.target not in matrix.col_triggers:
        from .errors import UnknownTriggerError

        raise UnknownTriggerError(
            f"target {args.target!r} not among {list(matrix.col_triggers)}"
        )
    metrics = ("fid", "cmmd") if args.metric == "both" else (args.metric,)
    metrics = tuple(m for m in metrics if getattr(matrix, m) is not None)
    if not metrics:
        raise InvalidDataError(f"distance CSV has no {args.metric} columns")

    new_cols: dict[str, list[float]] = {}
    for metric in metrics:
        col = []
        for name in matrix.row_sets:
            value = contrastive(matrix.row(metric, name), args.target)
            col.append(value)
        new_cols[f"c_{metric}_{args.target}"] = col
        for name, value in zip(matrix.row_sets, col):
            print(f"{name}\t{metric}\t{value:.2f}")

    lines = [ln for ln in text.splitlines() if ln.strip()]
    header = lines[0] + "," + ",".join(new_cols)
    rows = [
        line + "," + ",".join(f"{new_cols[c][i]:.6g}" for c in new_cols)
        for i, line in enumerate(lines[1:])
    ]
    out_path = Path(args.out) if args.out else Path(args.distances)
    out_path.write_text("\n".join([header] + rows) + "\n")
    return 0


def cmd_correlate(args, config) -> int:
    from .analysis import (
        bundled_results_table,
        correlate_study,
        is_abdd_subset,
        results_table_from_csvs,
    )
    from .errors import ParseError

    if args.bundled:
        table = bundled_results_table()
    else:
        if not (args.results_fid and args.results_cmmd and args.results_contrastive):
            raise ParseError(
                "pass --bundled or all of --results-fid/--results-cmmd/"
                "--results-contrastive"
            )
        table = results_table_from_csvs(
            Path(args.results_fid).read_text(),
            Path(args.results_cmmd).read_text(),
            Path(args.results_contrastive).read_text(),
        )
    filters = {
        "abdd": is_abdd_subset,
        "albu": lambda n: n.startswith("albu_"),
        "all": lambda n: True,
    }
    study = correlate_study(table, args.x, args.y,
                            row_filter=filters[args.filter],
                            filter_name=args.filter)
    result = study.result
    print(f"pearson({args.x}, {args.y}) over {args.filter} rows: "
          f"r={result.r:.4f} p={result.p:.3e} n={result.n}")
    if args.out:
        Path(args.out).write_text(
            "x,y,filter,r,p,n\n"
            f"{args.x},{args.y},{args.filter},{result.r:.6g},"
            f"{result.p:.6g},{result.n}\n"
        )
    return 0


def cmd_report(args, config) -> int:
    from .analysis import min_distance_report
    from .metrics import matrix_from_csv

    matrix = matrix_from_csv(Path(args.distances).read_text())
    grouping = None
    if args.grouping:
        grouping = json.loads(Path(args.grouping).read_text())
    report = min_distance_report(matrix, grouping)
    csv_path = Path(args.out_prefix + ".csv")
    txt_path = Path(args.out_prefix + ".txt")
    csv_path.parent.mkdir(parents=True, exist_ok=True)
    csv_path.write_text(report.to_csv())
    txt_path.write_text(report.to_text())
    print(f"wrote {csv_path} and {txt_path}")
    return 0


def cmd_serve(args, config) -> int:
    import uvicorn

    from .service import create_app

    app = create_app(records_path=args.records, tables_path=args.tables,
                     static_dir=args.static, max_edge=args.max_edge)
    uvicorn.run(app, host=args.host, port=args.port, log_level="info")
    return 0


_COMMANDS = {
    "ingest": cmd_ingest,
    "augment": cmd_augment,
    "embed": cmd_embed,
    "metrics": cmd_metrics,
    "contrastive": cmd_contrastive,
    "correlate": cmd_correlate,
    "report": cmd_report,
    "serve": cmd_serve,
}


def run(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        config = resolve_config(args)
    except WxforgeError as exc:
        print(f"error:{exc.kind}: {exc}", file=sys.stderr)
        return 1
    logging.basicConfig(level=getattr(logging, config["log_level"].upper()))
    if args.print_config:
        printable = dict(config)
        printable["command"] = args.command
        print(json.dumps(printable, indent=2, sort_keys=True))
        return 0
    if args.command is None:
        parser.print_help()
        return 2
    try:
        return _COMMANDS[args.command](args, config)
    except WxforgeError as exc:
        print(f"error:{exc.kind}: {exc}", file=sys.stderr)
        return 1


def main() -> None:
    sys.exit(run())
