"""``report``: re-emit a metrics CSV as CSV, JSON lines or SVG."""
import argparse

from app.api.commands.common import parse_list, recorded_arguments
from app.core.errors import UsageError
from app.services.manifest_service import write_manifest
from app.services.report_service import emit_report, read_metrics_csv

NAME = "report"
OUTPUT_ARGUMENTS = ("out",)
FORMATS = ("csv", "jsonl", "svg")


def register(subparsers) -> None:
    parser = subparsers.add_parser(NAME, help="render a metrics table")
    parser.add_argument("--metrics", required=True, metavar="CSV")
    parser.add_argument("--formats", default=",".join(FORMATS))
    parser.add_argument("--out", default="runs/report")
    parser.set_defaults(handler=run)


def run(args: argparse.Namespace) -> int:
    formats = parse_list(args.formats, str)
    unknown = [fmt for fmt in formats if fmt not in FORMATS]
    if unknown or not formats:
        raise UsageError(f"formats must be drawn from {FORMATS}")
    records = read_metrics_csv(args.metrics)
    if not records:
        raise UsageError(f"{args.metrics} holds no metrics rows")
    written = {}
    for fmt in formats:
        for path in emit_report(records, fmt, args.out):
            written[path.name] = path
            print(path)
    write_manifest(args.out, NAME, parameters={"formats": formats},
                   inputs={"metrics": args.metrics}, outputs=written,
                   arguments=recorded_arguments(args))
    return 0
