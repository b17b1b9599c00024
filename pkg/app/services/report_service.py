"""Metrics reports: CSV table, JSON lines and SVG accuracy curves.

Every emitter is deterministic: floats are written with six significant digits,
columns keep the ``CSV_COLUMNS`` order and SVGs carry no timestamp.
"""
import json
import math
from pathlib import Path
from typing import Iterable, Literal, Sequence

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import pandas as pd  # noqa: E402

from app.core.errors import ReportError  # noqa: E402
from app.core.logging import logger  # noqa: E402
from app.schemas.experiment import (  # noqa: E402
    CSV_COLUMNS,
    MetricsRecord,
    TrainingMode,
)

ReportFormat = Literal["csv", "jsonl", "svg"]

METRICS_CSV = "metrics.csv"
METRICS_JSONL = "metrics.jsonl"
EPOCH_SVG = "accuracy_by_epoch.svg"
SWEEP_SVG = "accuracy_by_noise.svg"

FLOAT_FORMAT = "%.6g"
SVG_STYLE = {"svg.hashsalt": "ot-purify", "svg.fonttype": "none"}


def _round6(value):
    if isinstance(value, float) and math.isfinite(value):
        return float(FLOAT_FORMAT % value)
    return value


# ============================================================================
# Frames
# ============================================================================

def records_frame(records: Sequence[MetricsRecord]) -> pd.DataFrame:
    rows = []
    for record in records:
        row = {column: getattr(record, column) for column in CSV_COLUMNS}
        row["mode"] = record.mode.value
        rows.append(row)
    return pd.DataFrame(rows, columns=list(CSV_COLUMNS))


def csv_text(frame: pd.DataFrame) -> str:
    return frame.to_csv(index=False, float_format=FLOAT_FORMAT, lineterminator="\n")


def metrics_csv_text(records: Sequence[MetricsRecord]) -> str:
    return csv_text(records_frame(records))


def read_metrics_frame(path) -> pd.DataFrame:
    try:
        frame = pd.read_csv(path)
    except (OSError, pd.errors.ParserError) as exc:
        raise ReportError(f"cannot read metrics from {path}: {exc}") from exc
    missing = [column for column in CSV_COLUMNS if column not in frame.columns]
    if missing:
        raise ReportError(f"{path} lacks metrics columns {missing}")
    return frame[list(CSV_COLUMNS)]


def frame_to_records(frame: pd.DataFrame) -> list[MetricsRecord]:
    records = []
    for row in frame.to_dict(orient="records"):
        clean = {
            key: (None if isinstance(value, float) and math.isnan(value) else value)
            for key, value in row.items()
        }
        clean["mode"] = TrainingMode(clean["mode"])
        records.append(MetricsRecord(**clean))
    return records


def read_metrics_csv(path) -> list[MetricsRecord]:
    return frame_to_records(read_metrics_frame(path))


# ============================================================================
# Emitters
# ============================================================================

def _prepare_dir(out_dir) -> Path:
    out_dir = Path(out_dir)
    try:
        out_dir.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise ReportError(f"cannot create report directory {out_dir}: {exc}") from exc
    return out_dir


def _write_text(path: Path, text: str) -> Path:
    try:
        path.write_text(text)
    except OSError as exc:
        raise ReportError(f"cannot write {path}: {exc}") from exc
    return path


def _jsonl_text(records: Iterable[MetricsRecord]) -> str:
    lines = []
    for record in records:
        payload = record.model_dump(mode="json")
        rounded = {key: _round6(value) for key, value in payload.items()}
        lines.append(json.dumps(rounded))
    return "".join(line + "\n" for line in lines)


def _final_epochs(frame: pd.DataFrame) -> pd.DataFrame:
    last = frame.groupby(["mode", "noise_rate", "seed"])["epoch"].transform("max")
    return frame[frame["epoch"] == last]


def _save_figure(fig, path: Path) -> None:
    try:
        fig.savefig(path, format="svg", metadata={"Date": None})
    except OSError as exc:
        raise ReportError(f"cannot write {path}: {exc}") from exc
    finally:
        plt.close(fig)


def _plot_epochs(frame: pd.DataFrame, path: Path) -> Path:
    with plt.rc_context(SVG_STYLE):
        fig, ax = plt.subplots(figsize=(6.4, 4.0))
        for (mode, noise), group in frame.groupby(["mode", "noise_rate"], sort=True):
            curve = group.groupby("epoch")["test_acc"].mean()
            ax.plot(curve.index, curve.values, marker=".",
                    label=f"{mode} (noise {noise:g})")
        ax.set_xlabel("epoch")
        ax.set_ylabel("test accuracy")
        ax.set_ylim(0.0, 1.0)
        if len(ax.lines):
            ax.legend(fontsize="small")
        _save_figure(fig, path)
    return path


def _plot_sweep(frame: pd.DataFrame, path: Path) -> Path:
    final = _final_epochs(frame)
    with plt.rc_context(SVG_STYLE):
        fig, ax = plt.subplots(figsize=(6.4, 4.0))
        for mode, group in final.groupby("mode", sort=False):
            curve = group.groupby("noise_rate")["test_acc"].mean()
            ax.plot(curve.index, curve.values, marker="o", label=mode)
        ax.set_xlabel("noise rate")
        ax.set_ylabel("final test accuracy")
        ax.set_ylim(0.0, 1.0)
        if len(ax.lines):
            ax.legend(fontsize="small")
        _save_figure(fig, path)
    return path


def write_table(frame: pd.DataFrame, path) -> Path:
    """Write a result table with the same float format as the metrics CSV."""
    path = Path(path)
    _prepare_dir(path.parent)
    written = _write_text(path, csv_text(frame))
    logger.info(f"Wrote {written}")
    return written


def emit_report(records: Sequence[MetricsRecord], fmt: ReportFormat,
                out_dir) -> list[Path]:
    """Write ``records`` in one format under ``out_dir`` and return the files written.

    ``svg`` writes the per-epoch curves, plus accuracy against noise rate when the
    records span more than one rate.
    """
    out_dir = _prepare_dir(out_dir)
    if fmt == "csv":
        written = [_write_text(out_dir / METRICS_CSV, metrics_csv_text(records))]
    elif fmt == "jsonl":
        written = [_write_text(out_dir / METRICS_JSONL, _jsonl_text(records))]
    elif fmt == "svg":
        frame = records_frame(records)
        written = [_plot_epochs(frame, out_dir / EPOCH_SVG)]
        if frame["noise_rate"].nunique() > 1:
            written.append(_plot_sweep(frame, out_dir / SWEEP_SVG))
    else:
        raise ReportError(f"unknown report format {fmt!r}")
    for path in written:
        logger.info(f"Wrote {path}")
    return written
