"""
Module/Script Name: reporting.py
Path: fedpoison/reporting.py

Description:
Result files for experiment runs and sweeps.

Provides:
- Streaming per-round run CSV writer (fixed header, deterministic formatting)
- Run CSV reader
- Attack x defense summary CSV
- RunManifest JSON
- PNG line chart of test AUC per round

Author(s):
fedpoison maintainers

Created Date:
2026-10-19

Last Modified Date:
2026-10-19

Version:
v1.0.0

Comments:
- v1.0.0: Initial implementation
"""

from __future__ import annotations

import csv
import os
from dataclasses import asdict, dataclass, field
from typing import Dict, List, Optional, Sequence, TextIO

import numpy as np
from PIL import Image, ImageDraw, ImageFont

from .federation import RoundRecord
from .utils import ensure_dir_exists, format_float, save_json

RUN_CSV_HEADER = [
    "round",
    "test_auc",
    "defense",
    "attack",
    "selected_or_weights",
    "threshold",
    "achieved_sq_dist",
    "sf",
    "fallback_used",
    "wallclock_s",
]
SUMMARY_CSV_HEADER = ["attack", "defense", "median_auc", "min_auc", "max_auc", "seeds"]
ERROR_CELL = "error"

# Chart styling
CHART_SIZE = (800, 480)
CHART_MARGIN = 60
CHART_BACKGROUND = (255, 255, 255)
CHART_AXIS_COLOR = (40, 40, 40)
CHART_GRID_COLOR = (225, 225, 225)
CHART_PALETTE = [
    (31, 119, 180),
    (214, 39, 40),
    (44, 160, 44),
    (255, 127, 14),
    (148, 103, 189),
    (140, 86, 75),
    (227, 119, 194),
    (127, 127, 127),
]


def run_csv_name(config_hash: str, seed: int) -> str:
    return f"run_{config_hash}_{seed}.csv"


def format_record(record: RoundRecord) -> List[str]:
    """One run CSV row; non-applicable columns are empty."""
    if record.selected is not None:
        selection = str(record.selected)
    else:
        selection = ";".join(f"{weight:.6f}" for _, weight in record.weights)
    diag = record.diagnostics
    fallback = "" if diag.fallback_used is None else str(diag.fallback_used).lower()
    return [
        str(record.round),
        format_float(record.test_auc),
        record.defense,
        record.attack,
        selection,
        format_float(diag.threshold),
        format_float(diag.achieved_sq_dist),
        format_float(diag.sf),
        fallback,
        format_float(record.wallclock_s),
    ]


class RunCsvWriter:
    """
    Writes one run CSV, a row per RoundRecord, flushed as each round ends.

    Usage:
        with RunCsvWriter(path) as writer:
            run_experiment(cfg, sink=writer.write)
    """

    def __init__(self, path: str):
        self.path = path
        self.rows_written = 0
        self._file: Optional[TextIO] = None

    def __enter__(self) -> RunCsvWriter:
        ensure_dir_exists(os.path.dirname(self.path))
        self._file = open(self.path, "w", encoding="utf-8", newline="")
        self._writer = csv.writer(self._file, lineterminator="\n")
        self._writer.writerow(RUN_CSV_HEADER)
        return self

    def write(self, record: RoundRecord) -> None:
        if self._file is None:
            raise RuntimeError("RunCsvWriter used outside its context")
        self._writer.writerow(format_record(record))
        self._file.flush()
        self.rows_written += 1

    def __exit__(self, *exc_info: object) -> None:
        if self._file is not None:
            self._file.close()
            self._file = None


def read_run_csv(path: str) -> List[Dict[str, str]]:
    """
    Read a run CSV back as a list of row dicts.

    Raises:
        ValueError: If the header is not the run CSV header
    """
    with open(path, "r", encoding="utf-8", newline="") as f:
        reader = csv.DictReader(f)
        if reader.fieldnames != RUN_CSV_HEADER:
            raise ValueError(f"{path} is not a run CSV (header {reader.fieldnames})")
        return list(reader)


@dataclass
class SummaryCell:
    """Final AUCs of one (attack, defense) pair across seeds."""

    attack: str
    defense: str
    seeds: List[int]
    final_aucs: List[float] = field(default_factory=list)
    failed_seeds: List[int] = field(default_factory=list)

    def to_row(self) -> List[str]:
        if self.failed_seeds or not self.final_aucs:
            stats = [ERROR_CELL] * 3
        else:
            aucs = np.asarray(self.final_aucs)
            stats = [
                format_float(float(np.median(aucs))),
                format_float(float(aucs.min())),
                format_float(float(aucs.max())),
            ]
        return [self.attack, self.defense, *stats, ";".join(str(s) for s in self.seeds)]


def write_summary_csv(cells: Sequence[SummaryCell], path: str) -> None:
    ensure_dir_exists(os.path.dirname(path))
    with open(path, "w", encoding="utf-8", newline="") as f:
        writer = csv.writer(f, lineterminator="\n")
        writer.writerow(SUMMARY_CSV_HEADER)
        for cell in cells:
            writer.writerow(cell.to_row())


@dataclass
class RunManifest:
    """Index of the files a run or sweep produced."""

    config_hash: str
    seeds: List[int]
    out_dir: str
    run_csvs: List[str] = field(default_factory=list)
    summary_csv: Optional[str] = None
    failures: Dict[str, str] = field(default_factory=dict)

    def to_dict(self) -> Dict[str, object]:
        return asdict(self)

    def save(self, path: Optional[str] = None) -> str:
        """Write manifest.json (default: inside out_dir) and return its path."""
        path = path or os.path.join(self.out_dir, "manifest.json")
        save_json(self.to_dict(), path)
        return path


def _load_font(size: int) -> ImageFont.ImageFont:
    try:
        return ImageFont.truetype("DejaVuSans.ttf", size)  # type: ignore[return-value]
    except IOError:
        return ImageFont.load_default()


def render_auc_chart(
    csv_paths: Sequence[str], out_path: str, title: str = "Test AUC per round"
) -> str:
    """
    Draw test AUC against round for one or more run CSVs and save it as PNG.

    Each run gets its own line, labelled `<attack>/<defense>` from its rows.

    Returns:
        Path of the written PNG
    """
    series = []
    for path in csv_paths:
        rows = read_run_csv(path)
        if not rows:
            continue
        points = [(int(row["round"]), float(row["test_auc"])) for row in rows]
        label = f"{rows[0]['attack']}/{rows[0]['defense']}"
        series.append((label, points))
    if not series:
        raise ValueError("no rounds to plot")

    width, height = CHART_SIZE
    left, top = CHART_MARGIN, CHART_MARGIN // 2
    right, bottom = width - CHART_MARGIN // 2, height - CHART_MARGIN
    max_round = max(max(r for r, _ in points) for _, points in series)
    min_round = min(min(r for r, _ in points) for _, points in series)
    span = max(max_round - min_round, 1)

    def to_pixel(round_no: int, auc: float) -> tuple:
        x = left + (round_no - min_round) / span * (right - left)
        y = bottom - auc * (bottom - top)
        return (x, y)

    image = Image.new("RGB", CHART_SIZE, CHART_BACKGROUND)
    draw = ImageDraw.Draw(image)
    font = _load_font(12)

    for tick in np.linspace(0.0, 1.0, 6):
        _, y = to_pixel(min_round, float(tick))
        draw.line([(left, y), (right, y)], fill=CHART_GRID_COLOR)
        draw.text((8, y - 6), f"{tick:.1f}", font=font, fill=CHART_AXIS_COLOR)
    draw.line([(left, top), (left, bottom), (right, bottom)], fill=CHART_AXIS_COLOR, width=2)
    draw.text((left, bottom + 8), str(min_round), font=font, fill=CHART_AXIS_COLOR)
    draw.text((right - 20, bottom + 8), str(max_round), font=font, fill=CHART_AXIS_COLOR)
    draw.text(((left + right) // 2 - 20, bottom + 24), "round", font=font, fill=CHART_AXIS_COLOR)
    draw.text((left, 6), title, font=font, fill=CHART_AXIS_COLOR)

    for i, (label, points) in enumerate(series):
        color = CHART_PALETTE[i % len(CHART_PALETTE)]
        pixels = [to_pixel(r, auc) for r, auc in points]
        if len(pixels) > 1:
            draw.line(pixels, fill=color, width=2)
        else:
            x, y = pixels[0]
            draw.ellipse([x - 2, y - 2, x + 2, y + 2], fill=color)
        legend_y = top + 6 + 16 * i
        draw.line([(right - 150, legend_y + 6), (right - 130, legend_y + 6)], fill=color, width=3)
        draw.text((right - 125, legend_y), label, font=font, fill=CHART_AXIS_COLOR)

    ensure_dir_exists(os.path.dirname(out_path))
    image.save(out_path, "PNG")
    return out_path
