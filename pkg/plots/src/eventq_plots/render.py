"""Turn eventq benchmark CSVs into static figures.

Three figure kinds mirror the benchmark axes: per-kind timing against
batch size (log-log), against queue capacity, and drop rate against
queue pressure.  Rendering is a pure function of the CSV bytes: rows are
grouped and sorted deterministically, figure geometry is fixed, and no
timestamps are embedded.

Usage:
    eventq-render --kind droprate --in results.csv --out fig.png
"""

from __future__ import annotations

import argparse
import csv
import sys
from dataclasses import dataclass
from typing import Dict, List, Sequence, Tuple

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402  (backend must be set first)

FIGURE_KINDS = ("batch_scaling", "capacity_scaling", "droprate")

REQUIRED_COLUMNS = {
    "batch_scaling": ("kind", "batch", "ns_per_step_per_queue"),
    "capacity_scaling": ("kind", "capacity", "ns_per_step_per_queue"),
    "droprate": ("kind", "capacity", "lambda", "delay", "drop_rate"),
}


class SchemaError(Exception):
    """The CSV does not carry what the figure needs."""


@dataclass
class FigureSpec:
    kind: str
    inputs: List[str]
    out: str
    log_x: bool = True
    log_y: bool = True

    def __post_init__(self):
        if self.kind not in FIGURE_KINDS:
            raise SchemaError(
                f"unknown figure kind {self.kind!r}; choose from "
                f"{', '.join(FIGURE_KINDS)}"
            )
        if not self.inputs:
            raise SchemaError("no input CSV given")


def load_rows(paths: Sequence[str], columns: Sequence[str]) -> List[dict]:
    rows: List[dict] = []
    for path in paths:
        with open(path, newline="") as fh:
            reader = csv.DictReader(fh)
            header = reader.fieldnames or []
            for col in columns:
                if col not in header:
                    raise SchemaError(
                        f"{path}: missing required column {col!r}"
                    )
            rows.extend(reader)
    if not rows:
        raise SchemaError("input CSV has a header but no data rows")
    return rows


Series = Dict[str, List[Tuple[float, float]]]


def _series(rows: List[dict], label_cols, x_col: str, y_col: str,
            x_of=None) -> Series:
    """Group rows into label -> sorted (x, y) points."""
    out: Series = {}
    for row in rows:
        label = "[".join(str(row[c]) for c in label_cols)
        label = label + "]" if len(label_cols) > 1 else label
        x = x_of(row) if x_of else float(row[x_col])
        out.setdefault(label, []).append((x, float(row[y_col])))
    for pts in out.values():
        pts.sort()
    return dict(sorted(out.items()))


def figure_data(spec: FigureSpec) -> Series:
    """The exact points the figure will show; pure function of the CSV."""
    columns = REQUIRED_COLUMNS[spec.kind]
    rows = load_rows(spec.inputs, columns)
    if spec.kind == "batch_scaling":
        return _series(rows, ("kind",), "batch", "ns_per_step_per_queue")
    if spec.kind == "capacity_scaling":
        return _series(rows, ("kind",), "capacity", "ns_per_step_per_queue")
    return _series(
        rows, ("kind", "capacity"), "", "drop_rate",
        x_of=lambda r: float(r["delay"]) / float(r["lambda"]),
    )


_AXIS_LABELS = {
    "batch_scaling": ("batch (queue count)", "ns / step / queue"),
    "capacity_scaling": ("queue capacity", "ns / step / queue"),
    "droprate": ("queue pressure (delay / lambda)", "drop rate"),
}


def render(spec: FigureSpec) -> Series:
    """Write the figure and return the plotted points."""
    data = figure_data(spec)
    fig, ax = plt.subplots(figsize=(6.4, 4.2), dpi=120)
    for label, pts in data.items():
        xs = [p[0] for p in pts]
        ys = [p[1] for p in pts]
        ax.plot(xs, ys, marker="o", markersize=3.5, linewidth=1.2,
                label=label)
    if spec.log_x:
        ax.set_xscale("log")
    if spec.log_y and spec.kind != "droprate":
        ax.set_yscale("log")
    xlabel, ylabel = _AXIS_LABELS[spec.kind]
    ax.set_xlabel(xlabel)
    ax.set_ylabel(ylabel)
    ax.grid(True, which="both", alpha=0.3)
    ax.legend(fontsize=8)
    fig.tight_layout()
    fig.savefig(spec.out, metadata={"Software": "eventq-plots"})
    plt.close(fig)
    return data


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="eventq-render",
        description="Render an eventq benchmark CSV into a figure",
    )
    parser.add_argument("--kind", required=True, choices=FIGURE_KINDS)
    parser.add_argument("--in", dest="inputs", action="append", required=True,
                        help="input CSV (repeatable)")
    parser.add_argument("--out", required=True, help="output image path")
    parser.add_argument("--linear-x", action="store_true")
    parser.add_argument("--linear-y", action="store_true")
    args = parser.parse_args(argv)
    try:
        spec = FigureSpec(
            kind=args.kind,
            inputs=args.inputs,
            out=args.out,
            log_x=not args.linear_x,
            log_y=not args.linear_y,
        )
        data = render(spec)
    except SchemaError as exc:
        print(f"schema error: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"io error: {exc}", file=sys.stderr)
        return 1
    total = sum(len(p) for p in data.values())
    print(f"wrote {args.out}: {len(data)} series, {total} points")
    return 0


if __name__ == "__main__":
    sys.exit(main())
