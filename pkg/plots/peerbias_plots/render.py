"""Turn one scenario's CSV rows into a PNG and an SVG.

Every plotted y-value is a CSV cell; nothing is recomputed. The style profile
is pinned (fonts, sizes, colors, svg hash salt, no embedded dates) so that
identical input bytes produce identical image bytes.
"""

from __future__ import annotations

import argparse
import csv
import sys
from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402  (backend must be set first)

from .figspec import ALPHA_LEVEL, BARS, FIGURES  # noqa: E402

EXPECTED_HEADER = ["scenario", "sweep_name", "sweep_value", "test",
                   "rejection_rate", "mean_effect", "degenerate", "iters",
                   "seed"]

STYLE = {
    "figure.figsize": (6.0, 4.0),
    "figure.dpi": 100,
    "savefig.dpi": 100,
    "font.family": "DejaVu Sans",
    "font.size": 10,
    "axes.grid": True,
    "grid.alpha": 0.3,
    "svg.hashsalt": "peerbias-plots",
    "axes.prop_cycle": plt.cycler(color=["#1f77b4", "#d62728", "#2ca02c",
                                         "#9467bd", "#8c564b"]),
}

SERIES_MARKERS = ("o", "s", "^", "D", "v")

USAGE_ERROR = 2
SCHEMA_ERROR = 1


class SchemaError(Exception):
    pass


def load_rows(csv_path, scenario: str) -> list[dict]:
    """Read and validate the scenario's rows from a harness CSV."""
    with open(csv_path, encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise SchemaError("empty file") from None
        if header != EXPECTED_HEADER:
            raise SchemaError(f"unexpected header {header!r}")
        rows = []
        for raw in reader:
            if len(raw) != len(EXPECTED_HEADER):
                raise SchemaError(f"malformed row {raw!r}")
            row = dict(zip(EXPECTED_HEADER, raw))
            if row["scenario"] != scenario:
                continue
            try:
                row["rejection_rate"] = float(row["rejection_rate"])
                row["mean_effect"] = float(row["mean_effect"])
            except ValueError as exc:
                raise SchemaError(f"non-numeric cell in {raw!r}") from exc
            if not 0.0 <= row["rejection_rate"] <= 1.0:
                raise SchemaError(f"rejection rate out of range in {raw!r}")
            rows.append(row)
    if not rows:
        raise SchemaError(f"no rows for scenario {scenario!r}")
    return rows


def _ordered_unique(values):
    seen = []
    for v in values:
        if v not in seen:
            seen.append(v)
    return seen


def build_figure(rows: list[dict], scenario: str):
    """Assemble the figure for already-validated rows; returns (fig, ax)."""
    if scenario not in FIGURES:
        raise KeyError(f"no figure layout for scenario {scenario!r}")
    spec = FIGURES[scenario]
    tests = _ordered_unique(r["test"] for r in rows)
    sweep_values = _ordered_unique(r["sweep_value"] for r in rows)
    by_key = {(r["test"], r["sweep_value"]): r["rejection_rate"] for r in rows}
    if len(by_key) != len(tests) * len(sweep_values):
        raise SchemaError("rows do not cover the full sweep-by-test grid")

    plt.rcParams.update(STYLE)
    fig, ax = plt.subplots()
    if spec.kind == BARS:
        width = 0.8 / len(tests)
        centers = range(len(sweep_values))
        for t_idx, test in enumerate(tests):
            offsets = [c + (t_idx - (len(tests) - 1) / 2) * width for c in centers]
            ax.bar(offsets, [by_key[(test, v)] for v in sweep_values],
                   width=width, label=test)
        ax.set_xticks(list(centers))
        ax.set_xticklabels(sweep_values)
    else:
        xs = [float(v) for v in sweep_values]
        for t_idx, test in enumerate(tests):
            ax.plot(xs, [by_key[(test, v)] for v in sweep_values],
                    marker=SERIES_MARKERS[t_idx % len(SERIES_MARKERS)],
                    label=test)
    if spec.alpha_line:
        ax.axhline(ALPHA_LEVEL, linestyle="--", color="black", linewidth=1,
                   label=f"level {ALPHA_LEVEL}")
    ax.set_xlabel(spec.x_label)
    ax.set_ylabel(spec.y_label)
    ax.set_ylim(bottom=0)
    ax.set_title(scenario)
    ax.legend()
    fig.tight_layout()
    return fig, ax


def render(csv_path, scenario: str, out_dir) -> tuple[Path, Path]:
    """Write <scenario>.png and <scenario>.svg under out_dir."""
    rows = load_rows(csv_path, scenario)
    fig, _ = build_figure(rows, scenario)
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    png = out_dir / f"{scenario}.png"
    svg = out_dir / f"{scenario}.svg"
    fig.savefig(png, format="png")
    fig.savefig(svg, format="svg", metadata={"Date": None})
    plt.close(fig)
    return png, svg


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="peerbias-render",
        description="render a peerbias scenario CSV into PNG and SVG figures")
    parser.add_argument("--csv", required=True)
    parser.add_argument("--scenario", required=True)
    parser.add_argument("--out", required=True, help="output directory")
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    if args.scenario not in FIGURES:
        print(f"error: unknown scenario {args.scenario!r}", file=sys.stderr)
        return USAGE_ERROR
    try:
        png, svg = render(args.csv, args.scenario, args.out)
    except (SchemaError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return SCHEMA_ERROR
    print(png)
    print(svg)
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
