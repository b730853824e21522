"""Per-scenario figure layouts: chart kind, axis labels, and whether the
nominal-level reference line belongs on the plot."""

from __future__ import annotations

from dataclasses import dataclass

LINE = "line"
BARS = "bars"
ALPHA_LEVEL = 0.05


@dataclass(frozen=True)
class FigureSpec:
    scenario: str
    kind: str            # line sweep over a numeric grid, or grouped bars
    x_label: str
    y_label: str
    alpha_line: bool     # dashed reference at the nominal level

    def __post_init__(self):
        if self.kind not in (LINE, BARS):
            raise ValueError(f"unknown chart kind {self.kind!r}")


def _line(scenario, x_label, y_label, alpha_line):
    return FigureSpec(scenario, LINE, x_label, y_label, alpha_line)


def _bars(scenario, x_label, y_label, alpha_line=True):
    return FigureSpec(scenario, BARS, x_label, y_label, alpha_line)


FIGURES: dict[str, FigureSpec] = {spec.scenario: spec for spec in [
    _line("fig1a", "number of papers", "false alarm rate", True),
    _line("fig1b", "number of papers", "detection rate", False),
    _line("fig1c", "number of papers", "detection rate", False),
    _line("fig2a", "score-label correlation", "false alarm rate", True),
    _line("fig2b", "score-label correlation", "false alarm rate", True),
    _line("fig2c", "papers per reviewer", "false alarm rate", True),
    _bars("fig3a", "bidding variant", "false alarm rate"),
    _bars("fig3b", "experimental setup", "false alarm rate"),
    _line("fig4a", "number of papers", "detection rate", False),
    _line("fig4b", "number of papers", "detection rate", False),
    _bars("fig5a", "instance", "rejection rate"),
    _bars("fig5b", "instance", "rejection rate"),
    _bars("null-calibration", "setting", "false alarm rate"),
    _bars("proposition-b", "setting", "false alarm rate"),
]}
