"""Render peerbias scenario CSVs into the bundled figure layouts.

This package deliberately knows nothing about the simulator's internals: its
whole input is the CSV contract (fixed header, one row per sweep-point/test)
and the scenario id registry mirrored in figspec.
"""

from .figspec import FIGURES, FigureSpec
from .render import build_figure, load_rows, render

__all__ = ["FIGURES", "FigureSpec", "build_figure", "load_rows", "render"]
