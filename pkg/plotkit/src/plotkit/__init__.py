"""Batch figure renderer for simulator CSV logs.

Reads the CSV files written by the simulator CLI and renders latency CDFs,
decision-log time series, and sweep bar charts, as PNG + SVG pairs.  Figures
are described by small JSON documents; see :class:`FigureSpec`.
"""
from .figures import KINDS, FigureError, FigureSpec, load_figure_specs, render

__all__ = ["KINDS", "FigureError", "FigureSpec", "load_figure_specs",
           "render"]
__version__ = "0.1.0"
