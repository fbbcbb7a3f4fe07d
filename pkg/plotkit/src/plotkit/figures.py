"""Figure rendering from simulator CSV logs.

Every number plotted here comes straight out of a CSV produced by the
simulator CLI; this package performs no aggregation beyond sorting values and
forming empirical CDFs.  All inputs are validated before any output file is
created, so a failed render never leaves an image behind.
"""
from __future__ import annotations

import csv
import json
import os
from dataclasses import dataclass

import matplotlib

matplotlib.use("Agg")
matplotlib.rcParams["svg.hashsalt"] = "plotkit"  # reproducible element ids
matplotlib.rcParams["svg.fonttype"] = "none"  # keep label text as text

import matplotlib.pyplot as plt  # noqa: E402  (backend must be set first)

KINDS = ("cdf", "timeseries", "sweep_bars")

_SPEC_KEYS = {"kind", "inputs", "labels", "columns", "column", "output",
              "title", "xlabel", "ylabel"}


class FigureError(ValueError):
    """A figure specification or its input data is unusable."""


@dataclass
class FigureSpec:
    """One figure: what to read, how to draw it, where to write it.

    ``output`` is an image path base; both ``<output>.png`` and
    ``<output>.svg`` are written (a ``.png`` or ``.svg`` suffix on the spec
    value is stripped first).
    """

    kind: str
    inputs: list[str]
    output: str
    labels: list[str] | None = None
    columns: list[str] | None = None  # timeseries value columns
    column: str | None = None  # sweep_bars value column
    title: str = ""
    xlabel: str = ""
    ylabel: str = ""

    def __post_init__(self) -> None:
        if self.kind not in KINDS:
            raise FigureError(
                f"unknown figure kind {self.kind!r}; expected one of {KINDS}")
        if not self.inputs:
            raise FigureError("figure needs at least one input CSV")
        if not self.output:
            raise FigureError("figure needs an output path")
        if self.labels is not None and len(self.labels) != len(self.inputs):
            raise FigureError(
                f"{len(self.labels)} labels for {len(self.inputs)} inputs")
        if self.kind == "sweep_bars" and not self.column:
            raise FigureError("sweep_bars needs a 'column' to plot")

    @property
    def base(self) -> str:
        root, ext = os.path.splitext(self.output)
        return root if ext.lower() in (".png", ".svg") else self.output


def load_figure_specs(path: str) -> list[FigureSpec]:
    """Read a figure-spec document: one figure object, a list of them, or
    ``{"figures": [...]}``."""
    with open(path) as fh:
        try:
            doc = json.load(fh)
        except json.JSONDecodeError as exc:
            raise FigureError(f"{path}: not valid JSON ({exc})") from exc
    if isinstance(doc, dict) and "figures" in doc:
        extra = set(doc) - {"figures"}
        if extra:
            raise FigureError(f"{path}: unknown top-level keys {sorted(extra)}")
        doc = doc["figures"]
    if isinstance(doc, dict):
        doc = [doc]
    if not isinstance(doc, list) or not doc:
        raise FigureError(f"{path}: expected a figure object or list of them")
    specs = []
    for i, entry in enumerate(doc):
        if not isinstance(entry, dict):
            raise FigureError(f"{path}: figure {i} is not an object")
        extra = set(entry) - _SPEC_KEYS
        if extra:
            raise FigureError(f"{path}: figure {i} has unknown keys "
                              f"{sorted(extra)}")
        try:
            specs.append(FigureSpec(**entry))
        except FigureError as exc:
            raise FigureError(f"{path}: figure {i}: {exc}") from exc
    return specs


def _read_rows(path: str) -> list[dict]:
    if not os.path.isfile(path):
        raise FigureError(f"input file not found: {path}")
    with open(path, newline="") as fh:
        rows = list(csv.DictReader(fh))
    if not rows:
        raise FigureError(f"empty CSV: {path}")
    return rows


def _require(rows: list[dict], columns: list[str], path: str) -> None:
    for col in columns:
        if col not in rows[0]:
            raise FigureError(f"missing column '{col}' in {path}")


def _label(spec: FigureSpec, i: int) -> str:
    if spec.labels is not None:
        return spec.labels[i]
    stem = os.path.splitext(os.path.basename(spec.inputs[i]))[0]
    return stem


def _prepare_cdf(spec: FigureSpec) -> list[tuple[str, list[float]]]:
    series = []
    for i, path in enumerate(spec.inputs):
        rows = _read_rows(path)
        _require(rows, ["sent_at", "delivered_at"], path)
        delays = [float(r["delivered_at"]) - float(r["sent_at"])
                  for r in rows if r["delivered_at"] != ""]
        if not delays:
            raise FigureError(f"no delivered packets in {path}")
        series.append((_label(spec, i), sorted(delays)))
    return series


def _draw_cdf(spec: FigureSpec, series) -> None:
    for label, xs in series:
        n = len(xs)
        ys = [(k + 1) / n for k in range(n)]
        plt.step(xs, ys, where="post", label=label)
    plt.ylim(0.0, 1.02)
    plt.ylabel(spec.ylabel or "fraction of packets")
    plt.xlabel(spec.xlabel or "network delay (ms)")
    plt.legend()


def _prepare_timeseries(spec: FigureSpec):
    columns = spec.columns or ["c_p", "r"]
    per_input = []
    for i, path in enumerate(spec.inputs):
        rows = _read_rows(path)
        _require(rows, ["subframe"] + columns, path)
        xs = [float(r["subframe"]) for r in rows]
        ys = {c: [float(r[c]) for r in rows] for c in columns}
        states = ([r["state"] for r in rows] if "state" in rows[0] else None)
        per_input.append((_label(spec, i), xs, ys, states))
    return columns, per_input


def _draw_timeseries(spec: FigureSpec, prepared) -> None:
    columns, per_input = prepared
    for label, xs, ys, _ in per_input:
        for col in columns:
            name = col if len(per_input) == 1 else f"{label} {col}"
            plt.plot(xs, ys[col], label=name, linewidth=0.9)
    # Shade spans where the first input's state differs from its opening
    # state, one translucent colour per distinct state.
    _, xs, _, states = per_input[0]
    if states is not None:
        base = states[0]
        palette = {}
        start = None
        for k, state in enumerate(states + [base]):
            active = k < len(states) and state != base
            if active and start is None:
                start = k
            elif not active and start is not None:
                state_name = states[start]
                if state_name not in palette:
                    palette[state_name] = f"C{3 + len(palette)}"
                    plt.axvspan(xs[start], xs[k - 1], alpha=0.15,
                                color=palette[state_name],
                                label=f"state: {state_name}")
                else:
                    plt.axvspan(xs[start], xs[k - 1], alpha=0.15,
                                color=palette[state_name])
                start = None
    plt.xlabel(spec.xlabel or "subframe (ms)")
    plt.ylabel(spec.ylabel or "rate (bit/s)")
    plt.legend()


def _prepare_sweep_bars(spec: FigureSpec):
    groups = []
    for i, path in enumerate(spec.inputs):
        rows = _read_rows(path)
        axis = list(rows[0])[0]
        _require(rows, [axis, spec.column], path)
        ticks = []
        seen: dict[str, int] = {}
        for r in rows:
            tick = r[axis]
            seen[tick] = seen.get(tick, 0) + 1
            if seen[tick] > 1:
                tick = f"{tick} #{seen[tick]}"
            ticks.append(tick)
        heights = [float(r[spec.column]) for r in rows]
        groups.append((_label(spec, i), axis, ticks, heights))
    return groups


def _draw_sweep_bars(spec: FigureSpec, groups) -> None:
    n_groups = len(groups)
    width = 0.8 / n_groups
    ticks0 = groups[0][2]
    for g, (label, _, ticks, heights) in enumerate(groups):
        xs = [k + (g - (n_groups - 1) / 2) * width for k in range(len(ticks))]
        plt.bar(xs, heights, width=width,
                label=label if n_groups > 1 else None)
    plt.xticks(range(len(ticks0)), ticks0)
    plt.xlabel(spec.xlabel or groups[0][1])
    plt.ylabel(spec.ylabel or spec.column)
    if n_groups > 1:
        plt.legend()


def render(spec: FigureSpec) -> list[str]:
    """Render one figure; returns the written image paths (PNG, SVG).

    All inputs are read and validated first: on any error no file is
    written.  Identical inputs produce identical image bytes.
    """
    if spec.kind == "cdf":
        prepared = _prepare_cdf(spec)
        draw = _draw_cdf
    elif spec.kind == "timeseries":
        prepared = _prepare_timeseries(spec)
        draw = _draw_timeseries
    else:
        prepared = _prepare_sweep_bars(spec)
        draw = _draw_sweep_bars

    outdir = os.path.dirname(spec.base)
    if outdir:
        os.makedirs(outdir, exist_ok=True)
    plt.figure(figsize=(6.0, 3.6), dpi=120)
    try:
        draw(spec, prepared)
        if spec.title:
            plt.title(spec.title)
        plt.tight_layout()
        written = []
        for ext, metadata in (("png", None), ("svg", {"Date": None})):
            path = f"{spec.base}.{ext}"
            plt.savefig(path, metadata=metadata)
            written.append(path)
    finally:
        plt.close()
    return written
