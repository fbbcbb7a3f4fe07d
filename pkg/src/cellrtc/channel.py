"""Per-user, per-subframe MCS rate sources: synthetic generators and trace files.

Rates are expressed directly in bits per PRB per subframe.  A model is
immutable after construction and deterministic for a given seed, so the same
object can back many concurrent runs.
"""
from __future__ import annotations

import bisect
from dataclasses import dataclass, field

import numpy as np


class TraceExhaustedError(Exception):
    """Raised when a file-backed trace is sampled beyond its horizon."""


class TraceParseError(Exception):
    """Raised for malformed or invalid trace files; message names the line."""


_CHUNK = 4096


class ChannelModel:
    """Base class: maps (subframe, user) to an MCS rate."""

    def sample(self, subframe: int, user_id: int) -> float:
        raise NotImplementedError


@dataclass(frozen=True)
class Constant(ChannelModel):
    rate: float

    def sample(self, subframe: int, user_id: int) -> float:
        return self.rate


@dataclass(frozen=True)
class StepSequence(ChannelModel):
    """Piecewise-constant rate; each step takes effect at its own subframe."""

    points: tuple  # ((subframe, rate), ...) sorted by subframe, first at 0

    def __post_init__(self):
        starts = [p[0] for p in self.points]
        if not self.points or starts != sorted(starts) or starts[0] != 0:
            raise ValueError("StepSequence points must be sorted and start at subframe 0")

    def sample(self, subframe: int, user_id: int) -> float:
        idx = bisect.bisect_right([p[0] for p in self.points], subframe) - 1
        return self.points[idx][1]


class RandomWalk(ChannelModel):
    """Bounded random walk, stepped every subframe, one stream per user.

    The walk for a user is materialized lazily in chunks from a stream seeded
    by (seed, user_id), so sampling is deterministic regardless of access
    order.
    """

    def __init__(self, seed: int, step_size: float, min_rate: float, max_rate: float,
                 start_rate: float | None = None):
        if min_rate <= 0 or max_rate < min_rate:
            raise ValueError("require 0 < min_rate <= max_rate")
        self.seed = seed
        self.step_size = step_size
        self.min_rate = min_rate
        self.max_rate = max_rate
        self.start_rate = start_rate if start_rate is not None else 0.5 * (min_rate + max_rate)
        self._paths: dict[int, tuple[np.random.Generator, list]] = {}

    def _path(self, user_id: int, upto: int) -> list:
        if user_id not in self._paths:
            # Offset keeps channel streams disjoint from encoder/cross-traffic
            # streams that hash (seed, small-integer) tuples elsewhere.
            rng = np.random.default_rng(np.random.SeedSequence((self.seed, 2000 + user_id)))
            self._paths[user_id] = (rng, [float(self.start_rate)])
        rng, path = self._paths[user_id]
        while len(path) <= upto:
            n = max(_CHUNK, upto + 1 - len(path))
            steps = rng.uniform(-self.step_size, self.step_size, size=n)
            cur = path[-1]
            for s in steps:
                cur = min(self.max_rate, max(self.min_rate, cur + s))
                path.append(cur)
        return path

    def sample(self, subframe: int, user_id: int) -> float:
        return self._path(user_id, subframe)[subframe]


@dataclass(frozen=True)
class DeepFadeInjector(ChannelModel):
    """Constant base rate with scheduled fades to base * (1 - depth)."""

    base_rate: float
    fade_depth_ratio: float
    fade_duration: int
    fade_times: tuple

    def sample(self, subframe: int, user_id: int) -> float:
        for t0 in self.fade_times:
            if t0 <= subframe < t0 + self.fade_duration:
                return self.base_rate * (1.0 - self.fade_depth_ratio)
        return self.base_rate


@dataclass
class FileTrace(ChannelModel):
    """Dense per-user rate arrays loaded from a trace file."""

    rates: dict  # user_id -> list of rates, index = subframe
    horizon: int

    def sample(self, subframe: int, user_id: int) -> float:
        if subframe >= self.horizon:
            raise TraceExhaustedError(
                f"subframe {subframe} beyond trace horizon {self.horizon}")
        series = self.rates[user_id]
        return series[subframe] if subframe < len(series) else series[-1]


@dataclass(frozen=True)
class TableMapped(ChannelModel):
    """Wraps a model whose values are MCS indices into a 29-entry rate table."""

    inner: ChannelModel
    table: tuple

    def sample(self, subframe: int, user_id: int) -> float:
        idx = int(round(self.inner.sample(subframe, user_id)))
        return self.table[min(max(idx, 0), len(self.table) - 1)]


def load_trace(path: str) -> FileTrace:
    """Parse a `subframe,user_id,mcs_rate` CSV into a gap-free trace.

    Missing subframes are forward-filled per user.  The header line is
    required; malformed rows and non-positive rates raise
    :class:`TraceParseError` naming the offending line.
    """
    entries: dict[int, dict[int, float]] = {}
    with open(path, "r", encoding="utf-8") as fh:
        header = fh.readline()
        if not header or "subframe" not in header:
            raise TraceParseError(f"{path}: missing 'subframe,user_id,mcs_rate' header")
        for lineno, line in enumerate(fh, start=2):
            line = line.strip()
            if not line:
                continue
            parts = line.split(",")
            if len(parts) != 3:
                raise TraceParseError(f"{path}:{lineno}: expected 3 fields, got {len(parts)}")
            try:
                sf, uid, rate = int(parts[0]), int(parts[1]), float(parts[2])
            except ValueError as exc:
                raise TraceParseError(f"{path}:{lineno}: {exc}") from exc
            if rate <= 0:
                raise TraceParseError(f"{path}:{lineno}: mcs_rate must be > 0, got {rate}")
            entries.setdefault(uid, {})[sf] = rate
    if not entries:
        raise TraceParseError(f"{path}: no data rows")
    horizon = max(max(per.keys()) for per in entries.values()) + 1
    rates = {}
    for uid, per in entries.items():
        if 0 not in per:
            raise TraceParseError(f"{path}: user {uid} has no subframe-0 entry to fill from")
        series = []
        last = per[0]
        for sf in range(horizon):
            last = per.get(sf, last)
            series.append(last)
        rates[uid] = series
    return FileTrace(rates=rates, horizon=horizon)


def from_config(cfg: dict, seed: int) -> ChannelModel:
    """Build a channel model from its scenario-config dictionary."""
    kind = cfg.get("kind")
    table = cfg.get("mcs_table")
    if kind == "constant":
        model: ChannelModel = Constant(rate=float(cfg["rate"]))
    elif kind == "steps":
        model = StepSequence(points=tuple((int(t), float(r)) for t, r in cfg["points"]))
    elif kind == "random_walk":
        model = RandomWalk(seed=seed, step_size=float(cfg["step_size"]),
                           min_rate=float(cfg["min_rate"]), max_rate=float(cfg["max_rate"]),
                           start_rate=cfg.get("start_rate"))
    elif kind == "deep_fades":
        model = DeepFadeInjector(base_rate=float(cfg["base_rate"]),
                                 fade_depth_ratio=float(cfg["depth"]),
                                 fade_duration=int(cfg["duration"]),
                                 fade_times=tuple(int(t) for t in cfg["times"]))
    elif kind == "file":
        model = load_trace(cfg["path"])
    else:
        raise ValueError(f"unknown channel kind {kind!r}")
    if table is not None:
        model = TableMapped(inner=model, table=tuple(float(r) for r in table))
    return model
