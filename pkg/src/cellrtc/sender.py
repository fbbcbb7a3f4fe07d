"""Real-time video sender: frame generation under a target rate with a
virtual-buffer encoder-lag model, application-limit traces, and a pacer that
shapes each frame's packets into a configurable duty cycle.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

DEFAULT_MTU_PAYLOAD = 1200
# Glide gain: multiplied by the virtual-buffer multiple to set how slowly the
# encoder tracks a falling target.  Small multiples conform immediately; a 25x
# buffer yields a response time of a few hundred milliseconds.
_GLIDE_GAIN = 0.12


@dataclass(frozen=True)
class VideoFrame:
    frame_id: int
    encode_time: int
    size: int
    packet_count: int
    reference_frame: int | None


@dataclass
class Packet:
    flow_id: int
    frame_id: int
    seq: int
    size: int
    sent_at: int = -1
    arrived_bs_at: int = -1
    delivered_at: int | None = None


@dataclass(frozen=True)
class Burst:
    pass


@dataclass(frozen=True)
class DutyCycle:
    fraction: float

    def __post_init__(self):
        if not 0 < self.fraction <= 1:
            raise ValueError("duty-cycle fraction must be in (0, 1]")


@dataclass(frozen=True)
class PacingMultiplier:
    k: float

    def __post_init__(self):
        if self.k <= 1:
            raise ValueError("pacing multiplier must exceed 1")


@dataclass
class AppLimitTrace:
    """Piecewise-constant multiplicative cap on the content's demanded bitrate."""

    segments: tuple  # ((start_subframe, limit_ratio), ...)

    def __post_init__(self):
        starts = [s for s, _ in self.segments]
        if starts != sorted(starts):
            raise ValueError("app-limit segments must be ordered by start_subframe")
        for _, ratio in self.segments:
            if not 0 < ratio <= 1:
                raise ValueError(f"limit_ratio must be in (0, 1], got {ratio}")

    def ratio_at(self, subframe: int) -> float:
        ratio = 1.0
        for start, r in self.segments:
            if start <= subframe:
                ratio = r
            else:
                break
        return ratio


def load_app_limit(path: str) -> AppLimitTrace:
    """Parse `start_subframe,limit_ratio` lines (header required)."""
    segments = []
    with open(path, "r", encoding="utf-8") as fh:
        header = fh.readline()
        if not header or "start_subframe" not in header:
            raise ValueError(f"{path}: missing 'start_subframe,limit_ratio' header")
        for lineno, line in enumerate(fh, start=2):
            line = line.strip()
            if not line:
                continue
            parts = line.split(",")
            if len(parts) != 2:
                raise ValueError(f"{path}:{lineno}: expected 2 fields")
            segments.append((int(parts[0]), float(parts[1])))
    return AppLimitTrace(segments=tuple(segments))


class EncoderModel:
    """Leaky-bucket virtual buffer around a parametric frame-size generator.

    Rises in the target are followed on the next frame.  On a falling target
    the output glides down exponentially, spending virtual-buffer credit; the
    glide factor grows with the buffer multiple, and both the credit cap and
    ``lag_horizon`` bound how long the output may exceed the target.
    """

    def __init__(self, vbv_multiple: float = 2.0, lag_horizon: int = 1000,
                 noise_ratio: float = 0.0, content_demand: float | None = None,
                 mtu_payload: int = DEFAULT_MTU_PAYLOAD):
        if vbv_multiple < 1:
            raise ValueError("vbv_multiple must be >= 1")
        if lag_horizon < 0:
            raise ValueError("lag_horizon must be >= 0")
        self.vbv_multiple = vbv_multiple
        self.lag_horizon = lag_horizon
        self.noise_ratio = noise_ratio
        self.content_demand = content_demand
        self.mtu_payload = mtu_payload
        self.vbv_occupancy = 0.0
        self._current_rate: float | None = None
        self._glide_started: int | None = None
        if lag_horizon == 0:
            self._glide = 0.0
        else:
            self._glide = 1.0 - 1.0 / max(1.0, _GLIDE_GAIN * vbv_multiple)

    def desired_rate(self, target: float, app_limit: float) -> float:
        if self.content_demand is not None:
            return min(target, app_limit * self.content_demand)
        return target

    def encode_frame(self, frame_id: int, now: int, target: float, app_limit: float,
                     frame_interval: int, rng: np.random.Generator | None) -> VideoFrame:
        desired = self.desired_rate(target, app_limit)
        if self._current_rate is None or desired >= self._current_rate:
            self._current_rate = desired
            self._glide_started = None
        else:
            if self._glide_started is None:
                self._glide_started = now
            if now - self._glide_started >= self.lag_horizon:
                self._current_rate = desired
            else:
                self._current_rate = desired + (self._current_rate - desired) * self._glide
        desired_size = desired * frame_interval / 8000.0
        size = self._current_rate * frame_interval / 8000.0
        capacity = self.vbv_multiple * desired_size
        excess = size - desired_size
        if excess > 0:
            room = capacity - self.vbv_occupancy
            if excess > room:
                size = desired_size + max(room, 0.0)
                excess = size - desired_size
                self._current_rate = size * 8000.0 / frame_interval
            self.vbv_occupancy += max(excess, 0.0)
        else:
            self.vbv_occupancy = max(0.0, self.vbv_occupancy + excess)
        if rng is not None and self.noise_ratio > 0:
            size *= rng.uniform(1.0 - self.noise_ratio, 1.0 + self.noise_ratio)
        size_b = max(1, round(size))
        count = max(1, math.ceil(size_b / self.mtu_payload))
        return VideoFrame(frame_id=frame_id, encode_time=now, size=size_b,
                          packet_count=count,
                          reference_frame=frame_id - 1 if frame_id > 0 else None)


def pace(frame: VideoFrame, packets: list, pacer, frame_interval: int,
         target_rate: float) -> tuple:
    """Map a frame's packets to subframe offsets within the frame interval.

    Returns (schedule, overrun) where schedule is a list of (offset, packet)
    and overrun flags packets that could not fit before the next frame and
    were forced into the final subframe.
    """
    count = len(packets)
    overrun = False
    if isinstance(pacer, Burst):
        return [(0, p) for p in packets], False
    if isinstance(pacer, DutyCycle):
        span = max(1, math.ceil(pacer.fraction * frame_interval))
        span = min(span, frame_interval)
        return [(i * span // count, p) for i, p in enumerate(packets)], False
    if isinstance(pacer, PacingMultiplier):
        budget_per_sf = pacer.k * target_rate / 8000.0
        schedule = []
        sent = 0.0
        offset = 0
        for p in packets:
            while sent + p.size > budget_per_sf * (offset + 1):
                offset += 1
                if offset >= frame_interval:
                    break
            if offset >= frame_interval:
                overrun = True
                offset = frame_interval - 1
            schedule.append((offset, p))
            sent += p.size
        return schedule, overrun
    raise ValueError(f"unknown pacer {pacer!r}")


class Sender:
    """One video flow: encodes at a fixed frame rate, paces, applies feedback."""

    def __init__(self, flow_id: int, fps: int = 25, start_rate: float = 2e6,
                 pacer=None, app_limit: AppLimitTrace | None = None,
                 encoder: EncoderModel | None = None,
                 rng: np.random.Generator | None = None):
        if 1000 % fps != 0:
            raise ValueError("fps must divide 1000 subframes/s evenly")
        self.flow_id = flow_id
        self.fps = fps
        self.frame_interval = 1000 // fps
        self.pacer = pacer if pacer is not None else Burst()
        self.app_limit = app_limit
        self.encoder = encoder if encoder is not None else EncoderModel()
        self.rng = rng
        self.target = start_rate
        self._pending_target: float | None = None
        self.next_seq = 0
        self.next_frame_id = 0
        self.frames: list[VideoFrame] = []
        self._calendar: dict[int, list] = {}
        self.overrun_count = 0

    def apply_feedback(self, rate: float, arrival_subframe: int) -> None:
        if rate <= 0:
            raise ValueError("feedback rate must be positive")
        self._pending_target = rate

    def _packetize(self, frame: VideoFrame) -> list:
        sizes = [self.encoder.mtu_payload] * (frame.packet_count - 1)
        sizes.append(frame.size - self.encoder.mtu_payload * (frame.packet_count - 1))
        packets = []
        for sz in sizes:
            packets.append(Packet(flow_id=self.flow_id, frame_id=frame.frame_id,
                                  seq=self.next_seq, size=sz))
            self.next_seq += 1
        return packets

    def step(self, subframe: int) -> list:
        """Advance one subframe; returns the packets emitted now."""
        if subframe % self.frame_interval == 0:
            if self._pending_target is not None:
                self.target = self._pending_target
                self._pending_target = None
            ratio = self.app_limit.ratio_at(subframe) if self.app_limit else 1.0
            frame = self.encoder.encode_frame(self.next_frame_id, subframe,
                                              self.target, ratio,
                                              self.frame_interval, self.rng)
            self.next_frame_id += 1
            self.frames.append(frame)
            packets = self._packetize(frame)
            schedule, overrun = pace(frame, packets, self.pacer,
                                     self.frame_interval, self.target)
            if overrun:
                self.overrun_count += 1
            for offset, p in schedule:
                self._calendar.setdefault(subframe + offset, []).append(p)
        due = self._calendar.pop(subframe, [])
        for p in due:
            p.sent_at = subframe
        return due
