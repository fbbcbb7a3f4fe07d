"""Evaluation metrics computed from run event logs.

All latencies are in milliseconds (= subframes).  Percentiles use the
nearest-rank method; the 99.9th over fewer than 1000 samples degrades to the
maximum and sets a small-sample flag.  Frame latency honors decode
dependencies: a frame is decodable only once all its packets have arrived and
its reference frame is decodable.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field, fields

STALL_THRESHOLD_MS = 150.0


def percentile(samples, p: float) -> float:
    """Nearest-rank percentile; samples need not be sorted."""
    if not samples:
        return math.nan
    ordered = sorted(samples)
    rank = max(1, math.ceil(p / 100.0 * len(ordered)))
    return ordered[rank - 1]


def jain_index(throughputs) -> float | None:
    """(sum x)^2 / (n sum x^2); None when all flows are idle."""
    xs = list(throughputs)
    if not xs or all(x == 0 for x in xs):
        return None
    return sum(xs) ** 2 / (len(xs) * sum(x * x for x in xs))


def estimation_accuracy(estimates, truth) -> float:
    """Mean of max(0, 1 - |estimate - truth| / truth); truth-zero points skipped."""
    total, n = 0.0, 0
    for e, t in zip(estimates, truth):
        if t == 0:
            continue
        total += max(0.0, 1.0 - abs(e - t) / t)
        n += 1
    return total / n if n else math.nan


def network_latencies(packets) -> list:
    return [p.delivered_at - p.sent_at for p in packets if p.delivered_at is not None]


def frame_decode_times(frames, packets) -> dict:
    """Map frame_id -> decode subframe (inf when undecodable)."""
    arrivals: dict[int, list] = {}
    for p in packets:
        arrivals.setdefault(p.frame_id, []).append(p.delivered_at)
    decode: dict[int, float] = {}
    for f in sorted(frames, key=lambda fr: fr.frame_id):
        times = arrivals.get(f.frame_id, [])
        if len(times) < f.packet_count or any(t is None for t in times):
            decode[f.frame_id] = math.inf
            continue
        t = max(times)
        if f.reference_frame is not None:
            t = max(t, decode.get(f.reference_frame, math.inf))
        decode[f.frame_id] = t
    return decode


def frame_latencies(frames, packets) -> list:
    decode = frame_decode_times(frames, packets)
    return [decode[f.frame_id] - f.encode_time for f in frames]


def valid_bitrate(frames, latencies, horizon_sf: int,
                  threshold_ms: float = STALL_THRESHOLD_MS) -> float:
    """Bits of frames delivered under the stall threshold, over wall time."""
    if horizon_sf <= 0:
        return 0.0
    good = sum(f.size * 8 for f, lat in zip(frames, latencies) if lat <= threshold_ms)
    return good / (horizon_sf / 1000.0)


def encoder_overshoot(frames, truth, frame_interval: int, horizon_sf: int) -> float:
    """Time-normalized integral of emitted rate above the capacity ground truth."""
    if horizon_sf <= 0 or not frames:
        return 0.0
    excess = 0.0
    for f in frames:
        rate = f.size * 8 / (frame_interval / 1000.0)
        span = truth[f.encode_time:f.encode_time + frame_interval]
        if not span:
            continue
        truth_mean = sum(span) / len(span)
        excess += max(0.0, rate - truth_mean) * (frame_interval / 1000.0)
    return excess / (horizon_sf / 1000.0)


@dataclass
class FlowMetrics:
    flow_id: int
    controller: str
    net_p50: float = math.nan
    net_p90: float = math.nan
    net_p99: float = math.nan
    net_p999: float = math.nan
    small_sample: bool = False
    frame_p50: float = math.nan
    frame_p99: float = math.nan
    stall_rate: float = math.nan
    frame_bitrate_mean: float = 0.0
    frame_bitrate_std: float = 0.0
    valid_bitrate: float = 0.0
    delivered_bitrate: float = 0.0
    estimation_accuracy: float = math.nan
    encoder_overshoot: float = 0.0
    dropped_packets: int = 0
    pacing_overruns: int = 0

    def as_dict(self) -> dict:
        return {f.name: getattr(self, f.name) for f in fields(self)}


def compute_flow_metrics(flow_id: int, controller: str, frames, packets,
                         estimates, truth, frame_interval: int, horizon_sf: int,
                         pacing_overruns: int = 0,
                         stall_threshold_ms: float = STALL_THRESHOLD_MS) -> FlowMetrics:
    m = FlowMetrics(flow_id=flow_id, controller=controller,
                    pacing_overruns=pacing_overruns)
    lat = network_latencies(packets)
    if lat:
        m.net_p50 = percentile(lat, 50)
        m.net_p90 = percentile(lat, 90)
        m.net_p99 = percentile(lat, 99)
        m.net_p999 = percentile(lat, 99.9)
        m.small_sample = len(lat) < 1000
    m.dropped_packets = sum(1 for p in packets if p.delivered_at is None)
    if frames:
        flat = frame_latencies(frames, packets)
        finite = [x for x in flat if math.isfinite(x)]
        if finite:
            m.frame_p50 = percentile(finite, 50)
            m.frame_p99 = percentile(finite, 99)
        m.stall_rate = sum(1 for x in flat if x > stall_threshold_ms) / len(flat)
        if horizon_sf > 0:
            horizon_s = horizon_sf / 1000.0
            m.frame_bitrate_mean = sum(f.size * 8 for f in frames) / horizon_s
            rates = [f.size * 8 / (frame_interval / 1000.0) for f in frames]
            mean_r = sum(rates) / len(rates)
            m.frame_bitrate_std = math.sqrt(
                sum((r - mean_r) ** 2 for r in rates) / len(rates))
            m.valid_bitrate = valid_bitrate(frames, flat, horizon_sf, stall_threshold_ms)
            m.encoder_overshoot = encoder_overshoot(frames, truth, frame_interval,
                                                    horizon_sf)
    if horizon_sf > 0:
        delivered = sum(p.size * 8 for p in packets if p.delivered_at is not None)
        m.delivered_bitrate = delivered / (horizon_sf / 1000.0)
    if estimates and truth:
        m.estimation_accuracy = estimation_accuracy(estimates, truth)
    return m


def format_value(x) -> str:
    """Stable text form for CSV cells: repr for floats, plain for the rest."""
    if isinstance(x, bool):
        return "1" if x else "0"
    if isinstance(x, float):
        # float subclasses (e.g. numpy scalars) repr differently; normalize
        # so CSV cells are always plain numerals.
        return repr(float(x))
    if x is None:
        return ""
    return str(x)
