"""Deterministic 1 ms-granularity event loop wiring senders, the wired
segment, the base-station scheduler, the controllers, and the feedback path.

Per-subframe phase order (fixed for reproducibility):
  1. feedback events due now reach the senders / sender-side controllers
  2. senders encode (on frame boundaries) and emit paced packets
  3. the wired segment forwards packets; arrivals enqueue at the BS
  4. cross-traffic generators top up competitor buffers
  5. per-flow controllers consume telemetry and emit feedback
  6. the cell schedules PRBs and drains buffers; drained packets are
     delivered at the next subframe boundary (their air subframe ends there)
"""
from __future__ import annotations

import math
from collections import deque
from dataclasses import dataclass, field

import numpy as np

from . import metrics as metrics_mod
from .baselines import GccController, PbeController
from .config import ScenarioConfig
from .controller import ControllerDecision, OccController
from .ran import SUBFRAMES_PER_SECOND, Cell, SubframeReport
from .sender import (AppLimitTrace, Burst, DutyCycle, EncoderModel,
                     PacingMultiplier, Sender, load_app_limit)


def build_pacer(spec: dict):
    mode = spec.get("mode", "burst")
    if mode == "burst":
        return Burst()
    if mode == "duty_cycle":
        return DutyCycle(fraction=float(spec["fraction"]))
    if mode == "multiplier":
        return PacingMultiplier(k=float(spec["k"]))
    raise ValueError(f"unknown pacer mode {mode!r}")


def build_app_limit(spec):
    if spec is None:
        return None
    if isinstance(spec, dict):
        return load_app_limit(spec["path"])
    return AppLimitTrace(segments=tuple((int(s), float(r)) for s, r in spec))


class InternetSegment:
    """Wired path for one flow: token-bucket egress, FIFO queue, fixed
    propagation delay.  Overflow beyond queue_cap tail-drops."""

    def __init__(self, propagation_delay: int = 10, queue_cap: int = 2_000_000,
                 egress_rate: float | None = None, egress_schedule=None):
        self.propagation_delay = propagation_delay
        self.queue_cap = queue_cap
        if egress_schedule is not None:
            self.schedule = [(int(s), r) for s, r in egress_schedule]
        else:
            self.schedule = [(0, egress_rate)]
        self.queue: deque = deque()
        self.queued_bytes = 0
        self.budget_bits = 0.0
        self._calendar: dict[int, list] = {}
        self.dropped: list = []

    def rate_at(self, subframe: int):
        rate = None
        for start, r in self.schedule:
            if start <= subframe:
                rate = r
            else:
                break
        return rate

    def ingress(self, subframe: int, packets) -> None:
        for p in packets:
            if self.queued_bytes + p.size > self.queue_cap:
                self.dropped.append(p)
                continue
            self.queue.append(p)
            self.queued_bytes += p.size

    def advance(self, subframe: int) -> list:
        """Forward under the egress budget; return packets reaching the BS now."""
        rate = self.rate_at(subframe)
        if rate is None:
            self.budget_bits = 0.0
            forwarded = list(self.queue)
            self.queue.clear()
            self.queued_bytes = 0
        else:
            per_sf = rate / SUBFRAMES_PER_SECOND
            # Burst credit is capped near one subframe's worth, but never below
            # the head packet's size: a packet larger than the cap must still
            # accumulate enough credit to pass, at the configured rate.
            cap = 2 * per_sf
            if self.queue:
                cap = max(cap, self.queue[0].size * 8)
            self.budget_bits = min(self.budget_bits + per_sf, cap)
            forwarded = []
            while self.queue and self.queue[0].size * 8 <= self.budget_bits:
                p = self.queue.popleft()
                self.queued_bytes -= p.size
                self.budget_bits -= p.size * 8
                forwarded.append(p)
        if forwarded:
            arrive = subframe + self.propagation_delay
            self._calendar.setdefault(arrive, []).extend(forwarded)
        return self._calendar.pop(subframe, [])


@dataclass
class FlowRuntime:
    index: int
    user_id: int
    controller: str
    feedback_delay: int
    sender: Sender
    segment: InternetSegment
    occ: OccController | None = None
    gcc: GccController | None = None
    pbe: PbeController | None = None
    packets: list = field(default_factory=list)
    decisions: list = field(default_factory=list)
    truth: list = field(default_factory=list)
    estimates: list = field(default_factory=list)
    target_trace: list = field(default_factory=list)
    delay_acc: list = field(default_factory=list)
    metrics: metrics_mod.FlowMetrics | None = None


@dataclass
class CrossRuntime:
    cfg: object
    interval: int = 0


@dataclass
class RunResult:
    config: ScenarioConfig
    seed: int
    horizon: int
    flows: list
    jain: float | None

    def flow(self, index: int) -> FlowRuntime:
        return self.flows[index]


def delivered_bits_between(packets, start_sf: int, end_sf: int) -> int:
    """Bits delivered in [start_sf, end_sf), for windowed throughput checks."""
    return sum(p.size * 8 for p in packets
               if p.delivered_at is not None and start_sf <= p.delivered_at < end_sf)


def _telemetry_view(prev: SubframeReport | None, subframe: int, mcs_now: float,
                    prb_total: int, n_users: int) -> SubframeReport:
    """Telemetry as the controller sees it: PRB counts from the last completed
    subframe, MCS rate refreshed to the current subframe."""
    if prev is None:
        return SubframeReport(subframe_index=subframe, user_id=-1, prb_allocated=0,
                              prb_idle=prb_total, prb_total=prb_total,
                              n_users=n_users, mcs_rate=mcs_now)
    return SubframeReport(subframe_index=subframe, user_id=prev.user_id,
                          prb_allocated=prev.prb_allocated, prb_idle=prev.prb_idle,
                          prb_total=prev.prb_total, n_users=prev.n_users,
                          mcs_rate=mcs_now)


def run_scenario(cfg: ScenarioConfig, seed: int | None = None) -> RunResult:
    seed = cfg.seed if seed is None else seed
    cell = Cell(prb_total=cfg.cell.prb_total,
                scheduler=cfg.cell.build_scheduler(),
                efficiency=cfg.cell.efficiency)
    channels = {u: cfg.build_channel(u, seed) for u in sorted(cfg.channels)}
    occ_params = cfg.occ_params()
    gcc_params = cfg.gcc_params()

    flows: list[FlowRuntime] = []
    for i, fc in enumerate(cfg.flows):
        s = fc.sender
        rng = np.random.default_rng(np.random.SeedSequence((seed, 1000 + i)))
        encoder = EncoderModel(vbv_multiple=s.vbv_multiple, lag_horizon=s.lag_horizon,
                               noise_ratio=s.noise_ratio,
                               content_demand=s.content_demand,
                               mtu_payload=s.mtu_payload)
        sender = Sender(flow_id=i, fps=s.fps, start_rate=s.start_rate,
                        pacer=build_pacer(s.pacer),
                        app_limit=build_app_limit(s.app_limit),
                        encoder=encoder, rng=rng)
        segment = InternetSegment(propagation_delay=cfg.internet.propagation_delay,
                                  queue_cap=cfg.internet.queue_cap,
                                  egress_rate=cfg.internet.egress_rate,
                                  egress_schedule=cfg.internet.egress_schedule)
        fl = FlowRuntime(index=i, user_id=fc.user_id, controller=fc.controller,
                         feedback_delay=fc.feedback_delay, sender=sender,
                         segment=segment)
        if fc.controller == "occ":
            fl.occ = OccController(params=occ_params, efficiency=cfg.cell.efficiency)
            fl.gcc = GccController(params=gcc_params, start_rate=s.start_rate)
        elif fc.controller == "gcc":
            fl.gcc = GccController(params=gcc_params, start_rate=s.start_rate)
        elif fc.controller == "pbe":
            fl.pbe = PbeController(window=cfg.pbe_window(),
                                   min_rate=occ_params.min_rate)
        else:
            raise ValueError(f"unknown controller {fc.controller!r}")
        cell.register_user(fc.user_id)
        flows.append(fl)

    crosses = []
    for cc in cfg.cross_traffic:
        cell.register_user(cc.user_id)
        crosses.append(CrossRuntime(cfg=cc, interval=1000 // cc.fps))

    user_flow = {fl.user_id: fl for fl in flows}
    fb_calendar: dict[int, list] = {}
    prev_reports: dict[int, SubframeReport] = {}
    eff = cfg.cell.efficiency

    def schedule_fb(kind: str, fl: FlowRuntime, value: float, now: int) -> None:
        at = now + max(fl.feedback_delay, 1)
        fb_calendar.setdefault(at, []).append((kind, fl.index, value))

    for t in range(cfg.horizon):
        mcs = {u: channels[u].sample(t, u) for u in sorted(cell.buffers)}

        # 1. feedback arrivals
        for kind, fi, value in fb_calendar.pop(t, ()):
            fl = flows[fi]
            if kind == "target":
                fl.sender.apply_feedback(value, t)
            else:  # one-way delay sample for a delay-gradient controller
                if fl.gcc is not None:
                    fl.gcc.observe_delay(value, t)

        # 2. sender emissions into the wired segment
        for fl in flows:
            emitted = fl.sender.step(t)
            fl.packets.extend(emitted)
            fl.segment.ingress(t, emitted)

        # 3. wired segment -> BS buffers; queue footprint includes the
        # header overhead the transport-efficiency factor accounts for
        for fl in flows:
            for p in fl.segment.advance(t):
                p.arrived_bs_at = t
                cell.enqueue(fl.user_id, t, math.ceil(p.size / eff), p)

        # 4. cross traffic
        for cr in crosses:
            cc = cr.cfg
            if not cc.active(t):
                continue
            buf = cell.buffers[cc.user_id]
            if cc.kind in ("saturating_bulk", "on_off"):
                top_up = cc.backlog - buf.queued_bytes
                if top_up > 0:
                    cell.enqueue(cc.user_id, t, top_up)
            else:  # rtc_like
                if t % cr.interval == 0:
                    burst = round(cc.rate * cr.interval / 8000.0 / eff)
                    cell.enqueue(cc.user_id, t, burst)

        # 5. controllers
        for fl in flows:
            u = fl.user_id
            arrival_bytes = cell.buffers[u].arrival_bytes_at(t)
            fair = cell.fair_share_now(u, mcs)
            fl.truth.append(eff * fair)
            view = _telemetry_view(prev_reports.get(u), t, mcs[u],
                                   cell.prb_total, cell.n_users)
            if fl.controller == "occ":
                dec = fl.occ.step(view, arrival_bytes, fair)
                fl.decisions.append(dec)
                fl.estimates.append(dec.estimate.b)
                upd = fl.gcc.maybe_update(t)
                if dec.target is not None:
                    schedule_fb("target", fl, dec.target, t)
                    fl.gcc.re_anchor(dec.target)
                elif dec.mode == "gcc_fallback" and upd is not None:
                    schedule_fb("target", fl, upd, t)
            elif fl.controller == "pbe":
                prb_term = (view.prb_allocated + view.prb_idle / view.n_users)
                sample = eff * prb_term * mcs[u] * SUBFRAMES_PER_SECOND
                rate = fl.pbe.step(sample)
                fl.estimates.append(rate)
                schedule_fb("target", fl, rate, t)
            else:  # gcc: sender-side, applies its own updates without transport
                upd = fl.gcc.maybe_update(t)
                if upd is not None:
                    fl.sender.apply_feedback(upd, t)
                fl.estimates.append(fl.gcc.rate)

        # 6. schedule, drain, deliver
        delivered = cell.step(t, mcs)
        for u in sorted(delivered):
            pkts = delivered[u]
            if not pkts:
                continue
            fl = user_flow.get(u)
            if fl is None:
                continue
            for p in pkts:
                p.delivered_at = t + 1
            if fl.gcc is not None:
                fl.delay_acc.extend(p.delivered_at - p.sent_at for p in pkts)
        # One delay sample per frame interval (the mean over delivered packets)
        # keeps the gradient sensitive to queue growth across frames without
        # aliasing the intra-frame drain pattern into spurious slopes.
        for fl in flows:
            if fl.gcc is None or not fl.delay_acc:
                continue
            if (t + 1) % fl.sender.frame_interval == 0:
                sample = sum(fl.delay_acc) / len(fl.delay_acc)
                fl.delay_acc.clear()
                schedule_fb("delay", fl, sample, t)
        for u in sorted(cell.buffers):
            prev_reports[u] = cell.subframe_report(u)
        for fl in flows:
            fl.target_trace.append(fl.sender.target)

    for fl in flows:
        fl.metrics = metrics_mod.compute_flow_metrics(
            flow_id=fl.index, controller=fl.controller,
            frames=fl.sender.frames, packets=fl.packets,
            estimates=fl.estimates, truth=fl.truth,
            frame_interval=fl.sender.frame_interval, horizon_sf=cfg.horizon,
            pacing_overruns=fl.sender.overrun_count)
    jain = metrics_mod.jain_index([fl.metrics.delivered_bitrate for fl in flows]) \
        if flows else None
    return RunResult(config=cfg, seed=seed, horizon=cfg.horizon,
                     flows=flows, jain=jain)
