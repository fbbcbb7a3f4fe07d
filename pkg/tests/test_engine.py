"""End-to-end event-loop behavior: causality, conservation, determinism,
feedback timing, cross traffic, wired-segment throttling, and baseline
closed-loop dynamics.
"""
import math

import pytest

from cellrtc.config import parse_config
from cellrtc.engine import (InternetSegment, build_app_limit, build_pacer,
                            delivered_bits_between, run_scenario)
from cellrtc.sender import (AppLimitTrace, Burst, DutyCycle, PacingMultiplier,
                            Packet)


def scenario(**overrides):
    doc = {
        "horizon": 3000,
        "seed": 7,
        "cell": {"prb_total": 51, "scheduler": "rr", "efficiency": 0.94},
        "channels": {"0": {"kind": "constant", "rate": 1000}},
        "flows": [
            {"user_id": 0, "controller": "occ", "feedback_delay": 10,
             "sender": {"fps": 25, "start_rate": 2e6, "vbv_multiple": 2,
                        "noise_ratio": 0.02}}
        ],
        "internet": {"propagation_delay": 10, "queue_cap": 2_000_000},
    }
    doc.update(overrides)
    return parse_config(doc)


class TestInternetSegment:
    def test_unthrottled_passthrough_with_propagation(self):
        seg = InternetSegment(propagation_delay=10, queue_cap=10_000)
        p = Packet(0, 0, 0, 1200, sent_at=5)
        seg.ingress(5, [p])
        for t in range(5, 15):
            assert seg.advance(t) == []
        assert seg.advance(15) == [p]

    def test_token_bucket_spreads_a_burst(self):
        # 1.2 Mb/s egress passes one 1200 B packet every 8 subframes.
        seg = InternetSegment(propagation_delay=0, queue_cap=10 ** 6,
                              egress_rate=1.2e6)
        pkts = [Packet(0, 0, i, 1200) for i in range(3)]
        seg.ingress(0, pkts)
        out_at = {}
        for t in range(0, 40):
            for p in seg.advance(t):
                out_at[p.seq] = t
        assert out_at[0] == 7
        assert out_at[1] == 15
        assert out_at[2] == 23

    def test_queue_cap_tail_drops(self):
        seg = InternetSegment(propagation_delay=0, queue_cap=2000,
                              egress_rate=1e5)
        pkts = [Packet(0, 0, i, 1200) for i in range(3)]
        seg.ingress(0, pkts)
        assert len(seg.dropped) == 2  # only one packet fits under the cap
        assert seg.queued_bytes == 1200

    def test_schedule_switches_rate_over_time(self):
        seg = InternetSegment(propagation_delay=0, queue_cap=10 ** 6,
                              egress_schedule=[[0, None], [100, 1e6]])
        assert seg.rate_at(0) is None
        assert seg.rate_at(99) is None
        assert seg.rate_at(100) == 1e6


class TestBuilders:
    def test_pacer_dispatch(self):
        assert isinstance(build_pacer({"mode": "burst"}), Burst)
        assert isinstance(build_pacer({}), Burst)
        assert isinstance(build_pacer({"mode": "duty_cycle", "fraction": 0.5}),
                          DutyCycle)
        assert isinstance(build_pacer({"mode": "multiplier", "k": 2}),
                          PacingMultiplier)
        with pytest.raises(ValueError):
            build_pacer({"mode": "telekinesis"})

    def test_app_limit_forms(self, tmp_path):
        assert build_app_limit(None) is None
        tr = build_app_limit([[0, 0.2], [100, 1.0]])
        assert isinstance(tr, AppLimitTrace)
        assert tr.ratio_at(0) == 0.2
        p = tmp_path / "limit.csv"
        p.write_text("start_subframe,limit_ratio\n0,0.5\n")
        tr = build_app_limit({"path": str(p)})
        assert tr.ratio_at(10) == 0.5


class TestRunScenarioBasics:
    def test_zero_horizon_returns_an_empty_report(self):
        res = run_scenario(scenario(horizon=0))
        assert res.horizon == 0
        fl = res.flow(0)
        assert fl.packets == []
        assert fl.truth == []
        assert math.isnan(fl.metrics.net_p50)
        assert res.jain is None

    def test_packet_causality_chain(self):
        res = run_scenario(scenario())
        fl = res.flow(0)
        assert fl.packets, "flow never emitted"
        for p in fl.packets:
            assert p.sent_at >= 0
            if p.arrived_bs_at >= 0:
                assert p.arrived_bs_at >= p.sent_at + 10
            if p.delivered_at is not None:
                assert p.arrived_bs_at >= 0
                assert p.delivered_at > p.arrived_bs_at

    def test_packet_conservation(self):
        res = run_scenario(scenario())
        fl = res.flow(0)
        delivered = sum(1 for p in fl.packets if p.delivered_at is not None)
        assert delivered + fl.metrics.dropped_packets == len(fl.packets)
        assert delivered > 0

    def test_deliveries_are_ordered_within_the_flow(self):
        res = run_scenario(scenario())
        times = [p.delivered_at for p in res.flow(0).packets
                 if p.delivered_at is not None]
        assert times == sorted(times)

    def test_identical_runs_are_identical(self):
        a = run_scenario(scenario())
        b = run_scenario(scenario())
        assert a.flow(0).metrics.as_dict() == b.flow(0).metrics.as_dict()
        assert a.flow(0).target_trace == b.flow(0).target_trace
        da = [(d.subframe, d.estimate, d.mode) for d in a.flow(0).decisions]
        db = [(d.subframe, d.estimate, d.mode) for d in b.flow(0).decisions]
        assert da == db

    def test_seed_override_changes_the_run(self):
        a = run_scenario(scenario(), seed=1)
        b = run_scenario(scenario(), seed=2)
        assert a.seed == 1 and b.seed == 2
        sizes_a = [f.size for f in a.flow(0).sender.frames]
        sizes_b = [f.size for f in b.flow(0).sender.frames]
        assert sizes_a != sizes_b  # encoder noise draws differ

    def test_truth_series_covers_every_subframe(self):
        res = run_scenario(scenario(horizon=500))
        fl = res.flow(0)
        assert len(fl.truth) == 500
        assert len(fl.target_trace) == 500
        assert len(fl.estimates) == 500
        # Lone user on a constant channel: share is the whole cell.
        assert fl.truth[-1] == pytest.approx(0.94 * 51e6)

    def test_sender_target_changes_only_on_frame_boundaries(self):
        res = run_scenario(scenario(horizon=4000))
        trace = res.flow(0).target_trace
        changes = [t for t in range(1, len(trace)) if trace[t] != trace[t - 1]]
        assert changes, "controller never moved the sender"
        assert all(t % 40 == 0 for t in changes)

    def test_occ_flow_converges_to_the_transport_adjusted_cell_rate(self):
        res = run_scenario(scenario(horizon=6000))
        fl = res.flow(0)
        cap = 0.94 * 51e6
        tail = fl.target_trace[-1000:]
        assert min(tail) > 0.85 * cap
        assert max(tail) <= cap * 1.001

    def test_unknown_controller_rejected(self):
        cfg = scenario()
        cfg.flows[0].controller = "psychic"
        with pytest.raises(ValueError):
            run_scenario(cfg)


class TestCrossTraffic:
    def test_saturating_competitor_halves_the_fair_share(self):
        cfg = scenario(horizon=500)
        cfg.channels[9] = {"kind": "constant", "rate": 1000}
        cfg.cross_traffic = parse_config({
            "horizon": 1, "channels": {},
            "cross_traffic": [{"kind": "saturating_bulk", "user_id": 9}],
        }).cross_traffic
        res = run_scenario(cfg)
        assert res.flow(0).truth[-1] == pytest.approx(0.94 * 25.5e6)

    def test_on_off_competitor_bites_only_inside_its_span(self):
        cfg = scenario(horizon=4000)
        cfg.channels[9] = {"kind": "constant", "rate": 1000}
        cfg.cross_traffic = parse_config({
            "horizon": 1, "channels": {},
            "cross_traffic": [{"kind": "on_off", "user_id": 9,
                               "spans": [[1000, 2000]]}],
        }).cross_traffic
        res = run_scenario(cfg)
        fl = res.flow(0)
        # Fair share follows registration, not activity: halved throughout.
        assert fl.truth[500] == pytest.approx(0.94 * 25.5e6)
        assert fl.truth[2500] == pytest.approx(0.94 * 25.5e6)
        # The adapted target tracks actual PRB availability: squeezed inside
        # the span, recovered once the competitor's samples age out of the
        # smoothing window.
        cap_full = 0.94 * 51e6
        assert fl.target_trace[1990] < 0.6 * cap_full
        assert fl.target_trace[-1] > 0.85 * cap_full

    def test_rtc_like_competitor_requires_rate(self):
        # Exercised via config validation elsewhere; engine-level smoke run.
        cfg = scenario(horizon=500)
        cfg.channels[8] = {"kind": "constant", "rate": 1000}
        cfg.cross_traffic = parse_config({
            "horizon": 1, "channels": {},
            "cross_traffic": [{"kind": "rtc_like", "user_id": 8,
                               "rate": 8e6, "fps": 25}],
        }).cross_traffic
        res = run_scenario(cfg)
        assert res.flow(0).truth[-1] == pytest.approx(0.94 * 25.5e6)


class TestWiredBottleneck:
    def test_throttled_egress_with_tiny_queue_drops_packets(self):
        cfg = scenario(horizon=2000, internet={
            "propagation_delay": 10, "queue_cap": 5000, "egress_rate": 1e6})
        res = run_scenario(cfg)
        assert res.flow(0).metrics.dropped_packets > 0

    def test_gcc_oscillates_around_a_wired_bottleneck_without_settling_above(self):
        cfg = scenario(horizon=30_000, internet={
            "propagation_delay": 10, "queue_cap": 10_000_000,
            "egress_rate": 10e6})
        cfg.flows[0].controller = "gcc"
        cfg.flows[0].sender.noise_ratio = 0.0
        res = run_scenario(cfg)
        trace = res.flow(0).target_trace
        tail = trace[15_000:]
        cap = 10e6
        above = sum(1 for r in tail if r > 1.1 * cap) / len(tail)
        assert above < 0.05  # never settles above capacity
        assert max(tail) > 0.9 * cap  # but does reach it
        assert min(tail) < 0.95 * cap  # and backs off: a sawtooth, not a line
        # Direction changes confirm sustained oscillation.
        deltas = [b - a for a, b in zip(tail, tail[1:]) if b != a]
        flips = sum(1 for a, b in zip(deltas, deltas[1:]) if a * b < 0)
        assert flips >= 2


class TestDeliveredBitsBetween:
    def test_window_is_half_open(self):
        pkts = [Packet(0, 0, i, 1000, delivered_at=d)
                for i, d in enumerate([10, 20, 30])]
        pkts.append(Packet(0, 0, 3, 1000, delivered_at=None))
        assert delivered_bits_between(pkts, 10, 30) == 16_000
        assert delivered_bits_between(pkts, 0, 100) == 24_000
        assert delivered_bits_between(pkts, 31, 100) == 0


class TestMultiFlow:
    def test_two_symmetric_flows_split_the_cell_fairly(self):
        cfg = scenario(horizon=8000)
        cfg.channels[1] = {"kind": "constant", "rate": 1000}
        second = parse_config({
            "horizon": 1, "channels": {},
            "flows": [{"user_id": 1, "controller": "occ",
                       "feedback_delay": 10,
                       "sender": {"fps": 25, "start_rate": 2e6,
                                  "vbv_multiple": 2, "noise_ratio": 0.02}}],
        }).flows[0]
        cfg.flows.append(second)
        res = run_scenario(cfg)
        assert res.jain is not None
        assert res.jain > 0.9
        for fl in res.flows:
            assert fl.truth[-1] == pytest.approx(0.94 * 25.5e6)
