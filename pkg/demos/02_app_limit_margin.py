"""
Climbing out of an application-limited rut
==========================================

A sender capped by its own content (here: 20% of a 24 Mb/s demand for the
first 5 s) only occupies the resources it needs, so a purely occupancy-based
capacity estimate stays pinned at the capped rate.  The margin term feeds a
fraction of the headroom between that estimate and the flow's fair share back
into the target, letting the probe climb the ladder; with the margin disabled
the target stays flat and the flow ramps slowly after the cap is lifted.
"""

from cellrtc.cli import resolve_config
from cellrtc.engine import delivered_bits_between, run_scenario

RELEASE_SF = 5000  # the application cap lifts here


def run(beta):
    cfg = resolve_config("app_limit_sweep")
    cfg.controller = {"beta": beta}
    return run_scenario(cfg)


for beta in (0.1, 0.0):
    res = run(beta)
    fl = res.flow(0)

    # Mean delivered bitrate well after the cap lifts.
    bits = delivered_bits_between(fl.packets, RELEASE_SF + 1000, res.horizon)
    released = bits / ((res.horizon - RELEASE_SF - 1000) / 1000.0)

    # Target trajectory: before release, at release + 1 s, at the end.
    probe_points = (RELEASE_SF - 1, RELEASE_SF + 1000, res.horizon - 1)
    trace = fl.target_trace
    print(f"beta = {beta}:")
    print(f"  released-phase delivered bitrate: {released / 1e6:6.2f} Mb/s")
    print("  applied target at t = "
          + ", ".join(f"{t} ms: {trace[t] / 1e6:5.2f} Mb/s"
                      for t in probe_points))
