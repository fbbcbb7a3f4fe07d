"""
Spotting when the bottleneck leaves the radio link
==================================================

Radio-level capacity estimates are only meaningful while the radio is the
bottleneck.  When an upstream throttle takes over, packets no longer arrive
at the base station in frame-sized bursts - the arrival pattern smears out.
The detector watches that burstiness, hands control to a delay-gradient
fallback while the pattern stays smeared, and hands it back once bursts
return.

The scenario throttles the wired segment to 10 Mb/s between t=10 s and
t=20 s; the radio link would carry ~48 Mb/s.
"""

from cellrtc.cli import resolve_config
from cellrtc.engine import run_scenario

res = run_scenario(resolve_config("bottleneck_switch"))
decisions = res.flow(0).decisions

flips = [(d.subframe, prev.mode, d.mode)
         for prev, d in zip(decisions, decisions[1:]) if d.mode != prev.mode]

print("mode changes:")
for sf, old, new in flips:
    print(f"  t = {sf:5d} ms: {old} -> {new}")

cross_up = next(d.subframe for d in decisions
                if d.subframe >= 10_000 and d.burstiness > 0.8)
cross_dn = next(d.subframe for d in decisions
                if d.subframe >= 20_000 and d.burstiness < 0.3)
print(f"\narrival pattern smeared past threshold at t = {cross_up} ms; "
      f"switch followed {flips[0][0] - cross_up} ms later")
print(f"burst pattern restored at t = {cross_dn} ms; "
      f"switch back followed {flips[1][0] - cross_dn} ms later")

# Burstiness score sampled around each transition.
print("\nburstiness near the transitions:")
for sf in (9000, 10_100, 15_000, 20_100, 25_000):
    d = decisions[sf]
    print(f"  t = {sf:5d} ms: score {d.burstiness:4.2f}, mode {d.mode}")
