"""Reference rate controllers.

GccController is a simplified delay-gradient controller: additive increase of
half a packet per round-trip, multiplicative decrease on a rising one-way
delay trend.  It doubles as the fallback target when the wireless hop stops
being the bottleneck.  PbeController estimates capacity as a fixed-window
moving average of per-subframe telemetry, with no frame alignment, margin, or
smoothing.
"""
from __future__ import annotations

from collections import deque
from dataclasses import dataclass

from .ran import ConfigurationError


@dataclass(frozen=True)
class GccParams:
    packet_size: int = 1500          # bytes; the additive-increase numerator
    rtt: int = 100                   # ms; also the update interval
    overuse_threshold: float = 0.01  # ms of delay growth per ms
    decrease_factor: float = 0.85
    ewma_alpha: float = 0.1          # weight of a new delay-slope sample
    min_rate: float = 50_000.0
    max_rate: float = 1e9

    def __post_init__(self):
        if not 0 < self.decrease_factor < 1:
            raise ConfigurationError("decrease_factor must be in (0, 1)")
        if self.rtt < 1 or self.packet_size <= 0:
            raise ConfigurationError("rtt and packet_size must be positive")
        if self.min_rate <= 0 or self.max_rate < self.min_rate:
            raise ConfigurationError("require 0 < min_rate <= max_rate")

    @property
    def increase_step(self) -> float:
        """Rate added per update: half a packet of bits per round-trip time."""
        return (self.packet_size * 8 / 2) / (self.rtt / 1000.0)


class GccController:
    """Delay-gradient rate controller updated once per round-trip."""

    def __init__(self, params: GccParams | None = None, start_rate: float = 0.0):
        self.p = params if params is not None else GccParams()
        self.rate = min(max(start_rate, self.p.min_rate), self.p.max_rate)
        self.gradient = 0.0
        self._last_delay: float | None = None
        self._last_sample_at = 0
        self._next_update = self.p.rtt

    def observe_delay(self, delay_ms: float, now: int) -> None:
        """Fold one one-way-delay sample into the gradient EWMA."""
        if self._last_delay is not None and now > self._last_sample_at:
            slope = (delay_ms - self._last_delay) / (now - self._last_sample_at)
            self.gradient += self.p.ewma_alpha * (slope - self.gradient)
        self._last_delay = delay_ms
        self._last_sample_at = now

    def re_anchor(self, rate: float) -> None:
        """Adopt an externally applied rate as the additive-increase base."""
        self.rate = min(max(rate, self.p.min_rate), self.p.max_rate)

    def maybe_update(self, now: int) -> float | None:
        """Advance the AIMD state if a round-trip has elapsed; returns the
        new rate on update subframes, else None."""
        if now < self._next_update:
            return None
        self._next_update = now + self.p.rtt
        if self.gradient > self.p.overuse_threshold:
            self.rate *= self.p.decrease_factor
        elif self.gradient >= -self.p.overuse_threshold:
            self.rate += self.p.increase_step
        # A falling gradient (queues draining) holds the rate.
        self.rate = min(max(self.rate, self.p.min_rate), self.p.max_rate)
        return self.rate


def gcc_step(controller: GccController, delay_sample: float, now: int) -> float:
    """One feedback step: fold in a delay sample, update if due, return rate."""
    controller.observe_delay(delay_sample, now)
    controller.maybe_update(now)
    return controller.rate


class PbeController:
    """Fixed-window moving average of per-subframe capacity samples."""

    def __init__(self, window: int = 30, min_rate: float = 50_000.0):
        if window < 1:
            raise ConfigurationError("window must be >= 1 subframe")
        self.window = window
        self.min_rate = min_rate
        self._ring: deque = deque(maxlen=window)
        self._sum = 0.0
        self.rate = min_rate

    def step(self, capacity_sample: float) -> float:
        if len(self._ring) == self._ring.maxlen:
            self._sum -= self._ring[0]
        self._ring.append(capacity_sample)
        self._sum += capacity_sample
        self.rate = max(self._sum / len(self._ring), self.min_rate)
        return self.rate


def pbe_step(controller: PbeController, sample: float) -> float:
    return controller.step(sample)
