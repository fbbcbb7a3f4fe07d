"""Base-station MAC/PHY model: per-subframe PRB scheduling, per-user downlink
buffers, and the telemetry the physical-layer controllers consume.

Rates are bits per PRB per subframe; one subframe is 1 ms, so multiplying a
per-subframe rate by 1000 yields bits/second.
"""
from __future__ import annotations

import math
from collections import deque
from dataclasses import dataclass

SUBFRAMES_PER_SECOND = 1000

# How many subframes of arrival history a buffer retains for the controllers.
ARRIVAL_LOG_SPAN = 512

_EWMA_EPS = 1e-9


class ConfigurationError(Exception):
    pass


@dataclass(frozen=True)
class RoundRobin:
    pass


@dataclass(frozen=True)
class ProportionalFair:
    ewma_horizon: int = 100

    def __post_init__(self):
        if self.ewma_horizon < 1:
            raise ConfigurationError("ewma_horizon must be >= 1")


@dataclass(frozen=True)
class SubframeReport:
    """Per-user physical-layer telemetry for one completed subframe."""

    subframe_index: int
    user_id: int
    prb_allocated: int
    prb_idle: int
    prb_total: int
    n_users: int
    mcs_rate: float


class DlBuffer:
    """Downlink buffer for one user: queued packets plus arrival history.

    Cross-traffic users queue raw bytes (packet=None); video flows queue real
    packet objects so the drain can report deliveries.
    """

    __slots__ = ("user_id", "queued_bytes", "packets", "arrivals")

    def __init__(self, user_id: int):
        self.user_id = user_id
        self.queued_bytes = 0
        self.packets: deque = deque()  # [packet, remaining queue bytes] pairs
        self.arrivals: deque = deque()  # (subframe, bytes) for nonzero arrivals

    def enqueue(self, subframe: int, nbytes: int, packet=None) -> None:
        """Queue nbytes (the packet's on-air footprint, which may exceed its
        payload size by the header-overhead ratio)."""
        if nbytes <= 0:
            return
        self.queued_bytes += nbytes
        if packet is not None:
            self.packets.append([packet, nbytes])
        if self.arrivals and self.arrivals[-1][0] == subframe:
            self.arrivals[-1] = (subframe, self.arrivals[-1][1] + nbytes)
        else:
            self.arrivals.append((subframe, nbytes))
        while self.arrivals and self.arrivals[0][0] < subframe - ARRIVAL_LOG_SPAN:
            self.arrivals.popleft()

    def drain(self, capacity_bytes: int) -> tuple:
        """Transmit up to capacity_bytes; return (bytes_sent, delivered packets)."""
        sent = min(self.queued_bytes, capacity_bytes)
        self.queued_bytes -= sent
        delivered = []
        budget = sent
        while budget > 0 and self.packets:
            head = self.packets[0]
            if budget >= head[1]:
                budget -= head[1]
                delivered.append(self.packets.popleft()[0])
            else:
                head[1] -= budget
                budget = 0
        return sent, delivered

    def arrival_bytes_at(self, subframe: int) -> int:
        for sf, nbytes in reversed(self.arrivals):
            if sf == subframe:
                return nbytes
            if sf < subframe:
                break
        return 0


def _largest_remainder(quotas: dict, total: int) -> dict:
    """Round fractional PRB quotas to integers summing to total.

    Floors first, then hands out the leftover one PRB at a time by largest
    fractional remainder, breaking ties toward the lowest user id.
    """
    floors = {u: int(math.floor(q)) for u, q in quotas.items()}
    leftover = total - sum(floors.values())
    order = sorted(quotas, key=lambda u: (-(quotas[u] - floors[u]), u))
    for u in order[:leftover]:
        floors[u] += 1
    return floors


def schedule_subframe(demands: dict, mcs_rates: dict, kind, prb_total: int,
                      weights: dict | None = None) -> dict:
    """Allocate integer PRBs for one subframe.

    demands: user_id -> queued bytes; mcs_rates: user_id -> bits/PRB/subframe.
    Water-fills: a user never receives more PRBs than its demand occupies, and
    freed PRBs recirculate to still-hungry users.  Shares are equal under
    round-robin; under proportional fair they follow the supplied weights
    (rate / EWMA throughput).
    """
    if prb_total <= 0:
        raise ConfigurationError("prb_total must be positive")
    if not demands:
        raise ConfigurationError("no users registered")
    need = {}
    for u, nbytes in demands.items():
        rate = mcs_rates[u]
        need[u] = math.ceil(nbytes * 8 / rate) if nbytes > 0 else 0
    alloc = {u: 0 for u in demands}
    active = sorted(u for u in demands if need[u] > 0)
    remaining = prb_total
    while active and remaining > 0:
        if isinstance(kind, ProportionalFair) and weights:
            w = {u: max(weights.get(u, 0.0), _EWMA_EPS) for u in active}
        else:
            w = {u: 1.0 for u in active}
        wsum = sum(w.values())
        quotas = {u: remaining * w[u] / wsum for u in active}
        capped = [u for u in active if need[u] <= quotas[u]]
        if not capped:
            share = _largest_remainder(quotas, remaining)
            for u in active:
                give = min(share[u], need[u])
                alloc[u] += give
                remaining -= give
            break
        for u in capped:
            alloc[u] += need[u]
            remaining -= need[u]
            active.remove(u)
    # A final pass mops up PRBs freed by integer rounding.
    for u in sorted(demands):
        if remaining <= 0:
            break
        short = need[u] - alloc[u]
        if short > 0:
            give = min(short, remaining)
            alloc[u] += give
            remaining -= give
    return alloc


class Cell:
    """One base station: registered users, their buffers, and the scheduler."""

    def __init__(self, prb_total: int = 51, scheduler=None, efficiency: float = 0.94):
        if prb_total <= 0:
            raise ConfigurationError("prb_total must be positive")
        if not 0 < efficiency <= 1:
            raise ConfigurationError("efficiency must be in (0, 1]")
        self.prb_total = prb_total
        self.scheduler = scheduler if scheduler is not None else RoundRobin()
        self.efficiency = efficiency
        self.buffers: dict[int, DlBuffer] = {}
        self.ewma_tput: dict[int, float] = {}
        self._last_reports: dict[int, SubframeReport] = {}
        self._last_mcs: dict[int, float] = {}

    # -- registration / enqueue ------------------------------------------
    def register_user(self, user_id: int) -> DlBuffer:
        if user_id not in self.buffers:
            self.buffers[user_id] = DlBuffer(user_id)
            self.ewma_tput[user_id] = 0.0
        return self.buffers[user_id]

    @property
    def n_users(self) -> int:
        return len(self.buffers)

    def enqueue(self, user_id: int, subframe: int, nbytes: int, packet=None) -> None:
        self.buffers[user_id].enqueue(subframe, nbytes, packet)

    # -- the per-subframe scheduling + drain pass ------------------------
    def pf_weights(self, mcs_rates: dict) -> dict:
        return {u: mcs_rates[u] / max(self.ewma_tput[u], _EWMA_EPS)
                for u in self.buffers}

    def step(self, subframe: int, mcs_rates: dict) -> dict:
        """Schedule and drain one subframe; returns user_id -> delivered packets."""
        if not self.buffers:
            raise ConfigurationError("no users registered")
        demands = {u: b.queued_bytes for u, b in self.buffers.items()}
        weights = None
        if isinstance(self.scheduler, ProportionalFair):
            weights = self.pf_weights(mcs_rates)
        alloc = schedule_subframe(demands, mcs_rates, self.scheduler,
                                  self.prb_total, weights)
        idle = self.prb_total - sum(alloc.values())
        delivered = {}
        for u in sorted(self.buffers):
            capacity = int(alloc[u] * mcs_rates[u] // 8)
            sent, pkts = self.buffers[u].drain(capacity)
            delivered[u] = pkts
            if isinstance(self.scheduler, ProportionalFair):
                h = self.scheduler.ewma_horizon
                self.ewma_tput[u] += (sent * 8 - self.ewma_tput[u]) / h
            self._last_reports[u] = SubframeReport(
                subframe_index=subframe, user_id=u, prb_allocated=alloc[u],
                prb_idle=idle, prb_total=self.prb_total, n_users=self.n_users,
                mcs_rate=mcs_rates[u])
        self._last_mcs = dict(mcs_rates)
        return delivered

    def subframe_report(self, user_id: int) -> SubframeReport:
        if user_id not in self._last_reports:
            raise KeyError(f"no completed subframe for user {user_id}")
        return self._last_reports[user_id]

    # -- fair share -------------------------------------------------------
    def fair_share_now(self, user_id: int, mcs_rates: dict) -> float:
        """Converged per-user allocation under the active scheduler, bits/s."""
        mcs_now = mcs_rates[user_id]
        full = self.prb_total * mcs_now * SUBFRAMES_PER_SECOND
        if isinstance(self.scheduler, ProportionalFair):
            w = self.pf_weights(mcs_rates)
            share = w[user_id] / sum(w.values())
            return min(full, share * full)
        return min(full, full / self.n_users)

    def fair_share(self, user_id: int) -> float:
        """fair_share_now evaluated at the last completed subframe's rates."""
        self.subframe_report(user_id)
        return self.fair_share_now(user_id, self._last_mcs)
