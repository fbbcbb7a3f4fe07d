"""Physical-layer-informed rate controller run at the base station.

Per subframe it identifies the video frame interval from buffer-arrival
bursts, averages PRB usage over the last complete frame, scales by the
current MCS rate, adds a fair-share margin when the application under-uses
its share, and smooths the result through a sliding-window minimum.  A
burstiness detector decides whether the wireless hop is actually the
bottleneck; when it is not, the controller defers to an end-to-end fallback.
"""
from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field

from .ran import SUBFRAMES_PER_SECOND, ConfigurationError, SubframeReport

WIRELESS = "wireless"
INTERNET = "internet"


@dataclass(frozen=True)
class OccParams:
    beta: float = 0.1                 # fair-share margin gain; 0 disables
    window_length: int = 500          # smoothing window, subframes
    d_threshold: int = 30             # fallback averaging window, subframes
    gap_min: int = 3                  # idle run that ends a burst, subframes
    burst_min_bytes: int = 2400       # arrivals below ~2 packets are control noise
    smear_threshold: float = 0.8      # burstiness score above which hop looks wired-limited
    burst_threshold: float = 0.3      # score below which hop looks wireless-limited
    hysteresis_n: int = 3             # consecutive detector evaluations to switch
    min_rate: float = 50_000.0        # floor on emitted targets, bits/s
    lookback_factor: int = 4          # burst-identification history, x d_threshold

    def __post_init__(self):
        if not 0 <= self.beta < 1:
            raise ConfigurationError("beta must be in [0, 1)")
        if self.window_length < 1:
            raise ConfigurationError("window_length must be >= 1")
        if self.d_threshold < 1:
            raise ConfigurationError("d_threshold must be >= 1")
        if self.gap_min < 1:
            raise ConfigurationError("gap_min must be >= 1")
        if not 0 <= self.burst_threshold < self.smear_threshold <= 1:
            raise ConfigurationError("need 0 <= burst_threshold < smear_threshold <= 1")


@dataclass(frozen=True)
class CapacityEstimate:
    c_p: float        # instantaneous per-subframe capacity, transport-adjusted
    c_f: float        # fair share, transport-adjusted
    b: float          # frame-aware available bandwidth
    c_p_prime: float  # margin-adjusted estimate
    r: float          # smoothed target
    computed_at: int


@dataclass(frozen=True)
class ControllerDecision:
    subframe: int
    estimate: CapacityEstimate
    state: str        # wireless | internet
    d: int
    fallback: bool
    burstiness: float
    mode: str         # occ | gcc_fallback
    target: float | None


# ---------------------------------------------------------------------------
# margin


def apply_app_limit_margin(c_p: float, c_f: float, beta: float) -> float:
    """Raise an under-used capacity estimate a fraction of the way to fair share."""
    if not 0 < beta < 1:
        raise ConfigurationError("beta must be in (0, 1)")
    if c_p <= 0 or c_f <= 0:
        raise ConfigurationError("rates must be positive")
    return c_p + beta * max(c_f - c_p, 0.0)


# ---------------------------------------------------------------------------
# sliding-window minimum


class MinWindow:
    """Sliding minimum over the last `length` pushed samples, O(1) per push."""

    __slots__ = ("length", "_dq", "_count")

    def __init__(self, length: int):
        if length < 1:
            raise ConfigurationError("window length must be >= 1")
        self.length = length
        self._dq: deque = deque()  # (index, value), values increasing
        self._count = 0

    def push(self, value: float) -> float:
        i = self._count
        self._count += 1
        while self._dq and self._dq[-1][1] >= value:
            self._dq.pop()
        self._dq.append((i, value))
        while self._dq[0][0] <= i - self.length:
            self._dq.popleft()
        return self._dq[0][1]

    @property
    def value(self) -> float:
        return self._dq[0][1]


def smooth_target(smoother: MinWindow, sample: float) -> float:
    if sample <= 0:
        raise ValueError("sample must be positive")
    return smoother.push(sample)


# ---------------------------------------------------------------------------
# frame-interval identification and the frozen measurement window


def measure_abw(prb_terms, mcs_now: float, efficiency: float) -> float:
    """Average (allocated + idle/users) PRBs over a window, at the current MCS."""
    terms = list(prb_terms)
    if not terms:
        raise ValueError("empty measurement window")
    return efficiency * SUBFRAMES_PER_SECOND * (sum(terms) / len(terms)) * mcs_now


class FrameWindow:
    """Tracks buffer-arrival bursts to segment telemetry into video frames.

    While two recent bursts bracket a complete frame, the PRB terms of that
    frame stay frozen as the measurement window.  With no identifiable bursts
    (paced or absent traffic) it degrades to a rolling fixed-length window.
    """

    def __init__(self, params: OccParams):
        self.p = params
        self.lookback = params.lookback_factor * params.d_threshold
        self._terms: deque = deque(maxlen=self.lookback)   # (subframe, prb_term)
        self.arrivals: deque = deque(maxlen=self.lookback)  # (subframe, bytes)
        self._roll: deque = deque(maxlen=params.d_threshold)
        self._roll_sum = 0.0
        self._idle_run = 10 ** 9
        self.burst_starts: deque = deque(maxlen=8)
        self._frozen_sum: float | None = None
        self._frozen_d: int | None = None

    def observe(self, subframe: int, prb_term: float, arrival_bytes: int) -> None:
        self._terms.append((subframe, prb_term))
        self.arrivals.append((subframe, arrival_bytes))
        if len(self._roll) == self._roll.maxlen:
            self._roll_sum -= self._roll[0]
        self._roll.append(prb_term)
        self._roll_sum += prb_term
        if arrival_bytes >= self.p.burst_min_bytes:
            if self._idle_run >= self.p.gap_min:
                self._freeze(subframe)
                self.burst_starts.append(subframe)
            self._idle_run = 0
        else:
            self._idle_run += 1

    def _freeze(self, new_start: int) -> None:
        if not self.burst_starts:
            return
        prev = self.burst_starts[-1]
        d = new_start - prev
        if d < 1 or d > len(self._terms) - 1:
            return
        total = 0.0
        for sf, term in self._terms:
            if prev <= sf < new_start:
                total += term
        self._frozen_sum = total
        self._frozen_d = d

    def current(self, subframe: int) -> tuple:
        """Return (d, fallback, mean prb term) for this subframe."""
        recent = [s for s in self.burst_starts if s > subframe - self.lookback]
        if len(recent) >= 2 and self._frozen_d is not None:
            return self._frozen_d, False, self._frozen_sum / self._frozen_d
        n = len(self._roll)
        mean = self._roll_sum / n if n else 0.0
        return self.p.d_threshold, True, mean


def identify_frame_interval(arrival_log, d_threshold: int, gap_min: int = 3,
                            burst_min_bytes: int = 2400) -> tuple:
    """Replay an arrival log and return (d, fallback) as of its last entry.

    arrival_log: iterable of (subframe, bytes) covering every subframe of the
    lookback (zeros may be omitted).
    """
    params = OccParams(d_threshold=d_threshold, gap_min=gap_min,
                       burst_min_bytes=burst_min_bytes)
    window = FrameWindow(params)
    log = dict(arrival_log)
    if not log:
        return d_threshold, True
    last = max(log)
    for sf in range(min(log), last + 1):
        window.observe(sf, 0.0, log.get(sf, 0))
    d, fallback, _ = window.current(last)
    return d, fallback


# ---------------------------------------------------------------------------
# bottleneck detection


class BottleneckDetector:
    """Classifies the bottleneck hop from buffer-arrival burstiness.

    Bursty arrivals mean the wireless hop shapes the traffic; arrivals smeared
    across most subframes mean an upstream (wired) constraint is pacing them.
    """

    def __init__(self, params: OccParams):
        self.p = params
        self.state = WIRELESS
        self.burstiness = 0.0
        self._pending: str | None = None
        self._counter = 0
        self._next_eval = 0
        self._seen = 0

    def maybe_evaluate(self, subframe: int, d: int, arrivals) -> None:
        self._seen += 1
        if subframe < self._next_eval:
            return
        self._next_eval = subframe + d
        lookback = 3 * d
        if self._seen < lookback:
            return
        floor = subframe - lookback
        nonzero = sum(1 for sf, nbytes in arrivals if sf > floor and nbytes > 0)
        self.burstiness = nonzero / lookback
        if self.burstiness > self.p.smear_threshold:
            candidate = INTERNET
        elif self.burstiness < self.p.burst_threshold:
            candidate = WIRELESS
        else:
            candidate = None
        if candidate is None or candidate == self.state:
            self._pending, self._counter = None, 0
            return
        if candidate == self._pending:
            self._counter += 1
        else:
            self._pending, self._counter = candidate, 1
        if self._counter >= self.p.hysteresis_n:
            self.state = candidate
            self._pending, self._counter = None, 0


def detect_bottleneck(arrival_log, d: int, params: OccParams | None = None,
                      state: str = WIRELESS) -> tuple:
    """Classify an arrival log, assuming its pattern persists through hysteresis.

    arrival_log: iterable of (subframe, bytes); the last 3*d subframes form
    the lookback (absent subframes count as zero arrivals).  Returns
    (state, burstiness score).
    """
    p = params if params is not None else OccParams()
    log = dict(arrival_log)
    last = max(log)
    lookback = 3 * d
    nonzero = sum(1 for sf, nbytes in log.items()
                  if sf > last - lookback and nbytes > 0)
    score = nonzero / lookback
    if score > p.smear_threshold:
        candidate = INTERNET
    elif score < p.burst_threshold:
        candidate = WIRELESS
    else:
        candidate = None
    if candidate is not None and candidate != state:
        # The same score repeating for hysteresis_n evaluations flips the state.
        state = candidate
    return state, score


# ---------------------------------------------------------------------------
# the composed controller


class OccController:
    """Per-flow controller state machine driven once per subframe."""

    def __init__(self, params: OccParams | None = None, efficiency: float = 0.94):
        self.p = params if params is not None else OccParams()
        self.efficiency = efficiency
        self.window = FrameWindow(self.p)
        self.smoother = MinWindow(self.p.window_length)
        self.detector = BottleneckDetector(self.p)
        self._first_traffic: int | None = None

    def step(self, report: SubframeReport, arrival_bytes: int,
             fair_share: float) -> ControllerDecision:
        """Consume one subframe of telemetry; returns the decision record.

        fair_share is the scheduler-level share in bits/s; it is scaled by the
        same transport-efficiency factor as the capacity estimates so the
        margin compares like with like.
        """
        sf = report.subframe_index
        prb_term = report.prb_allocated + report.prb_idle / report.n_users
        self.window.observe(sf, prb_term, arrival_bytes)
        if self._first_traffic is None and arrival_bytes > 0:
            self._first_traffic = sf
        d, fallback, prb_mean = self.window.current(sf)
        mcs_now = report.mcs_rate
        scale = self.efficiency * SUBFRAMES_PER_SECOND * mcs_now
        c_p = max(scale * prb_term, self.p.min_rate)
        b = max(scale * prb_mean, self.p.min_rate)
        c_f = self.efficiency * fair_share
        if self.p.beta > 0 and c_f > b:
            c_p_prime = apply_app_limit_margin(b, c_f, self.p.beta)
        else:
            c_p_prime = b
        # Feedback starts only once the measurement window has actually seen
        # this flow's traffic for a full fallback window; samples taken while
        # the buffer was idle would wedge the sliding minimum at the floor.
        ft = self._first_traffic
        warm = ft is not None and sf >= ft + self.p.d_threshold
        if warm and fallback:
            # Fallback before a burst interval is known means identification is
            # still pending; a burst gap longer than the rolling window would
            # drain it to zero and wedge the sliding minimum at the floor, so
            # hold off until a full identification lookback has elapsed.
            warm = sf >= ft + self.p.lookback_factor * self.p.d_threshold
        r = self.smoother.push(c_p_prime) if warm else c_p_prime
        self.detector.maybe_evaluate(sf, d, self.window.arrivals)
        state = self.detector.state
        mode = "occ" if state == WIRELESS else "gcc_fallback"
        estimate = CapacityEstimate(c_p=c_p, c_f=c_f, b=b, c_p_prime=c_p_prime,
                                    r=r, computed_at=sf)
        return ControllerDecision(
            subframe=sf, estimate=estimate, state=state, d=d, fallback=fallback,
            burstiness=self.detector.burstiness, mode=mode,
            target=r if (mode == "occ" and warm) else None)
