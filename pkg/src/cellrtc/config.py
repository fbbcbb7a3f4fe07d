"""Declarative scenario configuration: JSON schema, validation, round-trip
serialization, dotted-path access for sweeps, and reproducible seed mixing.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field

from . import channel as channel_mod
from .baselines import GccParams
from .controller import OccParams
from .ran import ConfigurationError, ProportionalFair, RoundRobin

CONTROLLER_KINDS = ("occ", "gcc", "pbe")
CROSS_KINDS = ("saturating_bulk", "on_off", "rtc_like")
_MASK64 = (1 << 64) - 1


@dataclass
class CellConfig:
    prb_total: int = 51
    scheduler: object = field(default_factory=dict)  # "rr" | {"kind": "pf", ...}
    efficiency: float = 0.94

    def build_scheduler(self):
        s = self.scheduler or "rr"
        if s == "rr" or (isinstance(s, dict) and s.get("kind", "rr") == "rr"):
            return RoundRobin()
        if s == "pf":
            return ProportionalFair()
        if isinstance(s, dict) and s.get("kind") == "pf":
            return ProportionalFair(ewma_horizon=int(s.get("ewma_horizon", 100)))
        raise ConfigurationError(f"unknown scheduler {s!r}")


@dataclass
class SenderConfig:
    fps: int = 25
    start_rate: float = 2e6
    pacer: dict = field(default_factory=lambda: {"mode": "burst"})
    vbv_multiple: float = 2.0
    lag_horizon: int = 1000
    noise_ratio: float = 0.0
    content_demand: float | None = None
    app_limit: list | None = None  # [[start_subframe, ratio], ...] or {"path": ...}
    mtu_payload: int = 1200


@dataclass
class FlowConfig:
    user_id: int
    controller: str = "occ"
    feedback_delay: int = 10
    sender: SenderConfig = field(default_factory=SenderConfig)


@dataclass
class InternetConfig:
    propagation_delay: int = 10
    egress_rate: float | None = None
    egress_schedule: list | None = None  # [[start_subframe, rate-or-null], ...]
    queue_cap: int = 2_000_000


@dataclass
class CrossTrafficConfig:
    kind: str
    user_id: int
    spans: list = field(default_factory=list)  # [[start, end), ...]; empty = always on
    rate: float | None = None  # rtc_like only
    fps: int = 25
    backlog: int = 1_000_000

    def active(self, subframe: int) -> bool:
        if not self.spans:
            return True
        return any(start <= subframe < end for start, end in self.spans)


@dataclass
class ScenarioConfig:
    horizon: int
    seed: int = 1
    cell: CellConfig = field(default_factory=CellConfig)
    channels: dict = field(default_factory=dict)  # user_id -> channel spec dict
    flows: list = field(default_factory=list)
    internet: InternetConfig = field(default_factory=InternetConfig)
    cross_traffic: list = field(default_factory=list)
    controller: dict = field(default_factory=dict)  # OccParams overrides
    gcc: dict = field(default_factory=dict)         # GccParams overrides
    pbe: dict = field(default_factory=dict)         # {"window": 30}

    def occ_params(self) -> OccParams:
        return OccParams(**self.controller)

    def gcc_params(self) -> GccParams:
        return GccParams(**self.gcc)

    def pbe_window(self) -> int:
        return int(self.pbe.get("window", 30))

    def build_channel(self, user_id: int, seed: int):
        return channel_mod.from_config(self.channels[user_id], seed)


# ---------------------------------------------------------------------------
# parse / serialize


def parse_config(doc: dict) -> ScenarioConfig:
    if not isinstance(doc, dict):
        raise ConfigurationError("top-level config must be an object")
    cell = CellConfig(**doc.get("cell", {}))
    channels = {int(u): spec for u, spec in doc.get("channels", {}).items()}
    flows = []
    for fdoc in doc.get("flows", []):
        fdoc = dict(fdoc)
        sender = SenderConfig(**fdoc.pop("sender", {}))
        flows.append(FlowConfig(sender=sender, **fdoc))
    internet = InternetConfig(**doc.get("internet", {}))
    cross = [CrossTrafficConfig(**c) for c in doc.get("cross_traffic", [])]
    return ScenarioConfig(
        horizon=int(doc.get("horizon", 0)), seed=int(doc.get("seed", 1)),
        cell=cell, channels=channels, flows=flows, internet=internet,
        cross_traffic=cross, controller=dict(doc.get("controller", {})),
        gcc=dict(doc.get("gcc", {})), pbe=dict(doc.get("pbe", {})))


def to_dict(cfg: ScenarioConfig) -> dict:
    doc = {
        "horizon": cfg.horizon,
        "seed": cfg.seed,
        "cell": {"prb_total": cfg.cell.prb_total, "scheduler": cfg.cell.scheduler,
                 "efficiency": cfg.cell.efficiency},
        "channels": {str(u): spec for u, spec in sorted(cfg.channels.items())},
        "flows": [],
        "internet": {"propagation_delay": cfg.internet.propagation_delay,
                     "egress_rate": cfg.internet.egress_rate,
                     "egress_schedule": cfg.internet.egress_schedule,
                     "queue_cap": cfg.internet.queue_cap},
        "cross_traffic": [],
        "controller": dict(cfg.controller),
        "gcc": dict(cfg.gcc),
        "pbe": dict(cfg.pbe),
    }
    for f in cfg.flows:
        s = f.sender
        doc["flows"].append({
            "user_id": f.user_id, "controller": f.controller,
            "feedback_delay": f.feedback_delay,
            "sender": {"fps": s.fps, "start_rate": s.start_rate,
                       "pacer": dict(s.pacer), "vbv_multiple": s.vbv_multiple,
                       "lag_horizon": s.lag_horizon, "noise_ratio": s.noise_ratio,
                       "content_demand": s.content_demand,
                       "app_limit": s.app_limit, "mtu_payload": s.mtu_payload}})
    for c in cfg.cross_traffic:
        doc["cross_traffic"].append({
            "kind": c.kind, "user_id": c.user_id, "spans": c.spans,
            "rate": c.rate, "fps": c.fps, "backlog": c.backlog})
    return doc


def load_config(path: str) -> ScenarioConfig:
    with open(path, "r", encoding="utf-8") as fh:
        try:
            doc = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ConfigurationError(
                f"{path}:{exc.lineno}:{exc.colno}: {exc.msg}") from exc
    return parse_config(doc)


def save_config(cfg: ScenarioConfig, path: str) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(to_dict(cfg), fh, indent=2, sort_keys=True)
        fh.write("\n")


# ---------------------------------------------------------------------------
# validation


def validate(cfg: ScenarioConfig) -> list:
    """Return a list of 'field.path: problem' strings; empty means runnable."""
    v = []
    if cfg.horizon < 0:
        v.append("horizon: must be >= 0")
    if cfg.cell.prb_total <= 0:
        v.append("cell.prb_total: must be > 0")
    if not 0 < cfg.cell.efficiency <= 1:
        v.append("cell.efficiency: must be in (0, 1]")
    try:
        cfg.cell.build_scheduler()
    except ConfigurationError as exc:
        v.append(f"cell.scheduler: {exc}")
    seen_users = set()
    for i, f in enumerate(cfg.flows):
        path = f"flows.{i}"
        if f.controller not in CONTROLLER_KINDS:
            v.append(f"{path}.controller: must be one of {CONTROLLER_KINDS}")
        if f.user_id in seen_users:
            v.append(f"{path}.user_id: duplicate user {f.user_id}")
        seen_users.add(f.user_id)
        if f.user_id not in cfg.channels:
            v.append(f"{path}: no channel configured for user {f.user_id}")
        if f.feedback_delay < 0:
            v.append(f"{path}.feedback_delay: must be >= 0")
        s = f.sender
        if s.fps < 1 or 1000 % s.fps != 0:
            v.append(f"{path}.sender.fps: must divide 1000 subframes/s")
        if s.start_rate <= 0:
            v.append(f"{path}.sender.start_rate: must be > 0")
        if s.vbv_multiple < 1:
            v.append(f"{path}.sender.vbv_multiple: must be >= 1")
        if s.lag_horizon < 0:
            v.append(f"{path}.sender.lag_horizon: must be >= 0")
        if not 0 <= s.noise_ratio < 1:
            v.append(f"{path}.sender.noise_ratio: must be in [0, 1)")
        if s.content_demand is not None and s.content_demand <= 0:
            v.append(f"{path}.sender.content_demand: must be > 0 when set")
        if s.mtu_payload < 1:
            v.append(f"{path}.sender.mtu_payload: must be >= 1")
        mode = s.pacer.get("mode", "burst") if isinstance(s.pacer, dict) else None
        if mode == "duty_cycle":
            frac = s.pacer.get("fraction", 0)
            if not 0 < frac <= 1:
                v.append(f"{path}.sender.pacer.fraction: must be in (0, 1]")
        elif mode == "multiplier":
            if s.pacer.get("k", 0) <= 1:
                v.append(f"{path}.sender.pacer.k: must be > 1")
        elif mode != "burst":
            v.append(f"{path}.sender.pacer.mode: unknown mode {mode!r}")
        if isinstance(s.app_limit, list):
            starts = [seg[0] for seg in s.app_limit]
            if starts != sorted(starts):
                v.append(f"{path}.sender.app_limit: segments must be ordered")
            for j, seg in enumerate(s.app_limit):
                if not 0 < seg[1] <= 1:
                    v.append(f"{path}.sender.app_limit.{j}: ratio must be in (0, 1]")
        elif isinstance(s.app_limit, dict):
            if "path" not in s.app_limit:
                v.append(f"{path}.sender.app_limit: file form needs a 'path'")
    for i, c in enumerate(cfg.cross_traffic):
        path = f"cross_traffic.{i}"
        if c.kind not in CROSS_KINDS:
            v.append(f"{path}.kind: must be one of {CROSS_KINDS}")
        if c.user_id in seen_users:
            v.append(f"{path}.user_id: duplicate user {c.user_id}")
        seen_users.add(c.user_id)
        if c.user_id not in cfg.channels:
            v.append(f"{path}: no channel configured for user {c.user_id}")
        if c.kind == "rtc_like":
            if c.rate is None or c.rate <= 0:
                v.append(f"{path}.rate: must be > 0 for rtc_like")
            if c.fps < 1 or 1000 % c.fps != 0:
                v.append(f"{path}.fps: must divide 1000 subframes/s")
        for j, span in enumerate(c.spans):
            if len(span) != 2 or span[0] >= span[1]:
                v.append(f"{path}.spans.{j}: must be [start, end) with start < end")
    if cfg.internet.propagation_delay < 0:
        v.append("internet.propagation_delay: must be >= 0")
    if cfg.internet.queue_cap <= 0:
        v.append("internet.queue_cap: must be > 0")
    if cfg.internet.egress_rate is not None and cfg.internet.egress_rate <= 0:
        v.append("internet.egress_rate: must be > 0 when set")
    if cfg.internet.egress_schedule is not None:
        starts = [seg[0] for seg in cfg.internet.egress_schedule]
        if starts != sorted(starts):
            v.append("internet.egress_schedule: entries must be ordered")
    try:
        cfg.occ_params()
    except (ConfigurationError, TypeError) as exc:
        v.append(f"controller: {exc}")
    try:
        cfg.gcc_params()
    except (ConfigurationError, TypeError) as exc:
        v.append(f"gcc: {exc}")
    if cfg.pbe_window() < 1:
        v.append("pbe.window: must be >= 1")
    for u, spec in sorted(cfg.channels.items()):
        if not isinstance(spec, dict) or "kind" not in spec:
            v.append(f"channels.{u}: must be an object with a 'kind'")
            continue
        try:
            channel_mod.from_config(spec, seed=0)
        except Exception as exc:
            v.append(f"channels.{u}: {exc}")
    return v


# ---------------------------------------------------------------------------
# dotted-path access (sweep axes)


def get_by_path(doc, path: str):
    node = doc
    for part in path.split("."):
        if isinstance(node, list):
            node = node[int(part)]
        elif isinstance(node, dict):
            if part not in node:
                raise KeyError(path)
            node = node[part]
        else:
            raise KeyError(path)
    return node


def set_by_path(doc, path: str, value) -> None:
    parts = path.split(".")
    node = doc
    for part in parts[:-1]:
        node = node[int(part)] if isinstance(node, list) else node[part]
    leaf = parts[-1]
    if isinstance(node, list):
        node[int(leaf)] = value
    else:
        if leaf not in node:
            raise KeyError(path)
        node[leaf] = value


def example_axes(doc: dict) -> list:
    """Flatten the config into the dotted scalar paths usable as sweep axes."""
    axes = []

    def walk(node, prefix):
        if isinstance(node, dict):
            for k in sorted(node):
                walk(node[k], f"{prefix}.{k}" if prefix else str(k))
        elif isinstance(node, list):
            for i, item in enumerate(node):
                walk(item, f"{prefix}.{i}")
        else:
            axes.append(prefix)

    walk(doc, "")
    return axes


# ---------------------------------------------------------------------------
# seed mixing for sweeps


def mix_seed(base_seed: int, index: int) -> int:
    """Derive the child seed for sweep entry `index` from the base seed.

    splitmix64 applied to (base_seed * 2^32 + index), so children are
    decorrelated and independent of execution order.
    """
    z = ((base_seed << 32) + index) & _MASK64
    z = (z + 0x9E3779B97F4A7C15) & _MASK64
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK64
    return (z ^ (z >> 31)) & _MASK64
