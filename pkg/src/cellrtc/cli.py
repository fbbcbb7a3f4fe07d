"""Command-line front end: validate and execute scenarios, parameter sweeps,
and controller comparisons; write metrics and event logs as CSV/JSON.

Scenario arguments accept either a JSON file path or the name of a packaged
preset (see `cellrtc.presets`).
"""
from __future__ import annotations

import argparse
import json
import os
import sys
from importlib import resources

from . import config as config_mod
from . import metrics as metrics_mod
from .engine import RunResult, run_scenario

DECISION_HEADER = ["subframe", "c_p", "c_f", "b", "c_p_prime", "r",
                   "state", "d", "fallback"]
PACKET_HEADER = ["flow_id", "frame_id", "seq", "sent_at", "arrived_bs_at",
                 "delivered_at", "size"]


def preset_names() -> list:
    root = resources.files("cellrtc") / "presets"
    return sorted(p.name[:-5] for p in root.iterdir() if p.name.endswith(".json"))


def resolve_config(name_or_path: str) -> config_mod.ScenarioConfig:
    if os.path.exists(name_or_path):
        return config_mod.load_config(name_or_path)
    candidate = resources.files("cellrtc") / "presets" / f"{name_or_path}.json"
    if candidate.is_file():
        return config_mod.parse_config(json.loads(candidate.read_text()))
    raise FileNotFoundError(
        f"no such config file or preset: {name_or_path!r}; "
        f"presets: {', '.join(preset_names())}")


def write_csv(path: str, header, rows) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(",".join(header) + "\n")
        for row in rows:
            fh.write(",".join(metrics_mod.format_value(v) for v in row) + "\n")


def decision_rows(flow):
    for dec in flow.decisions:
        e = dec.estimate
        yield (dec.subframe, e.c_p, e.c_f, e.b, e.c_p_prime, e.r,
               dec.state, dec.d, dec.fallback)


def packet_rows(flow):
    for p in flow.packets:
        yield (p.flow_id, p.frame_id, p.seq, p.sent_at,
               p.arrived_bs_at if p.arrived_bs_at >= 0 else None,
               p.delivered_at, p.size)


def metrics_header() -> list:
    names = list(metrics_mod.FlowMetrics(flow_id=0, controller="occ").as_dict())
    return names + ["jain"]


def metrics_rows(result: RunResult):
    for fl in result.flows:
        d = fl.metrics.as_dict()
        yield [d[k] for k in d] + [result.jain]


def write_run_outputs(result: RunResult, outdir: str, log_decisions: bool = False,
                      log_packets: bool = False) -> None:
    os.makedirs(outdir, exist_ok=True)
    config_mod.save_config(result.config, os.path.join(outdir, "config.json"))
    write_csv(os.path.join(outdir, "metrics.csv"), metrics_header(),
              metrics_rows(result))
    doc = {"seed": result.seed, "horizon": result.horizon, "jain": result.jain,
           "flows": [fl.metrics.as_dict() for fl in result.flows]}
    with open(os.path.join(outdir, "metrics.json"), "w", encoding="utf-8") as fh:
        json.dump(doc, fh, indent=2, sort_keys=True)
        fh.write("\n")
    if log_decisions:
        for fl in result.flows:
            if fl.decisions:
                write_csv(os.path.join(outdir, f"decisions_flow{fl.index}.csv"),
                          DECISION_HEADER, decision_rows(fl))
    if log_packets:
        for fl in result.flows:
            write_csv(os.path.join(outdir, f"packets_flow{fl.index}.csv"),
                      PACKET_HEADER, packet_rows(fl))


def _parse_values(text: str) -> list:
    values = []
    for token in text.split(","):
        token = token.strip()
        if not token:
            continue
        try:
            values.append(json.loads(token))
        except json.JSONDecodeError:
            values.append(token)
    return values


def _fail_validation(violations) -> int:
    print(json.dumps({"errors": violations}, indent=2))
    return 2


def _summary(result: RunResult) -> str:
    lines = []
    for fl in result.flows:
        m = fl.metrics
        lines.append(
            f"flow {fl.index} ({fl.controller}): "
            f"valid {m.valid_bitrate / 1e6:.2f} Mb/s, "
            f"p99 {m.net_p99:.1f} ms, stalls {m.stall_rate:.3f}")
    if result.jain is not None:
        lines.append(f"jain {result.jain:.4f}")
    return "\n".join(lines)


def cmd_run(args) -> int:
    cfg = resolve_config(args.config)
    violations = config_mod.validate(cfg)
    if violations:
        return _fail_validation(violations)
    result = run_scenario(cfg, seed=args.seed)
    outdir = args.out or f"{_stem(args.config)}_out"
    write_run_outputs(result, outdir, log_decisions=args.log_decisions,
                      log_packets=args.log_packets)
    print(_summary(result))
    print(f"outputs: {outdir}")
    return 0


def _stem(name_or_path: str) -> str:
    base = os.path.basename(name_or_path)
    return base[:-5] if base.endswith(".json") else base


def _axis_error(doc: dict, axis: str) -> int:
    axes = config_mod.example_axes(doc)
    print(json.dumps({"errors": [f"unknown axis {axis!r}"],
                      "valid_axes": axes}, indent=2))
    return 2


def cmd_sweep(args) -> int:
    cfg = resolve_config(args.config)
    violations = config_mod.validate(cfg)
    if violations:
        return _fail_validation(violations)
    values = _parse_values(args.values)
    if not values:
        print(json.dumps({"errors": ["empty value list"]}))
        return 2
    base_doc = config_mod.to_dict(cfg)
    try:
        config_mod.get_by_path(base_doc, args.axis)
    except (KeyError, IndexError, ValueError):
        return _axis_error(base_doc, args.axis)
    outdir = args.out or f"{_stem(args.config)}_sweep"
    os.makedirs(outdir, exist_ok=True)
    combined = []
    for idx, value in enumerate(values):
        doc = json.loads(json.dumps(base_doc))
        config_mod.set_by_path(doc, args.axis, value)
        child = config_mod.parse_config(doc)
        child_seed = config_mod.mix_seed(cfg.seed, idx)
        result = run_scenario(child, seed=child_seed)
        subdir = os.path.join(outdir, f"value_{idx}")
        write_run_outputs(result, subdir, log_decisions=args.log_decisions,
                          log_packets=args.log_packets)
        for row in metrics_rows(result):
            combined.append([value] + row)
    write_csv(os.path.join(outdir, "sweep.csv"),
              [args.axis] + metrics_header(), combined)
    print(f"{len(values)} runs -> {outdir}/sweep.csv")
    return 0


def cmd_compare(args) -> int:
    cfg = resolve_config(args.config)
    violations = config_mod.validate(cfg)
    if violations:
        return _fail_validation(violations)
    controllers = [c.strip() for c in args.controllers.split(",") if c.strip()]
    if not controllers:
        print(json.dumps({"errors": ["empty controller list"]}))
        return 2
    base_doc = config_mod.to_dict(cfg)
    outdir = args.out or f"{_stem(args.config)}_compare"
    os.makedirs(outdir, exist_ok=True)
    combined = []
    for ci, controller in enumerate(controllers):
        doc = json.loads(json.dumps(base_doc))
        for fdoc in doc["flows"]:
            fdoc["controller"] = controller
        child = config_mod.parse_config(doc)
        bad = config_mod.validate(child)
        if bad:
            return _fail_validation(bad)
        result = run_scenario(child, seed=cfg.seed)
        subdir = os.path.join(outdir, f"{ci}_{controller}")
        write_run_outputs(result, subdir, log_decisions=args.log_decisions,
                          log_packets=args.log_packets)
        for row in metrics_rows(result):
            combined.append([controller] + row)
    write_csv(os.path.join(outdir, "compare.csv"),
              ["run_controller"] + metrics_header(), combined)
    print(f"{len(controllers)} runs -> {outdir}/compare.csv")
    return 0


def cmd_validate(args) -> int:
    try:
        cfg = resolve_config(args.config)
    except (FileNotFoundError, config_mod.ConfigurationError) as exc:
        print(json.dumps({"errors": [str(exc)]}))
        return 2
    violations = config_mod.validate(cfg)
    if violations:
        return _fail_validation(violations)
    print("ok")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="cellrtc",
        description="Subframe-level cellular downlink simulator for real-time "
                    "video rate control experiments")
    sub = parser.add_subparsers(dest="command", required=True)

    def add_common(p):
        p.add_argument("config", help="scenario JSON path or preset name")
        p.add_argument("--out", help="output directory")
        p.add_argument("--log-decisions", action="store_true",
                       help="write per-subframe controller decision CSVs")
        p.add_argument("--log-packets", action="store_true",
                       help="write per-packet event CSVs")

    p_run = sub.add_parser("run", help="execute one scenario")
    add_common(p_run)
    p_run.add_argument("--seed", type=int, default=None,
                       help="override the scenario seed")
    p_run.set_defaults(func=cmd_run)

    p_sweep = sub.add_parser("sweep", help="run a scenario across axis values")
    add_common(p_sweep)
    p_sweep.add_argument("--axis", required=True,
                         help="dotted config path, e.g. flows.0.sender.vbv_multiple")
    p_sweep.add_argument("--values", required=True,
                         help="comma-separated values, e.g. 2,4,12,25")
    p_sweep.set_defaults(func=cmd_sweep)

    p_cmp = sub.add_parser("compare", help="run the scenario once per controller")
    add_common(p_cmp)
    p_cmp.add_argument("--controllers", required=True,
                       help="comma-separated subset of occ,gcc,pbe")
    p_cmp.set_defaults(func=cmd_compare)

    p_val = sub.add_parser("validate", help="check a scenario without running it")
    p_val.add_argument("config", help="scenario JSON path or preset name")
    p_val.set_defaults(func=cmd_validate)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except FileNotFoundError as exc:
        print(json.dumps({"errors": [str(exc)]}))
        return 2


if __name__ == "__main__":
    sys.exit(main())
