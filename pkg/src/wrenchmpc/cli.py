"""Command-line entry point.

Exit codes: 0 success, 1 configuration / usage error, 2 numerical failure
(DEGRADED solve, diverged solver, or a fall under ``--strict``).
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import io
import json
import logging
import math
import os
import sys
import time
from collections import defaultdict
from pathlib import Path

import numpy as np

from . import __version__
from .ocp import CONVERGED, OcpDefinition, PlanTrajectory, SolverDivergence, SolverSettings, solve
from .sim import (CONTROLLERS, DEFAULT_PREVIEW_GAIN, LeanConfig, compute_metrics, max_stabilized_force, run_leaning,
                  sim_config_from_dict, sim_config_to_dict, simulate)
from .spatial import default_model, load_model, model_to_dict
from .wrench_predict import plan_to_wrench
from .wrenchgen import DEFAULT_OFFSETS, GeneratorConfig, rollout

CONFIG_DIR_ENV = "WRENCHMPC_CONFIG_DIR"
SCENARIOS = ("exp1", "exp2", "lean", "sweep")

log = logging.getLogger("wrenchmpc")


class ConfigError(Exception):
    pass


class NumericalFailure(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(1, f"{self.prog}: error: {message}\n")


# ---------------------------------------------------------------------------
# configuration
# ---------------------------------------------------------------------------


def resolve_config_path(name: str | None) -> Path | None:
    if name is None:
        return None
    p = Path(name)
    if p.exists():
        return p
    base = os.environ.get(CONFIG_DIR_ENV)
    if base:
        for cand in (Path(base) / name, Path(base) / f"{name}.json"):
            if cand.exists():
                return cand
    raise ConfigError(f"config file not found: {name}")


def parse_override(text: str) -> tuple[list[str], object]:
    if "=" not in text:
        raise ConfigError(f"override must look like key=value, got {text!r}")
    key, raw = text.split("=", 1)
    if not key:
        raise ConfigError(f"empty key in override {text!r}")
    try:
        value = json.loads(raw)
    except json.JSONDecodeError:
        value = raw
    return key.split("."), value


def load_config(name: str | None, overrides=()) -> dict:
    path = resolve_config_path(name)
    cfg: dict = {}
    if path is not None:
        try:
            cfg = json.loads(path.read_text())
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{path}: invalid JSON ({exc})") from None
        if not isinstance(cfg, dict):
            raise ConfigError(f"{path}: top level must be an object")
    for text in overrides:
        keys, value = parse_override(text)
        node = cfg
        for k in keys[:-1]:
            node = node.setdefault(k, {})
            if not isinstance(node, dict):
                raise ConfigError(f"cannot override inside non-object key {k!r}")
        node[keys[-1]] = value
    return cfg


def config_hash(cfg: dict) -> str:
    return hashlib.sha256(json.dumps(cfg, sort_keys=True, separators=(",", ":")).encode()).hexdigest()


def write_manifest(outputs: list[str], cfg: dict, seed, scenario: str, started: float, manifest: str | None = None):
    outputs = [str(o) for o in outputs if o]
    if not outputs and manifest is None:
        return None
    path = Path(manifest) if manifest else Path(outputs[0] + ".manifest.json")
    body = {
        "tool_version": __version__,
        "config_sha256": config_hash(cfg),
        "config": cfg,
        "seed": seed,
        "scenario": scenario,
        "outputs": outputs,
        "wall_clock_s": time.perf_counter() - started,
    }
    path.write_text(json.dumps(body, indent=2, sort_keys=True) + "\n")
    return path


def _model(path):
    return load_model(resolve_config_path(path)) if path else default_model()


_OCP_KEYS = {"kappa", "h_des", "horizon", "dt", "w_ee", "w_u", "w_theta", "w_omega", "barrier_mu",
             "barrier_delta", "ee_target", "base_reference", "w_base", "joint_target", "w_joint_ref"}


def ocp_from_config(model, cfg: dict) -> tuple[OcpDefinition, SolverSettings]:
    cfg = dict(cfg)
    solver = dict(cfg.pop("solver", {}) or {})
    bad = sorted(set(cfg) - _OCP_KEYS - {"x0"})
    if bad:
        raise ConfigError(f"unknown OCP config keys: {bad}")
    kw = {k: v for k, v in cfg.items() if k in _OCP_KEYS}
    if "ee_target" in kw:
        kw["ee_reference"] = np.asarray(kw.pop("ee_target"), dtype=float)
    if "joint_target" in kw:
        kw["joint_reference"] = np.asarray(kw.pop("joint_target"), dtype=float)
    try:
        return OcpDefinition(model, **kw), SolverSettings(**solver)
    except TypeError as exc:
        raise ConfigError(str(exc)) from None


# ---------------------------------------------------------------------------
# subcommands
# ---------------------------------------------------------------------------


def cmd_gen_wrench(args) -> int:
    started = time.perf_counter()
    cfg = load_config(args.config, args.set)
    gen = GeneratorConfig.from_dict(cfg) if cfg else GeneratorConfig()
    if args.duration <= 0:
        raise ConfigError("duration must be positive")
    out = open(args.out, "w") if args.out else sys.stdout
    try:
        for rec in rollout(gen, args.seed, args.duration):
            out.write(json.dumps(rec) + "\n")
    finally:
        if args.out:
            out.close()
    write_manifest([args.out], gen.to_dict(), args.seed, "gen-wrench", started, args.manifest)
    return 0


def cmd_solve(args) -> int:
    started = time.perf_counter()
    model = _model(args.model)
    cfg = load_config(args.config, args.set)
    if args.target is not None:
        cfg["ee_target"] = args.target
    d, settings = ocp_from_config(model, cfg)
    x0 = np.asarray(cfg.get("x0"), dtype=float) if "x0" in cfg else \
        np.concatenate([[0.0, 0.0, d.h_des, 0.0, 0.0, 0.0], model.nominal, np.zeros(model.n_joints)])
    if x0.shape != (d.nx,):
        raise ConfigError(f"x0 must have {d.nx} entries")
    plan = solve(d, x0, settings=settings)
    text = json.dumps(plan.to_dict())
    if args.out:
        Path(args.out).write_text(text + "\n")
    else:
        print(text)
    full_cfg = {"ocp": cfg, "model": model_to_dict(model)}
    write_manifest([args.out], full_cfg, None, "solve", started, args.manifest)
    print(f"status={plan.status} iterations={plan.iterations} cost={plan.cost:.6g} "
          f"time={plan.solve_time:.3f}s", file=sys.stderr)
    return 0 if plan.status == CONVERGED else 2


def cmd_predict_wrench(args) -> int:
    started = time.perf_counter()
    model = _model(args.model)
    try:
        plan = PlanTrajectory.from_dict(json.loads(Path(args.plan).read_text()))
    except (OSError, json.JSONDecodeError, KeyError) as exc:
        raise ConfigError(f"cannot read plan {args.plan}: {exc}") from None
    offsets = args.offsets if args.offsets is not None else list(DEFAULT_OFFSETS)
    wp = plan_to_wrench(plan, model, offsets, t_now=args.t_now)
    text = json.dumps(wp.to_dict())
    if args.out:
        Path(args.out).write_text(text + "\n")
    else:
        print(text)
    write_manifest([args.out], {"plan": args.plan, "offsets": offsets, "t_now": args.t_now,
                                "model": model_to_dict(model)}, None, "predict-wrench", started, args.manifest)
    return 0


def cmd_simulate(args) -> int:
    started = time.perf_counter()
    model = _model(args.model)
    cfg = load_config(args.config, args.set)
    sim_cfg = sim_config_from_dict(cfg)
    if args.duration is not None and args.duration <= 0:
        raise ConfigError("duration must be positive")
    record = {"scenario": args.scenario, "controller": args.controller, "seed": args.seed}

    if args.scenario == "lean":
        lean = LeanConfig(**({"duration": args.duration} if args.duration else {}))
        sim_cfg.unobserved = False
        sim_cfg.stop_on_fall = False
        if args.force is None:
            record["max_stabilized_force"] = max_stabilized_force(args.controller, model=model, config=sim_cfg,
                                                                  lean=lean, preview_gain=args.preview_gain)
            force = record["max_stabilized_force"]
        else:
            force = args.force
        res = run_leaning(force, args.controller, lean=lean, model=model, config=sim_cfg,
                          preview_gain=args.preview_gain, keep_trace=True)
        trace = res.trace
        record.update(force=force, stabilized=res.stabilized, peak_tilt=res.peak_tilt,
                      pre_onset_compensation=res.pre_onset_compensation)
        metrics = compute_metrics(trace, sim_cfg.fall_tilt, sim_cfg.fall_height_ratio)
    else:
        kw = {"omega": args.omega} if args.scenario == "sweep" else {}
        if args.scenario == "sweep":
            record["omega"] = args.omega
        trace, metrics = simulate(args.scenario, args.controller, args.seed, args.duration, args.full,
                                  model=model, config=sim_cfg, preview_gain=args.preview_gain, **kw)
    record["metrics"] = metrics.to_dict()

    outputs = []
    if args.out:
        trace.write_jsonl(args.out)
        outputs.append(args.out)
    if args.csv:
        trace.write_csv(args.csv)
        outputs.append(args.csv)
    text = json.dumps(record, indent=2, sort_keys=True)
    if args.metrics:
        Path(args.metrics).write_text(text + "\n")
        outputs.append(args.metrics)
    else:
        print(text)
    resolved = {"sim": sim_config_to_dict(sim_cfg), "model": model_to_dict(model),
                "duration": args.duration, "full": args.full, "preview_gain": args.preview_gain,
                "controller": args.controller, "force": args.force, "omega": args.omega}
    write_manifest(outputs, resolved, args.seed, args.scenario, started, args.manifest)
    if args.strict and metrics.fall_count > 0:
        print(f"fall detected at t={metrics.time_before_falling:.2f}s", file=sys.stderr)
        return 2
    return 0


_REPORT_FIELDS = ("mean_abs_tilt", "mean_ang_vel_magnitude_rollpitch", "mean_lin_vel_tracking_error", "fall_count")


def _load_metrics(paths) -> list[dict]:
    rows = []
    for p in paths:
        try:
            rec = json.loads(Path(p).read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read metrics {p}: {exc}") from None
        if not isinstance(rec, dict) or "metrics" not in rec:
            raise ConfigError(f"{p}: not a metrics file")
        rows.append(rec)
    return rows


def build_report(records: list[dict]) -> tuple[str, list[list]]:
    """Group by (scenario, controller); returns a text table and CSV rows."""
    if not records:
        raise ConfigError("no metrics to report")
    groups = defaultdict(list)
    for r in records:
        groups[(r["scenario"], r["controller"])].append(r)
    header = ["scenario", "controller", "n"] + [f"{f}" for f in _REPORT_FIELDS] + ["best_tilt", "seeds"]
    rows = []
    for (scen, ctrl), recs in sorted(groups.items()):
        recs = sorted(recs, key=lambda r: (r.get("seed") is None, r.get("seed")))
        means = [float(np.mean([r["metrics"][f] for r in recs])) for f in _REPORT_FIELDS]
        per_seed = ";".join(f"{r.get('seed')}:{r['metrics']['mean_abs_tilt']:.6g}" for r in recs)
        rows.append([scen, ctrl, len(recs)] + means + [False, per_seed])
    by_scen = defaultdict(list)
    for row in rows:
        by_scen[row[0]].append(row)
    for scen_rows in by_scen.values():
        best = min(r[3] for r in scen_rows)
        for r in scen_rows:
            r[-2] = r[3] == best

    buf = io.StringIO()
    widths = [8, 11, 3, 14, 14, 14, 10, 9]
    buf.write("  ".join(h[:w].ljust(w) for h, w in zip(
        ["scenario", "controller", "n", "tilt[rad]", "angvel[rad/s]", "track[m/s]", "falls", "best"], widths)) + "\n")
    for r in rows:
        cells = [r[0], r[1], str(r[2]), f"{r[3]:.6g}", f"{r[4]:.6g}", f"{r[5]:.6g}", f"{r[6]:.3g}",
                 "*" if r[7] else ""]
        buf.write("  ".join(c.ljust(w) for c, w in zip(cells, widths)) + "\n")
    buf.write("\nper-seed mean_abs_tilt\n")
    for r in rows:
        buf.write(f"  {r[0]}/{r[1]}: {r[8]}\n")
    return buf.getvalue(), [header] + rows


def cmd_report(args) -> int:
    text, rows = build_report(_load_metrics(args.metrics_files))
    print(text, end="")
    if args.csv:
        with open(args.csv, "w", newline="") as fh:
            csv.writer(fh).writerows(rows)
    return 0


# ---------------------------------------------------------------------------
# parser
# ---------------------------------------------------------------------------


def _floats(n=None):
    def parse(text):
        try:
            vals = [float(v) for v in text.split(",")]
        except ValueError:
            raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from None
        if n is not None and len(vals) != n:
            raise argparse.ArgumentTypeError(f"expected {n} numbers, got {len(vals)}")
        if not all(math.isfinite(v) for v in vals):
            raise argparse.ArgumentTypeError("values must be finite")
        return vals
    return parse


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="wrenchmpc", description="Wrench-aware MPC toolkit: generator, solver, prediction, simulation.")
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def common(sp, seed=True):
        sp.add_argument("--config", help=f"JSON config (path, or name inside ${CONFIG_DIR_ENV})")
        sp.add_argument("--set", action="append", default=[], metavar="KEY=VALUE",
                        help="override a config entry; dotted keys address nested objects")
        sp.add_argument("--manifest", help="manifest path (default: <first output>.manifest.json)")
        if seed:
            sp.add_argument("--seed", type=int, default=0)

    g = sub.add_parser("gen-wrench", help="roll out the random wrench generator")
    common(g)
    g.add_argument("--duration", type=float, default=10.0)
    g.add_argument("--out", help="JSON-lines output (default stdout)")
    g.set_defaults(func=cmd_gen_wrench)

    s = sub.add_parser("solve", help="solve one OCP from the nominal state")
    common(s, seed=False)
    s.add_argument("--model", help="robot model JSON")
    s.add_argument("--target", type=_floats(3), help="EE target x,y,z in world frame")
    s.add_argument("--out", help="plan JSON output (default stdout)")
    s.set_defaults(func=cmd_solve)

    w = sub.add_parser("predict-wrench", help="turn a solved plan into predicted base wrenches")
    common(w, seed=False)
    w.add_argument("--plan", required=True)
    w.add_argument("--model")
    w.add_argument("--offsets", type=_floats())
    w.add_argument("--t-now", type=float, default=None)
    w.add_argument("--out")
    w.set_defaults(func=cmd_predict_wrench)

    m = sub.add_parser("simulate", help="run a closed-loop scenario")
    common(m)
    m.add_argument("--scenario", choices=SCENARIOS, required=True)
    m.add_argument("--controller", choices=CONTROLLERS, default="predictive")
    m.add_argument("--model")
    m.add_argument("--duration", type=float, default=None, help="seconds (default 60, or 1800 with --full)")
    m.add_argument("--full", action="store_true", help="full-length experiment durations")
    m.add_argument("--preview-gain", type=float, default=DEFAULT_PREVIEW_GAIN)
    m.add_argument("--force", type=float, default=None, help="lean: push magnitude (default: sweep for the maximum)")
    m.add_argument("--omega", type=float, default=0.0, help="sweep: shoulder frequency (rad/s)")
    m.add_argument("--out", help="trace JSON-lines output")
    m.add_argument("--csv", help="trace CSV output")
    m.add_argument("--metrics", help="metrics JSON output (default stdout)")
    m.add_argument("--strict", action="store_true", help="exit 2 if the robot falls")
    m.set_defaults(func=cmd_simulate)

    r = sub.add_parser("report", help="aggregate metrics files into a comparison table")
    r.add_argument("metrics_files", nargs="*")
    r.add_argument("--csv", help="CSV output")
    r.set_defaults(func=cmd_report)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        return args.func(args)
    except (ConfigError, ValueError, TypeError, FileNotFoundError) as exc:
        print(f"wrenchmpc: error: {exc}", file=sys.stderr)
        return 1
    except (SolverDivergence, NumericalFailure, FloatingPointError) as exc:
        print(f"wrenchmpc: numerical failure: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
