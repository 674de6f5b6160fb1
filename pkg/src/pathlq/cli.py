"""Command-line drivers: synthesis, simulation, and certification runs.

All experiment input comes from a JSON config file; all output is CSV or
JSON written to the output directory.  Identical config and seed produce
bit-identical files.
"""

from __future__ import annotations

import argparse
import csv
import json
import sys
from pathlib import Path

import numpy as np

from .errors import SpecError
from .harness import audit_message_log, run_closed_loop
from .ledger import DisturbancePlan
from .model import GraphSpec, validate_spec
from .simulate import closed_loop
from .synthesis import params_to_document, synthesize
from .verify import run_differential_suite

SCHEMA_VERSION = 1


class ConfigError(ValueError):
    pass


def load_config(path: str) -> dict:
    try:
        with open(path) as fh:
            cfg = json.load(fh)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}:{exc.lineno}:{exc.colno}: {exc.msg}") from exc
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    version = cfg.get("schema_version")
    if version != SCHEMA_VERSION:
        raise ConfigError(
            f"{path}: schema_version = {version!r}, expected {SCHEMA_VERSION}"
        )
    for fld in ("n", "tau", "q", "r", "horizon"):
        if fld not in cfg:
            raise ConfigError(f"{path}: missing required field {fld!r}")
    return cfg


def config_spec(cfg: dict) -> GraphSpec:
    try:
        return validate_spec(cfg)
    except SpecError as exc:
        raise ConfigError(f"invalid spec: {exc}") from exc


def config_plan(cfg: dict) -> DisturbancePlan:
    records = cfg.get("disturbances", [])
    for i, rec in enumerate(records):
        for fld in ("node", "start_time", "end_time", "amount_per_step"):
            if fld not in rec:
                raise ConfigError(f"disturbances[{i}]: missing field {fld!r}")
    return DisturbancePlan.from_records(records)


def _initial_conditions(cfg: dict, spec: GraphSpec):
    z0 = cfg.get("initial_z")
    pipes0 = cfg.get("initial_pipelines")
    return z0, pipes0


def write_trajectory_csv(path: Path, traj, seed=None) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["t", "node", "z", "u", "v", "d", "step_cost", "cum_cost"])
        cum = 0.0
        for t in range(traj.steps):
            cum += float(traj.step_costs[t])
            for i in range(1, traj.spec.n + 1):
                # u is the flow node i releases downstream (u_{i-1}); 0 for node 1.
                u = traj.u[t, i - 2] if i >= 2 else 0.0
                writer.writerow([
                    t, i, repr(float(traj.z[t, i - 1])), repr(float(u)),
                    repr(float(traj.v[t, i - 1])), repr(float(traj.d[t, i - 1])),
                    repr(float(traj.step_costs[t])), repr(cum),
                ])


def cmd_synth(args, cfg: dict, out: Path) -> int:
    spec = config_spec(cfg)
    params = synthesize(spec)
    (out / "params.json").write_text(params_to_document(params))
    print(f"wrote {out / 'params.json'}")
    return 0


def cmd_simulate(args, cfg: dict, out: Path) -> int:
    spec = config_spec(cfg)
    plan = config_plan(cfg)
    steps = int(cfg.get("run_length", spec.sigma_total + spec.horizon + 60))
    params = synthesize(spec)
    z0, pipes0 = _initial_conditions(cfg, spec)
    res = closed_loop(
        spec, params, plan, steps, z0, pipes0, blind=args.no_feedforward
    )
    write_trajectory_csv(out / "trajectory.csv", res.trajectory)
    summary = {
        "seed": cfg.get("seed"),
        "steps": steps,
        "feedforward": not args.no_feedforward,
        "total_cost": res.total_cost,
    }
    (out / "summary.json").write_text(json.dumps(summary, indent=2))
    if args.tee_summary:
        print(json.dumps(summary))
    print(f"total cost over {steps} steps: {res.total_cost:.6f}")
    return 0


def cmd_compare_ff(args, cfg: dict, out: Path) -> int:
    spec = config_spec(cfg)
    plan = config_plan(cfg)
    steps = int(cfg.get("run_length", spec.sigma_total + spec.horizon + 60))
    params = synthesize(spec)
    z0, pipes0 = _initial_conditions(cfg, spec)
    with_ff = closed_loop(spec, params, plan, steps, z0, pipes0)
    # Baseline: a zero-length announcement horizon (only the current step's
    # disturbance is ever known).
    spec0 = GraphSpec(n=spec.n, tau=spec.tau, q=spec.q, r=spec.r, horizon=0)
    params0 = synthesize(spec0)
    without = closed_loop(spec0, params0, plan, steps, z0, pipes0, announce=0)
    summary = {
        "seed": cfg.get("seed"),
        "steps": steps,
        "cost_feedforward": with_ff.total_cost,
        "cost_no_feedforward": without.total_cost,
    }
    (out / "compare_ff.json").write_text(json.dumps(summary, indent=2))
    if args.tee_summary:
        print(json.dumps(summary))
    print(
        f"feed-forward: {with_ff.total_cost:.6f}   "
        f"H=0 baseline: {without.total_cost:.6f}"
    )
    return 0


def cmd_sweep_horizon(args, cfg: dict, out: Path) -> int:
    spec = config_spec(cfg)
    plan = config_plan(cfg)
    steps = int(cfg.get("run_length", spec.sigma_total + spec.horizon + 60))
    z0, pipes0 = _initial_conditions(cfg, spec)
    grid = cfg.get("horizon_grid")
    if grid is None:
        grid = list(range(0, spec.sigma_total + 1))
    grid = sorted(set(int(h) for h in grid) | {0, spec.sigma_total})
    rows = []
    for h in grid:
        spec_h = GraphSpec(n=spec.n, tau=spec.tau, q=spec.q, r=spec.r, horizon=h)
        params_h = synthesize(spec_h)
        res = closed_loop(spec_h, params_h, plan, steps, z0, pipes0, announce=h)
        rows.append((h, res.total_cost))
    with open(out / "horizon_sweep.csv", "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["horizon", "total_cost"])
        for h, cost in rows:
            writer.writerow([h, repr(cost)])
    for h, cost in rows:
        print(f"H={h:3d}  cost={cost:.6f}")
    return 0


def cmd_verify(args, cfg: dict | None, out: Path) -> int:
    seed = args.seed if args.seed is not None else 0
    count = int(cfg.get("verify_instances", 100)) if cfg else 100
    report = run_differential_suite(n_instances=count, seed=seed)
    with open(out / "verify.csv", "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["instance", "n", "action_rel_err", "cost_rel_err"])
        for r in report.reports:
            writer.writerow([r.index, r.n, repr(r.action_rel_err), repr(r.cost_rel_err)])
    print(
        f"{count} instances, seed {seed}: max action err "
        f"{report.max_action_err:.3e}, max cost err {report.max_cost_err:.3e} "
        f"(tolerance {report.tolerance:.1e})"
    )
    if not report.passed:
        print("VERIFY FAILED", file=sys.stderr)
        return 1
    print("verify passed")
    return 0


def cmd_distributed(args, cfg: dict, out: Path) -> int:
    spec = config_spec(cfg)
    plan = config_plan(cfg)
    steps = int(cfg.get("run_length", spec.sigma_total + spec.horizon + 20))
    params = synthesize(spec)
    z0, pipes0 = _initial_conditions(cfg, spec)
    rng = np.random.default_rng(args.seed if args.seed is not None else cfg.get("seed", 0))
    decisions, log, total = run_closed_loop(
        spec, params, plan, steps, z0, pipes0, rng=rng
    )
    log.write_csv(out / "messages.csv")
    audit = audit_message_log(log, spec)
    print(
        f"{steps} rounds, {len(log.records)} messages, "
        f"total cost {total:.6f}, audit {'pass' if audit.ok else 'FAIL'}"
    )
    if not audit.ok:
        for v in audit.violations[:10]:
            print(f"  {v}", file=sys.stderr)
        return 1
    return 0


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="pathlq",
        description="Structured LQ control on delayed path graphs",
    )
    parser.add_argument("command", choices=[
        "synth", "simulate", "compare-ff", "sweep-horizon", "verify", "distributed",
    ])
    parser.add_argument("--config", help="JSON experiment config")
    parser.add_argument("--out", default=".", help="output directory")
    parser.add_argument("--seed", type=int, default=None)
    parser.add_argument("--horizon", type=int, default=None,
                        help="override the config's planning horizon")
    parser.add_argument("--no-feedforward", action="store_true")
    parser.add_argument("--tee-summary", action="store_true")
    args = parser.parse_args(argv)

    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    cfg = None
    if args.command != "verify" or args.config:
        if not args.config:
            parser.error(f"{args.command} requires --config")
        try:
            cfg = load_config(args.config)
        except ConfigError as exc:
            print(f"config error: {exc}", file=sys.stderr)
            return 2
        if args.horizon is not None:
            cfg["horizon"] = args.horizon
        if args.seed is not None:
            cfg["seed"] = args.seed

    handlers = {
        "synth": cmd_synth,
        "simulate": cmd_simulate,
        "compare-ff": cmd_compare_ff,
        "sweep-horizon": cmd_sweep_horizon,
        "verify": cmd_verify,
        "distributed": cmd_distributed,
    }
    return handlers[args.command](args, cfg, out)


if __name__ == "__main__":
    sys.exit(main())
