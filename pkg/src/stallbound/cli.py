"""Command-line front end.

Usage::

    stallbound <command> --config run.json --out results/ [--seed N] [--sigma-grid 0,5,10]

Commands: ``gen-workload``, ``eval-bound``, ``simulate``, ``optimize``,
``compare``. The command may also be given as ``--command``. Every output
table starts with a provenance comment line. Failures print one line,
``stallbound: error: <kind>: <message>``, and exit nonzero.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import os
import sys
import warnings
from dataclasses import fields, replace

import numpy as np

from . import io
from .analysis import bound_report
from .errors import (BoundUndefinedError, ConfigurationError, InfeasibleInstanceError,
                     StallBoundError)
from .model import VideoCatalog, check_dimensions, check_feasibility, default_capacity
from .optimizer import (BASELINES, OptimizerSettings, alternate, compare_strategies,
                        initial_point, optimize_aux, solve)
from .simulator import SimConfig, empirical_sdtp, run_sim, segment_rows, trace_rows
from .workload import generate_catalog

COMMANDS = ("gen-workload", "eval-bound", "simulate", "optimize", "compare")
EXIT_USAGE, EXIT_INFEASIBLE, EXIT_INTERNAL = 2, 3, 1


class RunContext:
    """Resolved config plus the provenance line shared by all outputs."""

    def __init__(self, config, base_dir, out_dir, seed, seed_flag=None):
        self.config = config
        self.base_dir = base_dir
        self.out_dir = out_dir
        self.seed = seed
        self.seed_flag = seed_flag
        canonical = json.dumps(config, sort_keys=True, separators=(",", ":"))
        self.config_hash = hashlib.sha256(canonical.encode()).hexdigest()
        self.provenance = io.provenance_line(seed, self.config_hash)

    def path(self, name):
        return os.path.join(self.out_dir, name)

    def file(self, key):
        value = self.config.get(key)
        if value is None:
            return None
        full = io.resolve(self.base_dir, value)
        if not os.path.exists(full):
            raise io.ParseError(f"{key}: file {value!r} does not exist")
        return full


# ---------------------------------------------------------------------------
# config pieces


def parse_sigma_grid(text):
    try:
        grid = [float(x) for x in text.split(",") if x.strip()]
    except ValueError:
        raise io.ParseError(f"--sigma-grid: cannot parse {text!r}") from None
    return grid


def _check_grid(grid, where="sigma_grid"):
    if not grid:
        raise io.ParseError(f"{where}: empty grid")
    if any(b <= a for a, b in zip(grid, grid[1:])):
        raise io.ParseError(f"{where}: must be strictly increasing")
    if grid[0] < 0:
        raise io.ParseError(f"{where}: values must be nonnegative")
    return [float(s) for s in grid]


def load_topology(ctx):
    if "topology" in ctx.config:
        return io.topology_from_dict(ctx.config["topology"], "config topology")
    path = ctx.file("topology_file")
    if path is None:
        raise io.ParseError("config: needs 'topology' or 'topology_file'")
    return io.topology_from_dict(io.load_json(path), path)


def load_catalog(ctx):
    cfg = ctx.config
    overrides = {k: cfg[k] for k in ("d_s", "sigma") if k in cfg}
    if "catalog_file" in cfg:
        return io.read_catalog(ctx.file("catalog_file"), overrides)
    if "catalog" in cfg:
        doc = dict(cfg["catalog"], **overrides)
        try:
            return VideoCatalog(**doc)
        except (TypeError, ValueError) as exc:
            raise io.ParseError(f"config catalog: {exc}") from None
    if "workload" in cfg:
        spec = io.workload_from_dict(cfg["workload"], "config workload")
        return replace(generate_catalog(spec), **overrides)
    raise io.ParseError("config: needs 'catalog_file', 'catalog' or 'workload'")


def load_capacity(ctx, topology, catalog):
    cap = ctx.config.get("capacity")
    if cap is None:
        return default_capacity(topology, catalog)
    cap = np.asarray(cap)
    if cap.shape != (topology.m,) or np.any(cap < 0) or np.any(cap != np.floor(cap)):
        raise io.ParseError(f"config capacity: need {topology.m} nonnegative integers")
    return cap.astype(int)


def load_point(ctx, topology, catalog, capacity):
    path = ctx.file("control_point_file")
    if path is None:
        return initial_point(topology, catalog, capacity)
    doc = io.load_json(path)
    point = io.point_from_dict(doc, path)
    check_dimensions(topology, catalog, point)
    report = check_feasibility(topology, catalog, point)
    if not report:
        raise InfeasibleInstanceError(f"{path}: {report.violations[0]}")
    return point


def load_settings(ctx):
    doc = dict(ctx.config.get("optimizer", {}))
    allowed = {f.name for f in fields(OptimizerSettings)}
    unknown = set(doc) - allowed
    if unknown:
        raise io.ParseError(f"config optimizer: unknown keys {sorted(unknown)}")
    for key in ("block_order", "frozen"):
        if key in doc:
            doc[key] = tuple(doc[key])
    try:
        return OptimizerSettings(**doc)
    except (TypeError, ValueError) as exc:
        raise io.ParseError(f"config optimizer: {exc}") from None


def sigma_grid(ctx, catalog):
    grid = ctx.config.get("sigma_grid")
    return _check_grid([catalog.sigma] if grid is None else list(grid))


def instance(ctx):
    topology = load_topology(ctx)
    catalog = load_catalog(ctx)
    capacity = load_capacity(ctx, topology, catalog)
    return topology, catalog, capacity


# ---------------------------------------------------------------------------
# commands


def cmd_gen_workload(ctx):
    if "workload" in ctx.config:
        doc = dict(ctx.config["workload"])
    elif "topology" in ctx.config or "catalog" in ctx.config:
        raise io.ParseError("config: gen-workload needs a 'workload' object")
    else:
        # a bare workload document
        doc = {k: v for k, v in ctx.config.items() if k != "sigma_grid"}
    if ctx.seed_flag is not None:
        doc["seed"] = ctx.seed_flag
    # top-level d_s / sigma win, as they do for every other command
    doc.update({k: ctx.config[k] for k in ("d_s", "sigma") if k in ctx.config})
    spec = io.workload_from_dict(doc, "workload")
    out = ctx.path("catalog.csv")
    io.write_catalog(generate_catalog(spec), out, ctx.provenance)
    return [out]


BOUND_HEADER = ["file_id", "sigma", "raw_bound", "clipped_bound",
                "delta1", "delta2", "delta3", "delta4", "feasible"]


def _bound_rows(topology, catalog, point, grid, retune_t, settings):
    for sig in grid:
        pt = point
        if retune_t:
            pt, _ = optimize_aux(topology, catalog, point, replace(settings, sigma=sig))
        rep = bound_report(topology, catalog, pt, sig)
        for i in range(catalog.r):
            yield (i, sig, rep.raw_bound[i], rep.bound[i], rep.delta1_agg[i],
                   rep.delta2_agg[i], rep.delta3_agg[i], rep.delta4_agg[i], rep.feasible)


def cmd_eval_bound(ctx):
    topology, catalog, capacity = instance(ctx)
    point = load_point(ctx, topology, catalog, capacity)
    grid = sigma_grid(ctx, catalog)
    mode = ctx.config.get("bound_t", "point")
    if mode not in ("point", "optimize"):
        raise io.ParseError("config bound_t: expected 'point' or 'optimize'")
    rows = _bound_rows(topology, catalog, point, grid, mode == "optimize", load_settings(ctx))
    out = ctx.path("bounds.csv")
    io.write_csv(out, BOUND_HEADER, rows, ctx.provenance)
    return [out]


def cmd_simulate(ctx):
    topology, catalog, capacity = instance(ctx)
    point = load_point(ctx, topology, catalog, capacity)
    sim = ctx.config.get("simulation", {})
    if "horizon" not in sim:
        raise io.ParseError("config simulation: missing key 'horizon'")
    seed = ctx.seed if ctx.seed is not None else ctx.config.get("seed", 0)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        trace = run_sim(SimConfig(topology, catalog, point, float(sim["horizon"]),
                                  sim.get("warmup"), int(seed)))
    outs = [ctx.path("trace.csv"), ctx.path("empirical.csv")]
    io.write_csv(outs[0], ["request_id", "file_id", "server", "beta", "nu", "arrival", "stall"],
                 trace_rows(trace), ctx.provenance)
    emp = empirical_sdtp(trace, sigma_grid(ctx, catalog))
    io.write_csv(outs[1], ["file_id", "sigma", "p_hat", "stderr", "n"], emp.rows(),
                 ctx.provenance)
    if sim.get("segments", False):
        outs.append(ctx.path("segments.csv"))
        io.write_csv(outs[-1], ["request_id", "segment", "download_done", "play_start"],
                     segment_rows(trace), ctx.provenance)
    return outs


def cmd_optimize(ctx):
    topology, catalog, capacity = instance(ctx)
    settings = load_settings(ctx)
    if "control_point_file" in ctx.config:
        point, trace = alternate(topology, catalog,
                                 load_point(ctx, topology, catalog, capacity), settings)
    else:
        point, trace = solve(topology, catalog, settings, capacity)
    outs = [ctx.path("point.json"), ctx.path("trace.csv")]
    io.dump_json(io.point_to_dict(point, ctx.provenance), outs[0])
    trace.write_csv(outs[1], ctx.provenance)
    return outs


def cmd_compare(ctx):
    topology, catalog, capacity = instance(ctx)
    settings = load_settings(ctx)
    grid = sigma_grid(ctx, catalog)
    names = [n.upper() for n in ctx.config.get("strategies", BASELINES)]
    bad = sorted(set(names) - set(BASELINES))
    if bad:
        raise io.ParseError(f"config strategies: unknown {bad}")
    results = compare_strategies(topology, catalog, settings, capacity, names)
    rows = []
    for name, (pt, obj) in results.items():
        per_sigma = [bound_report(topology, catalog, pt, s).objective for s in grid]
        rows.append([name, obj, *per_sigma])
    out = ctx.path("compare.csv")
    header = ["strategy", "objective"] + [f"bound_sigma_{io.fmt(s)}" for s in grid]
    io.write_csv(out, header, rows, ctx.provenance)
    return [out]


HANDLERS = {
    "gen-workload": cmd_gen_workload,
    "eval-bound": cmd_eval_bound,
    "simulate": cmd_simulate,
    "optimize": cmd_optimize,
    "compare": cmd_compare,
}


# ---------------------------------------------------------------------------
# entry point


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise ConfigurationError(f"usage: {message}")


def build_parser():
    p = _Parser(prog="stallbound", description="Stall-duration tail bounds for CDN video.")
    p.add_argument("command_pos", nargs="?", metavar="command",
                   help="one of: " + ", ".join(COMMANDS))
    p.add_argument("--command", dest="command_opt")
    p.add_argument("--config", required=True, help="JSON run config")
    p.add_argument("--out", default=".", help="output directory (created if missing)")
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--sigma-grid", default=None, help="comma-separated, strictly increasing")
    return p


def _normalize(name):
    return None if name is None else name.replace("_", "-").lower()


def run(argv=None):
    args = build_parser().parse_args(argv)
    command = _normalize(args.command_opt) or _normalize(args.command_pos)
    if args.command_opt and args.command_pos and \
            _normalize(args.command_opt) != _normalize(args.command_pos):
        raise ConfigurationError("usage: conflicting positional and --command values")
    if command not in HANDLERS:
        raise ConfigurationError(f"usage: command must be one of {', '.join(COMMANDS)}")
    config = io.load_json(args.config)
    if not isinstance(config, dict):
        raise io.ParseError(f"{args.config}:1:1: top level must be an object")
    if args.sigma_grid is not None:
        config["sigma_grid"] = _check_grid(parse_sigma_grid(args.sigma_grid), "--sigma-grid")
    if args.seed is not None:
        config["seed"] = args.seed
    seed = config.get("seed")
    os.makedirs(args.out, exist_ok=True)
    ctx = RunContext(config, os.path.dirname(os.path.abspath(args.config)), args.out, seed,
                     args.seed)
    return HANDLERS[command](ctx)


def _kind(exc):
    if isinstance(exc, (InfeasibleInstanceError, BoundUndefinedError)):
        return "infeasible", EXIT_INFEASIBLE
    if isinstance(exc, io.ParseError):
        return "parse", EXIT_USAGE
    if isinstance(exc, ConfigurationError):
        return "config", EXIT_USAGE
    if isinstance(exc, StallBoundError):
        return "domain", EXIT_INFEASIBLE
    if isinstance(exc, ValueError):
        return "invalid", EXIT_USAGE
    return "internal", EXIT_INTERNAL


def main(argv=None):
    try:
        run(argv)
    except Exception as exc:  # noqa: BLE001 - the CLI contract is one line, nonzero exit
        kind, code = _kind(exc)
        message = " ".join(str(exc).split())
        print(f"stallbound: error: {kind}: {message}", file=sys.stderr)
        return code
    return 0


if __name__ == "__main__":
    sys.exit(main())
