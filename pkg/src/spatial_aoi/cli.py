"""Command-line experiment runner.

    spatial-aoi <command> [--config spec.json] [--seed S] [--out DIR] [--threads K] ...

Commands: solve, simulate, bounds, figure3, figure4, figure5, pareto,
ta-convergence. Each run writes its CSV/JSON artifacts plus manifest.json
into the output directory. Exit codes: 0 ok, 2 usage, 3 convergence
failure, 4 I/O error.
"""
from __future__ import annotations

import argparse
import csv
import hashlib
import json
import math
import platform
import sys
import time
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np
import scipy

from . import __version__
from .analysis import ratio_grid, ta_convergence_experiment, trace_pareto_boundary, boundary_is_monotone
from .channel import Policy, expected_aoi, success_probabilities
from .errors import ConvergenceError, UsageError
from .experiments import bounds_table, figure3, figure4, figure5
from .simulator import SimConfig, baseline_aloha, node_table, run
from .solvers import SolverConfig, SolverReport, solve_ews, solve_mm, solve_pf, ta_policy
from .topology import Topology, load_topology, sample_uniform_disk, symmetric_topology

COMMANDS = ("solve", "simulate", "bounds", "figure3", "figure4", "figure5", "pareto", "ta-convergence")
POLICY_KINDS = ("ews", "mm", "pf", "ta", "aloha")

EXIT_OK, EXIT_USAGE, EXIT_CONVERGENCE, EXIT_IO = 0, 2, 3, 4


@dataclass
class ExperimentSpec:
    """One experiment. ``params`` carries the per-command overrides (sizes, buckets, ...)."""

    command: str
    topology_source: dict = field(default_factory=dict)
    policy_kind: dict = field(default_factory=lambda: {"kind": "pf"})
    sim: dict | None = None
    output_dir: str = "out"
    seed: int = 0
    params: dict = field(default_factory=dict)

    def validate(self):
        if self.command not in COMMANDS:
            raise UsageError(f"unknown command {self.command!r}; choose from {', '.join(COMMANDS)}")
        src = self.topology_source or {}
        if "file" in src and "sampler" in src:
            raise UsageError("give exactly one topology source (file or sampler)")
        if isinstance(self.policy_kind, str):
            self.policy_kind = {"kind": self.policy_kind}
        if self.policy_kind.get("kind") not in POLICY_KINDS:
            raise UsageError(f"policy kind must be one of {', '.join(POLICY_KINDS)}")
        if self.sim is not None:
            SimConfig(**self.sim)
        self.seed = int(self.seed)
        if self.seed < 0:
            raise UsageError("seed must be non-negative")
        return self


def fmt(x) -> str:
    if isinstance(x, (bool, np.bool_)):
        return str(int(x))
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    if isinstance(x, (float, np.floating)):
        x = float(x)
        if math.isnan(x):
            return "nan"
        if math.isinf(x):
            return "inf" if x > 0 else "-inf"
        return f"{x:.9g}"
    return str(x)


def write_csv(path: Path, rows: list[dict]) -> None:
    if not rows:
        path.write_text("")
        return
    cols = list(rows[0])
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(cols)
        for row in rows:
            w.writerow([fmt(row[c]) for c in cols])


def write_json(path: Path, obj) -> None:
    path.write_text(json.dumps(obj, indent=2, sort_keys=True, allow_nan=True) + "\n")


def sha256(path: Path) -> str:
    return hashlib.sha256(path.read_bytes()).hexdigest()


def _topology(spec: ExperimentSpec) -> Topology:
    src = spec.topology_source or {}
    if "file" in src:
        return load_topology(src["file"])
    sampler = src.get("sampler", "uniform_disk")
    beta = float(src.get("beta", 2.0))
    theta = float(src.get("theta", 1.0))
    if "n" not in src:
        raise UsageError("sampler topology needs 'n' (--n)")
    n = int(src["n"])
    if sampler == "uniform_disk":
        return sample_uniform_disk(n, spec.seed, beta, theta)
    if sampler == "symmetric":
        return symmetric_topology(n, float(src.get("radius", 1.0)), beta, theta)
    raise UsageError(f"unknown sampler {sampler!r}")


def _solver_config(spec) -> SolverConfig:
    return SolverConfig(**spec.params.get("solver", {}))


def _policy_report(topology: Topology, pk: dict, config: SolverConfig) -> SolverReport:
    kind = pk["kind"]
    if kind == "ews":
        return solve_ews(topology, pk.get("weights"), config)
    if kind == "mm":
        return solve_mm(topology, config)
    if kind == "pf":
        return solve_pf(topology, config)
    policy = ta_policy(topology) if kind == "ta" else baseline_aloha(topology.n, pk.get("p_common"))
    return SolverReport(policy, expected_aoi(topology, policy), np.array([]), 0.0, 0, True)


def _cmd_solve(spec, out, threads):
    top = _topology(spec)
    rep = _policy_report(top, spec.policy_kind, _solver_config(spec))
    write_json(out / "policy.json", {**rep.to_dict(), "label": rep.policy.label})
    tau = success_probabilities(top, rep.policy)
    rows = [{"node_id": i, "r": top.distances[i], "p": rep.probs[i], "tau": tau[i], "aoi": rep.h[i]}
            for i in range(top.n)]
    write_csv(out / "policy.csv", rows)
    return ["policy.json", "policy.csv"], {"label": rep.policy.label, "converged": rep.converged}


def _cmd_simulate(spec, out, threads):
    top = _topology(spec)
    rep = _policy_report(top, spec.policy_kind, _solver_config(spec))
    sim = SimConfig(**{"seed": spec.seed, **(spec.sim or {})})
    res = run(top, rep.policy, sim, threads=threads)
    write_csv(out / "simulation.csv", node_table(top, rep.policy, res))
    files = ["simulation.csv"]
    if sim.record_paths:
        np.save(out / "paths.npy", res.paths)
        files.append("paths.npy")
    return files, {"slots": res.slots, "policy": rep.policy.label}


def _sizes(spec, default):
    src = spec.topology_source or {}
    sizes = spec.params.get("sizes", src.get("sizes", default))
    if isinstance(sizes, str):
        sizes = [int(s) for s in sizes.split(",") if s]
    return [int(s) for s in sizes]


def _count(spec, default):
    return int(spec.params.get("topologies", (spec.topology_source or {}).get("count", default)))


def _cmd_bounds(spec, out, threads):
    src = spec.topology_source or {}
    cfg = _solver_config(spec)
    if "file" in src or src.get("sampler") == "symmetric":
        from .analysis import check_bounds
        top = _topology(spec)
        rep = check_bounds(top, cfg)
        rows = [{"n": top.n, "sample": 0, "lower": rep.lower, "mid": rep.mid,
                 "finite_upper": rep.finite_upper, "upper": rep.upper,
                 **{f"ok_{k}": int(v) for k, v in rep.flags.items()}}]
    else:
        sizes = _sizes(spec, [int(src["n"])] if "n" in src else [10, 25, 50, 100])
        rows = bounds_table(sizes, _count(spec, 100), spec.seed, cfg, threads)
    write_csv(out / "bounds.csv", rows)
    ok = all(all(v for k, v in r.items() if k.startswith("ok_")) for r in rows)
    return ["bounds.csv"], {"all_satisfied": ok}


def _cmd_figure3(spec, out, threads):
    rows = figure3(_sizes(spec, [5, 10, 20, 50, 100, 200]), _count(spec, 100), spec.seed,
                   _solver_config(spec), threads)
    write_csv(out / "fig3.csv", rows)
    return ["fig3.csv"], {}


def _fig45_args(spec):
    src = spec.topology_source or {}
    return (int(src.get("n", spec.params.get("n", 50))), _count(spec, 200),
            int(spec.params.get("buckets", 8)))


def _cmd_figure4(spec, out, threads):
    n, count, buckets = _fig45_args(spec)
    rows = figure4(n, count, buckets, spec.seed, _solver_config(spec), threads)
    write_csv(out / "fig4.csv", rows)
    return ["fig4.csv"], {}


def _cmd_figure5(spec, out, threads):
    n, count, buckets = _fig45_args(spec)
    sim = SimConfig(**{"seed": spec.seed, **spec.sim}) if spec.sim else None
    aloha_p = spec.params.get("aloha_p", spec.policy_kind.get("p_common"))
    rows = figure5(n, count, buckets, spec.seed, aloha_p, sim, _solver_config(spec), threads)
    write_csv(out / "fig5.csv", rows)
    return ["fig5.csv"], {"aloha_p": aloha_p if aloha_p is not None else 1.0 / n}


def _cmd_pareto(spec, out, threads):
    top = _topology(spec)
    grid = spec.params.get("weights")
    if grid is None:
        if top.n != 2:
            raise UsageError("the default weight grid is for two nodes; pass params.weights otherwise")
        grid = ratio_grid(float(spec.params.get("lo_exp", -3)), float(spec.params.get("hi_exp", 3)),
                          int(spec.params.get("points", 61)))
    pts = trace_pareto_boundary(top, grid, _solver_config(spec))
    rows = []
    for k, pt in enumerate(pts):
        row = {"point": k}
        for i in range(top.n):
            row[f"lambda_{i}"] = pt.weights[i]
        for i in range(top.n):
            row[f"p_{i}"] = pt.probs[i] if pt.probs is not None else math.nan
        for i in range(top.n):
            row[f"h_{i}"] = pt.aoi[i] if pt.aoi is not None else math.nan
        row["error"] = pt.error or ""
        rows.append(row)
    write_csv(out / "pareto.csv", rows)
    extra = {"monotone": boundary_is_monotone(pts)} if top.n == 2 else {}
    return ["pareto.csv"], extra


def _cmd_ta_convergence(spec, out, threads):
    radius = float(spec.params.get("radius", (spec.topology_source or {}).get("radius", 1.0)))
    res = ta_convergence_experiment(_sizes(spec, [25, 50, 100, 200, 400]), _count(spec, 200),
                                    spec.seed, radius)
    write_csv(out / "ta_convergence.csv", res.rows)
    return ["ta_convergence.csv"], {"slope": res.slope}


HANDLERS = {
    "solve": _cmd_solve, "simulate": _cmd_simulate, "bounds": _cmd_bounds,
    "figure3": _cmd_figure3, "figure4": _cmd_figure4, "figure5": _cmd_figure5,
    "pareto": _cmd_pareto, "ta-convergence": _cmd_ta_convergence,
}


def run_experiment(spec: ExperimentSpec, threads: int = 1) -> int:
    """Run one experiment and write its artifacts and manifest; returns an exit code."""
    try:
        spec.validate()
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    out = Path(spec.output_dir)
    try:
        out.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        print(f"cannot create output directory {out}: {exc}", file=sys.stderr)
        return EXIT_IO
    t0 = time.perf_counter()
    try:
        files, summary = HANDLERS[spec.command](spec, out, threads)
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except ConvergenceError as exc:
        diag = {"error": str(exc), "trace": [float(x) for x in exc.trace[-50:]]}
        print(json.dumps(diag), file=sys.stderr)
        try:
            write_json(out / "error.json", diag)
        except OSError:
            pass
        return EXIT_CONVERGENCE
    except OSError as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return EXIT_IO
    manifest = {
        "command": spec.command,
        "spec": asdict(spec),
        "seed": spec.seed,
        "threads": threads,
        "versions": {"spatial_aoi": __version__, "python": platform.python_version(),
                     "numpy": np.__version__, "scipy": scipy.__version__},
        "wall_time_s": time.perf_counter() - t0,
        "artifacts": [{"file": f, "sha256": sha256(out / f)} for f in files],
        "summary": summary,
    }
    try:
        write_json(out / "manifest.json", manifest)
    except OSError as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return EXIT_IO
    return EXIT_OK


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        raise SystemExit(EXIT_USAGE)


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="ExperimentSpec JSON file")
    common.add_argument("--seed", type=int)
    common.add_argument("--out", help="output directory")
    common.add_argument("--threads", type=int, default=1)
    common.add_argument("--policy", choices=POLICY_KINDS)
    common.add_argument("--weights", help="comma-separated EWS weights")
    common.add_argument("--aloha-p", type=float, help="common ALOHA attempt probability")
    common.add_argument("--topology", help="topology JSON file")
    common.add_argument("--n", type=int, help="number of nodes for a sampled topology")
    common.add_argument("--symmetric", type=float, metavar="RADIUS",
                        help="place all nodes at this radius instead of sampling")
    common.add_argument("--beta", type=float)
    common.add_argument("--theta", type=float)
    common.add_argument("--sizes", help="comma-separated network sizes")
    common.add_argument("--topologies", type=int, help="number of random topologies")
    common.add_argument("--buckets", type=int)
    common.add_argument("--radius", type=float, help="probe radius for ta-convergence")
    common.add_argument("--horizon", type=int, help="simulated slots T")
    common.add_argument("--replications", type=int)
    common.add_argument("--record-paths", action="store_true")
    parser = _Parser(prog="spatial-aoi", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)
    for name in COMMANDS:
        sub.add_parser(name, parents=[common])
    return parser


def spec_from_args(args) -> tuple[ExperimentSpec, int]:
    data = {}
    if args.config:
        try:
            data = json.loads(Path(args.config).read_text())
        except OSError as exc:
            raise UsageError(f"cannot read config {args.config}: {exc}") from exc
        except json.JSONDecodeError as exc:
            raise UsageError(f"config {args.config} is not valid JSON: {exc}") from exc
        unknown = set(data) - {f for f in ExperimentSpec.__dataclass_fields__}
        if unknown:
            raise UsageError(f"unknown config fields: {sorted(unknown)}")
    data["command"] = args.command
    spec = ExperimentSpec(**data)
    spec.topology_source = dict(spec.topology_source or {})
    spec.params = dict(spec.params or {})
    if isinstance(spec.policy_kind, str):
        spec.policy_kind = {"kind": spec.policy_kind}
    spec.policy_kind = dict(spec.policy_kind)

    src = spec.topology_source
    if args.topology:
        src.clear()
        src["file"] = args.topology
    if args.n is not None:
        src.pop("file", None)
        src["n"] = args.n
        src.setdefault("sampler", "uniform_disk")
    if args.symmetric is not None:
        src.pop("file", None)
        src["sampler"] = "symmetric"
        src["radius"] = args.symmetric
    for key in ("beta", "theta"):
        if getattr(args, key) is not None:
            src[key] = getattr(args, key)
    if args.seed is not None:
        spec.seed = args.seed
    if args.out:
        spec.output_dir = args.out
    if args.policy:
        spec.policy_kind = {"kind": args.policy}
    if args.weights:
        spec.policy_kind["weights"] = [float(w) for w in args.weights.split(",")]
    if args.aloha_p is not None:
        spec.policy_kind["p_common"] = args.aloha_p
        spec.params["aloha_p"] = args.aloha_p
    if args.sizes:
        spec.params["sizes"] = [int(s) for s in args.sizes.split(",") if s]
    if args.topologies is not None:
        spec.params["topologies"] = args.topologies
    if args.buckets is not None:
        spec.params["buckets"] = args.buckets
    if args.radius is not None:
        spec.params["radius"] = args.radius
    if args.horizon is not None or args.replications is not None or args.record_paths:
        sim = dict(spec.sim or {})
        if args.horizon is not None:
            sim["horizon"] = args.horizon
        if args.replications is not None:
            sim["replications"] = args.replications
        if args.record_paths:
            sim["record_paths"] = True
        spec.sim = sim
    if args.command == "simulate" and spec.sim is None:
        spec.sim = {}
    if args.threads < 1:
        raise UsageError("--threads must be at least 1")
    return spec, args.threads


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        spec, threads = spec_from_args(args)
    except (UsageError, TypeError) as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    return run_experiment(spec, threads)


if __name__ == "__main__":
    sys.exit(main())
