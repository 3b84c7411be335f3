"""Figure-level experiments over random topologies.

Every function returns plain row dicts in a fixed order; the CLI turns them
into CSV. Per-topology work is keyed by (seed, tag, index) so results are
identical for any thread count.
"""
from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor

import numpy as np

from .analysis import HALF_E, check_bounds, finite_n_bound
from .channel import expected_aoi
from .simulator import SimConfig, baseline_aloha, run
from .solvers import SolverConfig, solve_ews, solve_mm, solve_pf, ta_policy
from .topology import Topology, make_rng, sample_radii

POLICIES = ("ews", "pf", "mm", "ta")

_TAG_FIG3 = 3
_TAG_FIG45 = 45
_TAG_BOUNDS = 7


def _pmap(fn, items, threads):
    items = list(items)
    if threads and threads > 1:
        with ThreadPoolExecutor(threads) as pool:
            return list(pool.map(fn, items))
    return [fn(x) for x in items]


def policy_probs(topology: Topology, kind: str, config: SolverConfig | None = None,
                 aloha_p: float | None = None) -> np.ndarray:
    if kind == "ews":
        return solve_ews(topology, None, config).probs
    if kind == "pf":
        return solve_pf(topology, config).probs
    if kind == "mm":
        return solve_mm(topology, config).probs
    if kind == "ta":
        return ta_policy(topology).probs
    if kind == "aloha":
        return baseline_aloha(topology.n, aloha_p).probs
    raise ValueError(f"unknown policy {kind!r}")


def figure3(sizes, topologies: int = 100, seed: int = 0, config: SolverConfig | None = None,
            threads: int = 1) -> list[dict]:
    """Network-average normalized age mean_i(h_i)/N versus N.

    Each random topology draws max(sizes) radii once and grows by taking
    prefixes, so the same nodes persist as N increases.
    """
    sizes = sorted(int(s) for s in sizes)
    n_max = sizes[-1]

    def one(k):
        radii = sample_radii(n_max, make_rng(seed, _TAG_FIG3, k))
        out = {}
        for n in sizes:
            top = Topology(radii[:n])
            for kind in POLICIES:
                if kind == "ta" and n < 2:
                    out[(n, kind)] = 1.0
                    continue
                h = expected_aoi(top, policy_probs(top, kind, config)).values
                out[(n, kind)] = float(h.mean() / n)
        return out

    per_topology = _pmap(one, range(topologies), threads)
    rows = []
    for n in sizes:
        row = {"n": n}
        for kind in POLICIES:
            row[kind] = float(np.mean([t[(n, kind)] for t in per_topology]))
        row["upper_bound"] = HALF_E
        row["finite_n_bound"] = finite_n_bound(n)
        rows.append(row)
    return rows


def bucket_edges(buckets: int) -> np.ndarray:
    return np.linspace(0.0, 1.0, buckets + 1)


def _bucket_index(r, buckets):
    return np.minimum((np.asarray(r) * buckets).astype(int), buckets - 1)


def _per_node_records(n, topologies, seed, kinds, config, aloha_p, sim, threads):
    def one(k):
        top = Topology(sample_radii(n, make_rng(seed, _TAG_FIG45, k)))
        rec = {"r": top.distances.copy()}
        for kind in kinds:
            p = policy_probs(top, kind, config, aloha_p)
            rec[("p", kind)] = p
            rec[("h", kind)] = expected_aoi(top, p).values / n
            if sim is not None:
                cfg = SimConfig(sim.horizon, sim.replications, sim.seed * 1_000_003 + k)
                rec[("sim", kind)] = run(top, p, cfg).aoi_hat / n
        return rec

    return _pmap(one, range(topologies), threads)


def _bucket_rows(records, buckets, columns):
    edges = bucket_edges(buckets)
    r = np.concatenate([rec["r"] for rec in records])
    idx = _bucket_index(r, buckets)
    rows = []
    for b in range(buckets):
        sel = idx == b
        row = {"r_lo": edges[b], "r_hi": edges[b + 1], "r_mid": 0.5 * (edges[b] + edges[b + 1]),
               "count": int(sel.sum())}
        for name, key in columns:
            vals = np.concatenate([rec[key] for rec in records])[sel]
            row[name] = float(vals.mean()) if vals.size else math.nan
        rows.append(row)
    return rows


def figure4(n: int = 50, topologies: int = 200, buckets: int = 8, seed: int = 0,
            config: SolverConfig | None = None, threads: int = 1) -> list[dict]:
    """Mean transmission probability per radius bucket for each policy."""
    records = _per_node_records(n, topologies, seed, POLICIES, config, None, None, threads)
    return _bucket_rows(records, buckets, [(k, ("p", k)) for k in POLICIES])


def figure5(n: int = 50, topologies: int = 200, buckets: int = 8, seed: int = 0,
            aloha_p: float | None = None, sim: SimConfig | None = None,
            config: SolverConfig | None = None, threads: int = 1,
            kinds=POLICIES + ("aloha",)) -> list[dict]:
    """Mean normalized age h_i/N per radius bucket, including baseline ALOHA.

    With ``sim`` given, simulated ages are added as ``<policy>_sim`` columns.
    """
    kinds = tuple(kinds)
    records = _per_node_records(n, topologies, seed, kinds, config, aloha_p, sim, threads)
    cols = [(k, ("h", k)) for k in kinds]
    if sim is not None:
        cols += [(f"{k}_sim", ("sim", k)) for k in kinds]
    return _bucket_rows(records, buckets, cols)


def bounds_table(sizes, topologies: int = 100, seed: int = 0, config: SolverConfig | None = None,
                 threads: int = 1, slack: float = 0.01) -> list[dict]:
    """check_bounds over random uniform-disk topologies for each N."""
    tasks = [(n, k) for n in sorted(int(s) for s in sizes) for k in range(topologies)]

    def one(task):
        n, k = task
        top = Topology(sample_radii(n, make_rng(seed, _TAG_BOUNDS, n, k)))
        rep = check_bounds(top, config, slack=slack)
        return {"n": n, "sample": k, "lower": rep.lower, "mid": rep.mid,
                "finite_upper": rep.finite_upper, "upper": rep.upper,
                **{f"ok_{name}": int(v) for name, v in rep.flags.items()}}

    return _pmap(one, tasks, threads)


def unfairness_ratio(rows, near: float = 0.2, far: float = 0.9, column: str = "aloha") -> float:
    """Mean of ``column`` over buckets with r_lo >= far, divided by its mean over r_hi <= near.

    Bucket means are weighted by node count.
    """
    def pooled(sel):
        w = np.array([r["count"] for r in sel], dtype=float)
        v = np.array([r[column] for r in sel])
        return float((w * v).sum() / w.sum())

    far_rows = [r for r in rows if r["r_lo"] >= far - 1e-12]
    near_rows = [r for r in rows if r["r_hi"] <= near + 1e-12]
    if not far_rows or not near_rows:
        raise ValueError("bucket grid does not resolve the requested radius ranges")
    return pooled(far_rows) / pooled(near_rows)
