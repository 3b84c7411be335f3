"""Slotted Monte Carlo simulation of the random-access network.

Each slot every node transmits independently with its policy probability,
draws a fresh unit-mean exponential fading power, and is captured by the
base station iff its received power exceeds ``theta`` times the summed power
of the other transmitters. Noise is ignored, so a lone transmitter always
succeeds.
"""
from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np
from scipy import stats

from .channel import Policy, expected_aoi, success_probabilities
from .errors import UsageError
from .topology import Topology, make_rng

# Slots simulated per vectorized block.
BLOCK_SLOTS = 1 << 14


@dataclass
class SimConfig:
    horizon: int = 100_000
    replications: int = 1
    seed: int = 0
    record_paths: bool = False

    def __post_init__(self):
        if int(self.horizon) < 1:
            raise UsageError(f"horizon must be at least 1 slot, got {self.horizon}")
        if int(self.replications) < 1:
            raise UsageError(f"replications must be at least 1, got {self.replications}")
        self.horizon = int(self.horizon)
        self.replications = int(self.replications)


@dataclass
class SimResult:
    """Averages across replications.

    ``ci_tau``/``ci_aoi`` are 95% Student-t half-widths over replications
    (NaN with a single replication). ``paths`` is (replications, T, N) when
    recorded.
    """

    tau_hat: np.ndarray
    aoi_hat: np.ndarray
    ci_tau: np.ndarray
    ci_aoi: np.ndarray
    successes: np.ndarray
    slots: int
    paths: np.ndarray | None = None


def _policy_probs(topology, policy):
    if not isinstance(policy, Policy):
        policy = Policy(policy)
    policy.check(topology)
    return policy.probs


def step_slot(topology: Topology, policy, rng: np.random.Generator, slots: int = 1) -> np.ndarray:
    """Success flags for ``slots`` independent slots, shape (slots, N)."""
    p = _policy_probs(topology, policy)
    n = topology.n
    transmit = rng.random((slots, n)) < p
    fading = rng.standard_exponential((slots, n))
    power = np.where(transmit, fading / topology.path_gain, 0.0)
    interference = power.sum(axis=1, keepdims=True) - power
    return transmit & (power > topology.theta * interference)


def _run_replication(topology, p, horizon, rng, record):
    n = topology.n
    last = np.full(n, -1, dtype=np.int64)
    age_sum = np.zeros(n)
    succ = np.zeros(n, dtype=np.int64)
    path = np.empty((horizon, n), dtype=np.int64) if record else None
    t0 = 0
    while t0 < horizon:
        m = min(BLOCK_SLOTS, horizon - t0)
        s = step_slot(topology, p, rng, m)
        succ += s.sum(axis=0)
        slot_idx = np.arange(t0, t0 + m, dtype=np.int64)[:, None]
        # Last success at or before each slot; the age after slot t is t + 1 - last.
        marks = np.where(s, slot_idx, -1)
        latest = np.maximum(np.maximum.accumulate(marks, axis=0), last[None, :])
        ages = slot_idx + 1 - latest
        age_sum += ages.sum(axis=0)
        if record:
            path[t0:t0 + m] = ages
        last = latest[-1]
        t0 += m
    return succ, age_sum / horizon, path


def _halfwidth(x):
    r = x.shape[0]
    if r < 2:
        return np.full(x.shape[1], np.nan)
    return stats.t.ppf(0.975, r - 1) * x.std(axis=0, ddof=1) / np.sqrt(r)


def run(topology: Topology, policy, config: SimConfig | None = None, threads: int = 1) -> SimResult:
    """Simulate ``config.replications`` runs of ``config.horizon`` slots.

    Ages start at A_i(0) = 1 and follow A <- 1 on success, A + 1 otherwise;
    ``aoi_hat`` is (1/T) sum_{t=1..T} A_i(t). Replication k draws from the
    stream keyed by (seed, k), so results do not depend on ``threads``.
    """
    config = config or SimConfig()
    p = _policy_probs(topology, policy)

    def one(k):
        return _run_replication(topology, p, config.horizon, make_rng(config.seed, k),
                                config.record_paths)

    reps = range(config.replications)
    if threads > 1 and config.replications > 1:
        with ThreadPoolExecutor(threads) as pool:
            out = list(pool.map(one, reps))
    else:
        out = [one(k) for k in reps]
    succ = np.stack([o[0] for o in out])
    tau = succ / config.horizon
    aoi = np.stack([o[1] for o in out])
    paths = np.stack([o[2] for o in out]) if config.record_paths else None
    return SimResult(tau.mean(axis=0), aoi.mean(axis=0), _halfwidth(tau), _halfwidth(aoi),
                     succ.sum(axis=0), config.horizon * config.replications, paths)


def baseline_aloha(n: int, p_common: float | None = None) -> Policy:
    """Spatially blind slotted ALOHA: every node uses the same probability (default 1/N)."""
    if n < 1:
        raise UsageError("need at least one node")
    if p_common is None:
        p_common = 1.0 / n
    if not (0 <= p_common <= 1):
        raise UsageError(f"p_common must lie in [0, 1], got {p_common}")
    return Policy(np.full(n, float(p_common)), f"aloha({p_common:.6g})")


def node_table(topology: Topology, policy, result: SimResult) -> list[dict]:
    """Per-node rows comparing analytic and simulated values (the simulate CSV)."""
    p = _policy_probs(topology, policy)
    tau = success_probabilities(topology, p)
    h = expected_aoi(topology, p).values
    rows = []
    for i in range(topology.n):
        rows.append({
            "node_id": i, "r": topology.distances[i], "p": p[i],
            "tau_analytic": tau[i], "tau_hat": result.tau_hat[i],
            "aoi_analytic": h[i], "aoi_hat": result.aoi_hat[i],
            "ci_tau": result.ci_tau[i], "ci_aoi": result.ci_aoi[i],
        })
    return rows
