"""Analytic capture-model quantities: success probabilities and expected AoI.

With Rayleigh fading marginalized out, node i succeeds in a slot with
probability

    tau_i = p_i * prod_{j != i} (1 - p_j / (1 + d_ij))

and, since successes form a Bernoulli process, its time-average expected age
is h_i = 1 / tau_i.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import UsageError
from .topology import Topology

# Products with more factors than this are accumulated in log space.
LOG_SPACE_MIN_NODES = 65
# Row block size when the ratio matrix is too large to materialize.
_ROW_BLOCK = 512


@dataclass(frozen=True, eq=False)
class Policy:
    """Per-node transmission probabilities plus a provenance label."""

    probs: np.ndarray
    label: str = ""

    def __post_init__(self):
        p = np.array(self.probs, dtype=float).reshape(-1)
        if p.size < 1:
            raise UsageError("policy needs at least one probability")
        if not np.all(np.isfinite(p)) or np.any(p < 0) or np.any(p > 1):
            raise UsageError("transmission probabilities must lie in [0, 1]")
        p.setflags(write=False)
        object.__setattr__(self, "probs", p)

    def __len__(self):
        return self.probs.size

    def check(self, topology: Topology) -> None:
        if len(self) != topology.n:
            raise UsageError(f"policy has {len(self)} entries but topology has {topology.n} nodes")


@dataclass(frozen=True, eq=False)
class AoiVector:
    """Per-node time-average expected AoI in slots; +inf marks a node that never succeeds."""

    values: np.ndarray = field()

    def __post_init__(self):
        v = np.array(self.values, dtype=float).reshape(-1)
        v.setflags(write=False)
        object.__setattr__(self, "values", v)

    def __len__(self):
        return self.values.size

    def __array__(self, dtype=None, copy=None):
        return np.asarray(self.values, dtype=dtype)


def _as_probs(policy, topology):
    if not isinstance(policy, Policy):
        policy = Policy(policy)
    policy.check(topology)
    return policy.probs


def _interference_log_or_prod(topology: Topology, p: np.ndarray, rows: np.ndarray, use_log: bool):
    """Per row i: prod_{j != i} (1 - p_j / (1 + d_ij)), or its log."""
    d = topology.ratio_rows(rows)
    factors = 1.0 - p[None, :] / (1.0 + d)
    factors[np.arange(rows.size), rows] = 1.0
    if use_log:
        return np.log(factors).sum(axis=1)
    return factors.prod(axis=1)


def success_probabilities(topology: Topology, policy) -> np.ndarray:
    """Vector of per-node success probabilities tau."""
    p = _as_probs(policy, topology)
    n = topology.n
    if n == 1:
        return p.copy()
    use_log = n >= LOG_SPACE_MIN_NODES
    out = np.empty(n)
    for start in range(0, n, _ROW_BLOCK):
        rows = np.arange(start, min(n, start + _ROW_BLOCK))
        inter = _interference_log_or_prod(topology, p, rows, use_log)
        if use_log:
            with np.errstate(divide="ignore"):
                out[rows] = np.exp(np.log(p[rows]) + inter)
        else:
            out[rows] = p[rows] * inter
    return out


def success_probability(topology: Topology, policy, i: int) -> float:
    """tau_i for a single node."""
    p = _as_probs(policy, topology)
    if not (0 <= i < topology.n):
        raise UsageError(f"node index {i} out of range for N={topology.n}")
    if topology.n == 1:
        return float(p[0])
    inter = _interference_log_or_prod(topology, p, np.array([i]), topology.n >= LOG_SPACE_MIN_NODES)[0]
    if topology.n >= LOG_SPACE_MIN_NODES:
        return float(p[i] * np.exp(inter))
    return float(p[i] * inter)


def aoi_from_tau(tau) -> np.ndarray:
    tau = np.asarray(tau, dtype=float)
    with np.errstate(divide="ignore", over="ignore"):
        return np.where(tau > 0, 1.0 / np.where(tau > 0, tau, 1.0), np.inf)


def expected_aoi(topology: Topology, policy) -> AoiVector:
    """h = Phi(p, r): elementwise 1 / tau, with +inf where tau = 0."""
    return AoiVector(aoi_from_tau(success_probabilities(topology, policy)))


def objective_value(kind: str, aoi, weights=None) -> float:
    """Scalar objective of an AoI vector.

    ``kind`` is ``"ews"`` (weighted sum, needs positive ``weights``), ``"mm"``
    (maximum) or ``"pf"`` (sum of logs). Infinite ages propagate.
    """
    h = np.asarray(aoi, dtype=float)
    kind = kind.lower()
    if kind == "ews":
        if weights is None:
            weights = np.ones_like(h)
        w = np.asarray(weights, dtype=float)
        if w.shape != h.shape:
            raise UsageError("weights must match the AoI vector length")
        if np.any(~(w > 0)):
            raise UsageError("EWS weights must be strictly positive")
        return float(np.sum(w * h))
    if kind == "mm":
        return float(np.max(h))
    if kind == "pf":
        return float(np.sum(np.log(h)))
    raise UsageError(f"unknown objective kind {kind!r}")
