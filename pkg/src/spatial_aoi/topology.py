"""Network geometry: node distances to the base station and interference ratios."""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path

import numpy as np

from .errors import UsageError

# Above this many nodes the N x N ratio matrix is not cached.
RATIO_CACHE_MAX_NODES = 4096


@dataclass(frozen=True, eq=False)
class Topology:
    """Positions of N nodes, described only by their distances to the base station.

    Distances are normalized radii in (0, 1]. ``beta`` is the path-loss
    exponent and ``theta`` the SIR capture threshold.
    """

    distances: np.ndarray
    beta: float = 2.0
    theta: float = 1.0
    _cache: dict = field(default_factory=dict, init=False, repr=False, compare=False)

    def __post_init__(self):
        r = np.array(self.distances, dtype=float).reshape(-1)
        if r.size < 1:
            raise UsageError("topology needs at least one node")
        if not np.all(np.isfinite(r)) or np.any(r <= 0) or np.any(r > 1):
            raise UsageError("distances must satisfy 0 < r_i <= 1")
        if not (np.isfinite(self.beta) and self.beta > 0):
            raise UsageError(f"beta must be positive, got {self.beta}")
        if not (np.isfinite(self.theta) and self.theta > 0):
            raise UsageError(f"theta must be positive, got {self.theta}")
        r.setflags(write=False)
        object.__setattr__(self, "distances", r)
        object.__setattr__(self, "beta", float(self.beta))
        object.__setattr__(self, "theta", float(self.theta))

    def __len__(self):
        return self.distances.size

    @property
    def n(self) -> int:
        return self.distances.size

    @cached_property
    def path_gain(self) -> np.ndarray:
        """r_i ** beta for every node."""
        g = self.distances ** self.beta
        g.setflags(write=False)
        return g

    def interference_ratio(self, i: int, j: int) -> float:
        """d_ij = r_j^beta / (r_i^beta theta).

        Node j's attempts reduce node i's success probability by the factor
        ``1 - p_j / (1 + d_ij)``.
        """
        n = self.n
        for k in (i, j):
            if not (0 <= k < n):
                raise UsageError(f"node index {k} out of range for N={n}")
        if i == j:
            raise UsageError("interference ratio needs two distinct nodes")
        g = self.path_gain
        return float(g[j] / (g[i] * self.theta))

    def ratio_rows(self, rows=None) -> np.ndarray:
        """Rows of the ratio matrix D[i, j] = d_ij (diagonal is meaningless).

        The full matrix is cached for N up to ``RATIO_CACHE_MAX_NODES``;
        above that only the requested rows are computed.
        """
        if self.n <= RATIO_CACHE_MAX_NODES:
            if "ratio" not in self._cache:
                m = self._compute_rows(np.arange(self.n))
                m.setflags(write=False)
                self._cache["ratio"] = m
            m = self._cache["ratio"]
            return m if rows is None else m[rows]
        if rows is None:
            rows = np.arange(self.n)
        return self._compute_rows(np.asarray(rows))

    def _compute_rows(self, rows):
        g = self.path_gain
        return g[None, :] / (g[rows, None] * self.theta)

    def to_dict(self) -> dict:
        return {"beta": self.beta, "theta": self.theta,
                "distances": [float(x) for x in self.distances]}

    @classmethod
    def from_dict(cls, data: dict) -> "Topology":
        missing = {"beta", "theta", "distances"} - set(data)
        if missing:
            raise UsageError(f"topology JSON is missing fields: {sorted(missing)}")
        dist = data["distances"]
        if not isinstance(dist, list):
            raise UsageError("'distances' must be a list of numbers")
        try:
            return cls(np.asarray(dist, dtype=float), float(data["beta"]), float(data["theta"]))
        except (TypeError, ValueError) as exc:
            if isinstance(exc, UsageError):
                raise
            raise UsageError(f"bad topology JSON: {exc}") from exc


def load_topology(path) -> Topology:
    with open(path) as fh:
        try:
            data = json.load(fh)
        except json.JSONDecodeError as exc:
            raise UsageError(f"{path}: not valid JSON ({exc})") from exc
    return Topology.from_dict(data)


def save_topology(topology: Topology, path) -> None:
    Path(path).write_text(json.dumps(topology.to_dict(), indent=2) + "\n")


def make_rng(seed, *keys) -> np.random.Generator:
    """Counter-based generator keyed by ``(seed, *keys)``.

    Streams depend only on the key tuple, so results do not change with the
    order or thread count used to run independent tasks.
    """
    return np.random.Generator(np.random.Philox(np.random.SeedSequence([int(seed), *map(int, keys)])))


def sample_radii(n: int, rng: np.random.Generator) -> np.ndarray:
    # sqrt(U) with U on (0, 1] has CDF r^2; 1 - U maps [0, 1) onto (0, 1].
    return np.sqrt(1.0 - rng.random(n))


def sample_uniform_disk(n: int, seed: int = 0, beta: float = 2.0, theta: float = 1.0,
                        *, key=()) -> Topology:
    """Topology with n nodes uniformly distributed over the unit disk."""
    if n < 1:
        raise UsageError("need at least one node")
    rng = make_rng(seed, *key)
    return Topology(sample_radii(n, rng), beta, theta)


def symmetric_topology(n: int, radius: float = 1.0, beta: float = 2.0,
                       theta: float = 1.0) -> Topology:
    """All n nodes on a circle of the given radius around the base station."""
    if n < 1:
        raise UsageError("need at least one node")
    if not (0 < radius <= 1):
        raise UsageError(f"radius must lie in (0, 1], got {radius}")
    return Topology(np.full(n, float(radius)), beta, theta)
