"""Numerical checks of the structural results: bounds, convexity, the Pareto
boundary, and large-N behaviour of the proportionally fair policy."""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .channel import Policy, expected_aoi
from .errors import ConvergenceError, UsageError
from .solvers import SolverConfig, pareto_point, pf_probability, solve_ews, solve_mm, ta_probability
from .topology import Topology, make_rng, sample_radii

HALF_E = math.e / 2.0


def finite_n_bound(n: int) -> float:
    """Normalized min-max age of the symmetric network, 1 / (2 (1 - 1/N)^(N-1)).

    Increases to e/2 as N grows. N = 1 gives 1/2 by the formula, but a lone
    node always has age 1, so that case returns 1.
    """
    if n < 1:
        raise UsageError("n must be positive")
    if n == 1:
        return 1.0
    return 1.0 / (2.0 * (1.0 - 1.0 / n) ** (n - 1))


@dataclass
class BoundReport:
    n: int
    lower: float
    mid: float
    finite_upper: float
    upper: float = HALF_E
    slack: float = 0.01
    tol: float = 1e-9
    flags: dict = field(default_factory=dict)

    @property
    def gap(self) -> float:
        """How far the symmetric-weight sum sits above the relaxed lower bound of 1."""
        return self.lower - 1.0

    @property
    def satisfied(self) -> bool:
        return all(self.flags.values())


def check_bounds(topology: Topology, config: SolverConfig | None = None,
                 slack: float = 0.01, tol: float = 1e-9) -> BoundReport:
    """Evaluate 1 <= sum(h^S)/N^2 <= h^MM/N <= bound for one topology.

    The upper comparison is made both against the finite-N symmetric value
    and against e/2, each with relative ``slack``.
    """
    if topology.beta != 2.0 or topology.theta != 1.0:
        raise UsageError("the bound holds for beta=2, theta=1 only")
    n = topology.n
    ews = solve_ews(topology, np.ones(n), config)
    mm = solve_mm(topology, config)
    lower = float(ews.h.sum() / n ** 2)
    mid = float(mm.h.mean() / n)
    fin = finite_n_bound(n)
    report = BoundReport(n, lower, mid, fin, slack=slack, tol=tol)
    report.flags = {
        "lower": lower >= 1.0 - tol,
        "chain": lower <= mid + tol,
        "finite_upper": mid <= fin * (1.0 + slack),
        "limit_upper": mid <= HALF_E * (1.0 + slack),
    }
    return report


def aoi_batch(topology: Topology, probs: np.ndarray) -> np.ndarray:
    """Expected ages for a batch of policies, shape (B, N) -> (B, N)."""
    P = np.atleast_2d(np.asarray(probs, dtype=float))
    n = topology.n
    if n == 1:
        with np.errstate(divide="ignore"):
            return 1.0 / P
    inv = 1.0 / (1.0 + topology.ratio_rows())            # (N, N): 1 / (1 + d_ij)
    log_f = np.log1p(-P[:, None, :] * inv[None, :, :])  # (B, N, N)
    idx = np.arange(n)
    log_f[:, idx, idx] = 0.0
    with np.errstate(divide="ignore"):
        log_tau = np.log(P) + log_f.sum(axis=2)
    return np.exp(-log_tau)


@dataclass
class ConvexityProbe:
    trials: int
    violations: int
    witnesses: list

    @property
    def passed(self) -> bool:
        return self.violations == 0


def convexity_probe(topology: Topology, trials: int = 1000, seed: int = 0,
                    rtol: float = 1e-12, batch: int = 2048) -> ConvexityProbe:
    """Check Phi(l p1 + (1-l) p2) <= l Phi(p1) + (1-l) Phi(p2) elementwise on random draws.

    Policies are drawn uniformly from (0, 1]^N and l from [0, 1]. Returns
    the number of violating trials and up to ten witnesses (p1, p2, l, excess).
    """
    if trials < 1:
        raise UsageError("trials must be at least 1")
    rng = make_rng(seed, topology.n, 0xC0)
    n = topology.n
    violations, witnesses = 0, []
    done = 0
    while done < trials:
        b = min(batch, trials - done)
        p1 = 1.0 - rng.random((b, n))
        p2 = 1.0 - rng.random((b, n))
        lam = rng.random((b, 1))
        v, w = _convexity_check(topology, p1, p2, lam, rtol)
        violations += v
        witnesses.extend(w[:max(0, 10 - len(witnesses))])
        done += b
    return ConvexityProbe(trials, violations, witnesses)


def _convexity_check(topology, p1, p2, lam, rtol):
    mix = lam * p1 + (1.0 - lam) * p2
    lhs = aoi_batch(topology, mix)
    rhs = lam * aoi_batch(topology, p1) + (1.0 - lam) * aoi_batch(topology, p2)
    excess = lhs - rhs * (1.0 + rtol)
    bad = np.flatnonzero((excess > 0).any(axis=1))
    wit = [(p1[k].copy(), p2[k].copy(), float(lam[k, 0]), float(excess[k].max())) for k in bad]
    return bad.size, wit


@dataclass
class BoundaryPoint:
    weights: np.ndarray
    probs: np.ndarray | None
    aoi: np.ndarray | None
    error: str | None = None


def trace_pareto_boundary(topology: Topology, weight_grid, config: SolverConfig | None = None):
    """Map each weight vector in the grid to its Pareto-optimal policy and ages.

    A failed solve is recorded on its point and the trace continues.
    """
    points = []
    for lam in weight_grid:
        lam = np.asarray(lam, dtype=float)
        if lam.size != topology.n or np.any(lam <= 0):
            raise UsageError("every weight vector must be positive with one entry per node")
        try:
            rep = pareto_point(topology, lam, config)
            points.append(BoundaryPoint(lam, rep.probs.copy(), rep.h.copy()))
        except ConvergenceError as exc:
            points.append(BoundaryPoint(lam, None, None, str(exc)))
    return points


def ratio_grid(lo_exp: float = -3.0, hi_exp: float = 3.0, count: int = 61):
    """Two-node weight vectors (w, 1) with w log-spaced from 10^hi_exp down to 10^lo_exp."""
    return [np.array([w, 1.0]) for w in np.logspace(hi_exp, lo_exp, count)]


def boundary_is_monotone(points, tol: float = 1e-12) -> bool:
    """For two nodes: sorted by h_1, h_2 never increases."""
    pts = sorted((p.aoi[0], p.aoi[1]) for p in points if p.aoi is not None)
    h2 = np.array([b for _, b in pts])
    return bool(np.all(np.diff(h2) <= tol * np.maximum(1.0, h2[:-1])))


def zpf_statistics(radius: float) -> tuple[float, float]:
    """Mean and variance of one interferer's contribution to 1/p^PF at the given radius.

    With a = r^2 and L = log(1 + 1/a): mu = 1 - a L and
    sigma^2 = 1 - 1/(1 + a) - (a L)^2.
    """
    if not (0 < radius <= 1):
        raise UsageError(f"radius must lie in (0, 1], got {radius}")
    a = radius * radius
    al = a * math.log1p(1.0 / a)
    return 1.0 - al, 1.0 - 1.0 / (1.0 + a) - al * al


def probe_topology(n: int, radius: float, seed: int, sample: int) -> Topology:
    """Probe node 0 at a fixed radius; the other n - 1 radii are uniform on the disk."""
    rng = make_rng(seed, n, sample)
    return Topology(np.concatenate([[radius], sample_radii(n - 1, rng)]), 2.0, 1.0)


@dataclass
class ZpfSample:
    radius: float
    n: int
    z_values: np.ndarray

    @property
    def clamp_fraction(self) -> float:
        return float(np.mean(self.z_values == 1.0))


def zpf_sample(radius: float, n: int, samples: int, seed: int = 0) -> ZpfSample:
    """Draw 1/p^PF for a probe node at ``radius`` over random interferer placements."""
    if n < 2:
        raise UsageError("need at least two nodes")
    z = np.array([1.0 / pf_probability(probe_topology(n, radius, seed, k), 0)
                  for k in range(samples)])
    return ZpfSample(radius, n, z)


@dataclass
class TaConvergence:
    rows: list
    slope: float


def ta_convergence_experiment(sizes, samples: int = 200, seed: int = 0,
                              radius: float = 1.0) -> TaConvergence:
    """Deviation |p^PF - p^TA| of a probe node versus network size.

    Reports median and 95th-percentile deviation per N and the least-squares
    slope of log(median) against log(N).
    """
    sizes = [int(s) for s in sizes]
    if len(sizes) < 2 or min(sizes) < 10:
        raise UsageError("need at least two sizes, each N >= 10")
    rows = []
    for n in sizes:
        p_ta = ta_probability(n, radius)
        devs, failures = [], 0
        for k in range(samples):
            try:
                devs.append(abs(pf_probability(probe_topology(n, radius, seed, k), 0) - p_ta))
            except (ConvergenceError, FloatingPointError):
                failures += 1
        devs = np.array(devs)
        rows.append({"n": n, "median": float(np.median(devs)),
                     "p95": float(np.quantile(devs, 0.95)), "mean": float(devs.mean()),
                     "p_ta": p_ta, "samples": int(devs.size), "failures": failures})
    x = np.log([r["n"] for r in rows])
    y = np.log([r["median"] for r in rows])
    slope = float(np.polyfit(x, y, 1)[0])
    return TaConvergence(rows, slope)


def pareto_perturbation_ok(topology: Topology, probs, eps: float = 1e-4) -> bool:
    """No single-coordinate +/-eps move lowers every node's age at once."""
    p = np.asarray(probs, dtype=float)
    base = expected_aoi(topology, p).values
    for i in range(topology.n):
        for s in (-eps, eps):
            q = p.copy()
            q[i] = min(1.0, max(0.0, q[i] + s))
            if q[i] == p[i]:
                continue
            h = expected_aoi(topology, Policy(q)).values
            if np.all(h < base):
                return False
    return True
