"""Optimal transmission policies.

Every policy of interest sits on the Pareto boundary of achievable AoI and
is the clamped solution of the weighted stationarity conditions

    f_i(p_i) = lam_i / p_i - sum_{j != i} lam_j / (1 + d_ji - p_i) = 0

for some positive weight vector ``lam``. For fixed weights f_i only depends
on p_i and is strictly decreasing on (0, 1], so each coordinate is a
one-dimensional bracketed root. The objective-specific solvers differ only
in how they pick ``lam``:

* PF uses ``lam = 1``;
* EWS needs ``lam = alpha * h(p)``, found by fixed-point iteration;
* MM needs equal ages, found by multiplicative dual ascent on ``lam``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .channel import AoiVector, Policy, expected_aoi
from .errors import ConvergenceError, UsageError
from .topology import Topology

# Rows per block when evaluating f on large networks.
_BLOCK = 1024
_BISECT_MAX_ITER = 200


@dataclass
class SolverConfig:
    tol_fixed_point: float = 1e-10
    tol_outer: float = 1e-8
    max_sweeps: int = 10_000
    damping: float = 0.5
    mm_step: float = 0.1

    def __post_init__(self):
        if not (self.tol_fixed_point > 0 and self.tol_outer > 0):
            raise UsageError("tolerances must be positive")
        if not (0 < self.damping <= 1):
            raise UsageError("damping must lie in (0, 1]")
        if not self.mm_step > 0:
            raise UsageError("mm_step must be positive")
        if self.max_sweeps < 1:
            raise UsageError("max_sweeps must be at least 1")


@dataclass
class SolverReport:
    policy: Policy
    aoi: AoiVector
    multipliers: np.ndarray
    residual: float
    sweeps: int
    converged: bool
    trace: list = field(default_factory=list)

    @property
    def probs(self) -> np.ndarray:
        return self.policy.probs

    @property
    def h(self) -> np.ndarray:
        return self.aoi.values

    def to_dict(self) -> dict:
        return {
            "policy": [float(x) for x in self.policy.probs],
            "aoi": [float(x) for x in self.aoi.values],
            "multipliers": [float(x) for x in self.multipliers],
            "residual": float(self.residual),
            "sweeps": int(self.sweeps),
            "converged": bool(self.converged),
        }


def _check_weights(weights, n):
    w = np.asarray(weights, dtype=float).reshape(-1)
    if w.size != n:
        raise UsageError(f"expected {n} weights, got {w.size}")
    if not np.all(np.isfinite(w)) or np.any(w <= 0):
        raise UsageError("weights must be strictly positive and finite")
    return w


def _incoming_ratio_rows(topology: Topology, rows: np.ndarray) -> np.ndarray:
    """C[k, j] = d_{j, rows[k]} = r_i^beta / (r_j^beta theta) for i = rows[k]."""
    g = topology.path_gain
    return g[rows, None] / (g[None, :] * topology.theta)


def stationarity(topology: Topology, weights, p, rows=None) -> np.ndarray:
    """f_i(p_i) for the requested nodes (all by default)."""
    lam = np.asarray(weights, dtype=float)
    p = np.asarray(p, dtype=float)
    rows = np.arange(topology.n) if rows is None else np.asarray(rows)
    out = np.empty(rows.size)
    for start in range(0, rows.size, _BLOCK):
        blk = rows[start:start + _BLOCK]
        pb = p[blk] if p.size == topology.n else p[start:start + _BLOCK]
        c = _incoming_ratio_rows(topology, blk)
        w = np.broadcast_to(lam, c.shape).copy()
        w[np.arange(blk.size), blk] = 0.0
        out[start:start + blk.size] = lam[blk] / pb - (w / (1.0 + c - pb[:, None])).sum(axis=1)
    return out


def _bisect_roots(topology: Topology, lam: np.ndarray, rows: np.ndarray, x0=None) -> np.ndarray:
    """Clamped roots of f_i for each i in rows (min{root, 1}).

    Bracketed search on (0, 1]: every iterate shrinks the sign-change bracket,
    and a Newton step replaces the midpoint only when it lands strictly
    inside the bracket, so bisection's guarantee is kept.
    """
    p = np.ones(rows.size)
    for start in range(0, rows.size, _BLOCK):
        blk = rows[start:start + _BLOCK]
        c = _incoming_ratio_rows(topology, blk)
        w = np.broadcast_to(lam, c.shape).copy()
        w[np.arange(blk.size), blk] = 0.0
        own = lam[blk]

        def f(x, sel):
            return own[sel] / x - (w[sel] / (1.0 + c[sel] - x[:, None])).sum(axis=1)

        def f_and_slope(x, sel):
            inv = 1.0 / (1.0 + c[sel] - x[:, None])
            wi = w[sel] * inv
            return (own[sel] / x - wi.sum(axis=1),
                    -own[sel] / (x * x) - (wi * inv).sum(axis=1))

        f_one = f(np.ones(blk.size), np.arange(blk.size))
        # f_i(1) >= 0 means the unconstrained root lies at or beyond 1.
        active = np.flatnonzero(f_one < 0)
        lo = np.zeros(active.size)
        hi = np.ones(active.size)
        x = np.full(active.size, 0.5)
        if x0 is not None:
            guess = np.asarray(x0, dtype=float)[start:start + blk.size][active]
            x = np.where((guess > 0) & (guess < 1), guess, x)
        todo = np.arange(active.size)
        for _ in range(_BISECT_MAX_ITER):
            if todo.size == 0:
                break
            xs, ls, hs = x[todo], lo[todo], hi[todo]
            fx, dfx = f_and_slope(xs, active[todo])
            pos = fx > 0
            ls = np.where(pos, xs, ls)
            hs = np.where(pos, hs, xs)
            with np.errstate(divide="ignore", invalid="ignore"):
                newton = xs - fx / dfx
            mid = 0.5 * (ls + hs)
            inside = (newton > ls) & (newton < hs)
            nxt = np.where(inside, newton, mid)
            lo[todo], hi[todo] = ls, hs
            stalled = (fx == 0) | (np.abs(nxt - xs) <= 2.0 * np.spacing(xs)) | ~((mid > ls) & (mid < hs))
            x[todo] = np.where(fx == 0, xs, nxt)
            todo = todo[~stalled]
        # x may have stepped off its best value on the last move; keep whichever
        # of x and the bracket ends has the smallest |f|.
        cands = np.stack([x, np.where(lo > 0, lo, hi), hi])
        fvals = np.abs(np.stack([f(cv, active) for cv in cands]))
        best = cands[np.argmin(fvals, axis=0), np.arange(active.size)]
        pb = np.ones(blk.size)
        pb[active] = best
        p[start:start + blk.size] = pb
    return p


def fixed_point_residual(topology: Topology, weights, p) -> float:
    """max |f_i(p_i)| over unclamped nodes, combined with the KKT slack max(0, -f_i(1)) on clamped ones."""
    p = np.asarray(p, dtype=float)
    if topology.n == 1:
        return 0.0
    f = stationarity(topology, weights, p)
    clamped = p >= 1.0
    res_free = np.abs(f[~clamped]).max(initial=0.0)
    res_clamped = np.maximum(0.0, -f[clamped]).max(initial=0.0)
    return float(max(res_free, res_clamped))


def _singleton_report(weights, label):
    return SolverReport(Policy(np.ones(1), label), AoiVector(np.ones(1)),
                        np.asarray(weights, dtype=float).reshape(-1), 0.0, 0, True)


def pareto_point(topology: Topology, weights, config: SolverConfig | None = None,
                 initial=None) -> SolverReport:
    """Policy on the Pareto boundary selected by positive weights.

    Solves f_i(p_i) = 0 for every node and clamps to 1 where the root lies
    beyond it. The coordinates are swept until the joint residual drops
    below ``config.tol_fixed_point``; since each f_i depends only on its own
    p_i a single sweep normally suffices. ``initial`` is an optional starting
    policy (the default is p_i = 1/N); it changes the work, not the answer.
    """
    config = config or SolverConfig()
    lam = _check_weights(weights, topology.n)
    label = "pareto(" + ",".join(f"{x:.6g}" for x in lam) + ")"
    if topology.n == 1:
        return _singleton_report(lam, label)
    rows = np.arange(topology.n)
    p = np.full(topology.n, 1.0 / topology.n) if initial is None else np.asarray(initial, dtype=float)
    trace = []
    for sweep in range(1, config.max_sweeps + 1):
        p_new = _bisect_roots(topology, lam, rows, p)
        res = fixed_point_residual(topology, lam, p_new)
        trace.append(res)
        done = res <= config.tol_fixed_point or np.array_equal(p_new, p)
        p = p_new
        if done:
            break
    policy = Policy(p, label)
    report = SolverReport(policy, expected_aoi(topology, policy), lam, trace[-1], sweep,
                          trace[-1] <= config.tol_fixed_point, trace)
    if not report.converged:
        raise ConvergenceError(
            f"pareto_point residual {report.residual:.3g} above {config.tol_fixed_point:.3g}",
            trace, report)
    return report


def solve_pf(topology: Topology, config: SolverConfig | None = None) -> SolverReport:
    """Proportionally fair policy: the Pareto point with unit weights."""
    report = pareto_point(topology, np.ones(topology.n), config)
    report.policy = Policy(report.policy.probs, "pf")
    return report


def pf_probability(topology: Topology, i: int) -> float:
    """PF transmission probability of a single node.

    The PF conditions are decoupled, so this is exactly ``solve_pf(...)``'s
    i-th entry, computed at O(N) cost.
    """
    if topology.n == 1:
        return 1.0
    return float(_bisect_roots(topology, np.ones(topology.n), np.array([i]))[0])


def _normalize_max(v):
    return v / v.max()


def solve_ews(topology: Topology, weights=None, config: SolverConfig | None = None) -> SolverReport:
    """Minimize sum_i alpha_i h_i.

    At the optimum the multipliers equal the weighted ages, lam = alpha * h.
    Starting from lam = alpha this alternates a Pareto solve with the
    multiplier update lam <- (1 - damping) lam + damping alpha h (scaled so
    max lam = 1) until the policy stops moving and the stationarity residual
    under lam = alpha * h is within tolerance.
    """
    config = config or SolverConfig()
    alpha = _check_weights(np.ones(topology.n) if weights is None else weights, topology.n)
    label = "ews(" + ",".join(f"{x:.6g}" for x in alpha) + ")"
    if topology.n == 1:
        report = _singleton_report(alpha, label)
        report.multipliers = alpha.copy()
        return report
    lam = _normalize_max(alpha.copy())
    p_prev = None
    trace = []
    inner = SolverConfig(config.tol_fixed_point, config.tol_outer, config.max_sweeps)
    for it in range(1, config.max_sweeps + 1):
        p = pareto_point(topology, lam, inner, p_prev).probs
        h = expected_aoi(topology, p).values
        if not np.all(np.isfinite(h)):
            raise ConvergenceError("EWS iteration produced an infinite age", trace)
        target = _normalize_max(alpha * h)
        res = fixed_point_residual(topology, target, p)
        step = np.inf if p_prev is None else float(np.max(np.abs(p - p_prev)))
        trace.append(res)
        if step < config.tol_outer and res <= config.tol_fixed_point:
            lam = target
            break
        lam = _normalize_max((1.0 - config.damping) * lam + config.damping * target)
        p_prev = p
    else:
        raise ConvergenceError(
            f"EWS did not converge in {config.max_sweeps} iterations (residual {trace[-1]:.3g})", trace)
    policy = Policy(p, label)
    return SolverReport(policy, AoiVector(h), lam, res, it, True, trace)


def solve_mm(topology: Topology, config: SolverConfig | None = None) -> SolverReport:
    """Minimize max_i h_i.

    The optimum equalizes every node's age. Weights follow a multiplicative
    update on log-age deviations,

        lam_i <- lam_i * exp(mm_step * (log h_i - mean_k log h_k)),

    then are rescaled to sum to mean_k log h_k. Stops once the spread
    max h - min h falls below ``tol_outer`` times the mean age.
    """
    config = config or SolverConfig()
    n = topology.n
    if n == 1:
        return _singleton_report(np.zeros(1), "mm")
    lam = np.full(n, 1.0 / n)
    p = None
    trace = []
    inner = SolverConfig(config.tol_fixed_point, config.tol_outer, config.max_sweeps)
    for it in range(1, config.max_sweeps + 1):
        p = pareto_point(topology, lam, inner, p).probs
        h = expected_aoi(topology, p).values
        spread = float(h.max() - h.min())
        trace.append(spread)
        if spread < config.tol_outer * float(h.mean()):
            break
        log_h = np.log(h)
        dev = log_h - log_h.mean()
        lam = lam * np.exp(config.mm_step * dev)
        lam *= log_h.mean() / lam.sum()
    else:
        raise ConvergenceError(
            f"MM did not equalize ages in {config.max_sweeps} iterations (spread {trace[-1]:.3g})", trace)
    # Report multipliers on the scale at which they sum to log h^MM.
    lam = lam * math.log(h.mean()) / lam.sum()
    res = fixed_point_residual(topology, lam, p)
    policy = Policy(p, "mm")
    return SolverReport(policy, AoiVector(h), lam, res, it, res <= config.tol_fixed_point, trace)


def ta_probability(n: int, radius: float, beta: float = 2.0, theta: float = 1.0) -> float:
    """Topology-agnostic PF approximation using only a node's own radius and N.

    ``min{1, 1 / ((N - 1) (1 - r^2 log(1 + 1/r^2)))}``; derived for beta = 2
    and theta = 1 only.
    """
    if n < 2:
        raise UsageError("the topology-agnostic policy needs N >= 2")
    if beta != 2.0 or theta != 1.0:
        raise UsageError("the topology-agnostic policy is only valid for beta=2, theta=1")
    if not (0 < radius <= 1):
        raise UsageError(f"radius must lie in (0, 1], got {radius}")
    a = radius * radius
    mean_term = 1.0 - a * math.log1p(1.0 / a)
    return min(1.0, 1.0 / ((n - 1) * mean_term))


def solve_ta(n: int, radius: float, beta: float = 2.0, theta: float = 1.0) -> float:
    return ta_probability(n, radius, beta, theta)


def ta_policy(topology: Topology) -> Policy:
    p = [ta_probability(topology.n, r, topology.beta, topology.theta) for r in topology.distances]
    return Policy(np.array(p), "ta")
