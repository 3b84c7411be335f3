import math

import numpy as np
import pytest
from scipy import integrate

from spatial_aoi.analysis import (HALF_E, aoi_batch, boundary_is_monotone, check_bounds,
                                  convexity_probe, finite_n_bound, ratio_grid, ta_convergence_experiment,
                                  trace_pareto_boundary, zpf_sample, zpf_statistics, _convexity_check)
from spatial_aoi.channel import expected_aoi
from spatial_aoi.errors import UsageError
from spatial_aoi.topology import Topology, sample_uniform_disk, symmetric_topology


def test_finite_n_bound():
    assert finite_n_bound(10) == pytest.approx(1 / (2 * 0.9 ** 9), rel=1e-15)
    vals = [finite_n_bound(n) for n in (2, 5, 10, 100, 10_000)]
    assert all(a < b for a, b in zip(vals, vals[1:]))
    assert vals[-1] < HALF_E and vals[-1] == pytest.approx(HALF_E, rel=1e-4)


def test_bounds_symmetric_ten():
    rep = check_bounds(symmetric_topology(10))
    assert rep.mid == pytest.approx(1 / (2 * 0.9 ** 9), rel=1e-10)
    assert rep.mid <= HALF_E and rep.satisfied


@pytest.mark.parametrize("seed", range(3))
def test_bounds_random(seed):
    rep = check_bounds(sample_uniform_disk(100, seed))
    assert rep.satisfied, rep.flags
    assert rep.gap >= -1e-9


def test_bounds_preconditions():
    with pytest.raises(UsageError):
        check_bounds(Topology([0.5, 0.6], beta=3.0))


def test_aoi_batch_matches_scalar():
    top = sample_uniform_disk(7, 3)
    P = np.random.default_rng(1).random((5, 7))
    np.testing.assert_allclose(aoi_batch(top, P), [expected_aoi(top, p).values for p in P], rtol=1e-12)


def test_convexity_endpoints_exact():
    top = sample_uniform_disk(5, 0)
    rng = np.random.default_rng(0)
    p1, p2 = rng.random((3, 5)), rng.random((3, 5))
    for lam in (0.0, 1.0):
        lam_col = np.full((3, 1), lam)
        mix = lam_col * p1 + (1 - lam_col) * p2
        lhs = aoi_batch(top, mix)
        rhs = lam_col * aoi_batch(top, p1) + (1 - lam_col) * aoi_batch(top, p2)
        np.testing.assert_array_equal(lhs, rhs)
    v, _ = _convexity_check(top, p1, p1, np.full((3, 1), 0.3), 1e-12)
    assert v == 0


def test_convexity_strict_pair():
    top = symmetric_topology(2)
    p1, p2 = np.array([[1.0, 0.2]]), np.array([[0.2, 1.0]])
    lhs = aoi_batch(top, 0.5 * p1 + 0.5 * p2)[0]
    rhs = 0.5 * aoi_batch(top, p1)[0] + 0.5 * aoi_batch(top, p2)[0]
    # by hand: Phi(0.6, 0.6) = 1/(0.6 * 0.7) each; endpoints give (1/0.9, 1/0.2 * 2) ...
    assert lhs == pytest.approx([1 / 0.42, 1 / 0.42])
    assert rhs == pytest.approx([0.5 / 0.9 + 0.5 / 0.1, 0.5 / 0.1 + 0.5 / 0.9])
    assert np.all(lhs < rhs)


def test_convexity_probe_catches_nonconvex_map(monkeypatch):
    import spatial_aoi.analysis as an
    top = sample_uniform_disk(3, 1)
    monkeypatch.setattr(an, "aoi_batch", lambda t, P: np.sqrt(np.atleast_2d(P)))
    res = convexity_probe(top, trials=200, seed=1)
    assert not res.passed and res.witnesses


def test_convexity_probe_passes():
    assert convexity_probe(sample_uniform_disk(5, 2), trials=2000, seed=3).passed


def test_pareto_trace_examples():
    pts = trace_pareto_boundary(symmetric_topology(2), [[1, 1], [2, 1]])
    np.testing.assert_allclose(pts[0].aoi, [2, 2])
    np.testing.assert_allclose(pts[1].probs, [1, 2 / 3])
    np.testing.assert_allclose(pts[1].aoi, [1.5, 3.0])


def test_pareto_trace_monotone_and_achievable():
    top = Topology([0.4, 0.9])
    pts = trace_pareto_boundary(top, ratio_grid(-3, 3, 61))
    assert boundary_is_monotone(pts)
    h1 = [p.aoi[0] for p in pts]
    h2 = [p.aoi[1] for p in pts]
    # weights on node 0 fall along the grid, so its age rises while node 1's falls
    assert all(a <= b for a, b in zip(h1, h1[1:]))
    assert all(a >= b for a, b in zip(h2, h2[1:]))
    for p in pts:
        np.testing.assert_allclose(expected_aoi(top, p.probs).values, p.aoi, rtol=1e-12)


def test_pareto_trace_rejects_bad_weights():
    with pytest.raises(UsageError):
        trace_pareto_boundary(symmetric_topology(2), [[1, -1]])


def _moments_by_quadrature(r):
    a = r * r
    m1 = integrate.quad(lambda u: u / (u + a), 0, 1, epsabs=1e-15)[0]
    m2 = integrate.quad(lambda u: (u / (u + a)) ** 2, 0, 1, epsabs=1e-15)[0]
    return m1, m2 - m1 * m1


@pytest.mark.parametrize("r", [0.05, 0.3, 0.5, 0.8, 1.0])
def test_zpf_statistics_match_quadrature(r):
    mu, var = zpf_statistics(r)
    q_mu, q_var = _moments_by_quadrature(r)
    assert mu == pytest.approx(q_mu, rel=1e-10)
    assert var == pytest.approx(q_var, rel=1e-8)


def test_zpf_statistics_values():
    mu, var = zpf_statistics(1.0)
    assert mu == pytest.approx(1 - math.log(2), rel=1e-14)
    assert var == pytest.approx(0.5 - math.log(2) ** 2, rel=1e-12)
    assert var == pytest.approx(0.0195470, abs=1e-7)
    mu, var = zpf_statistics(0.5)
    assert mu == pytest.approx(0.597640, abs=1e-6)
    assert var == pytest.approx(0.038107, abs=1e-6)
    mu, var = zpf_statistics(1e-6)
    assert mu == pytest.approx(1.0, abs=1e-9) and var == pytest.approx(0.0, abs=1e-9)
    with pytest.raises(UsageError):
        zpf_statistics(0.0)


def test_zpf_sample_bounds():
    s = zpf_sample(0.7, 30, 50, seed=2)
    assert s.z_values.min() >= 1.0 and s.z_values.size == 50


def test_ta_convergence_small():
    res = ta_convergence_experiment([10, 20, 40], samples=40, seed=1)
    assert [r["n"] for r in res.rows] == [10, 20, 40]
    assert res.slope < 0
    with pytest.raises(UsageError):
        ta_convergence_experiment([5, 10], samples=5)
