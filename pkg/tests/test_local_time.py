import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from treelocal.errors import DomainError
from treelocal.local_time import (
    LocalTimeField,
    leaf_hit_probability,
    offspring_sample,
    path_vertices,
    sample_leafstart_field,
    sample_leafstart_values,
    sample_path_times,
    sample_path_times_values,
    sample_root_field,
    sample_root_values,
    simulate_ctmc,
    simulate_ctmc_values,
)
from treelocal.stats import ks_stat
from treelocal.tree import ROOT, TreeShape, VertexRef


def test_offspring_zero_parent(rng):
    assert offspring_sample(0.0, rng) == 0.0
    assert np.all(offspring_sample(np.zeros(1000), rng) == 0)


@pytest.mark.parametrize("v", [-1.0, math.inf, math.nan])
def test_offspring_rejects_bad_parent(rng, v):
    with pytest.raises(DomainError):
        offspring_sample(v, rng)


def test_offspring_zero_mass(rng):
    x = offspring_sample(2.0, rng, size=1_000_000)
    assert abs(np.mean(x == 0) - math.exp(-2)) < 0.001


def test_offspring_moments(rng):
    # mean v and variance 2v: E[N] = v and E[N^2] = v + v^2 for the Gamma(N, 1) mixture
    x = offspring_sample(5.0, rng, size=1_000_000)
    assert abs(x.mean() / 5.0 - 1) < 0.01
    assert abs(x.var() / 10.0 - 1) < 0.01


def test_offspring_moment_oracle_by_quadrature():
    # mixture density: atom e^{-v} at 0 plus sum_k Poisson(k; v) Gamma(k, 1) density
    from scipy import integrate, stats

    v = 5.0
    ks = np.arange(1, 80)
    w = stats.poisson.pmf(ks, v)
    dens = lambda s: np.sum(w * stats.gamma.pdf(s, ks))
    m1 = integrate.quad(lambda s: s * dens(s), 0, 200, limit=200)[0]
    m2 = integrate.quad(lambda s: s * s * dens(s), 0, 200, limit=200)[0]
    assert m1 == pytest.approx(v, rel=1e-6)
    assert m2 - m1**2 == pytest.approx(2 * v, rel=1e-6)


def test_root_field_zero_time(rng):
    f = sample_root_field(TreeShape(2, 5), 0.0, rng)
    assert np.all(f.values == 0)


def test_root_field_value_at_root_and_readonly(rng):
    f = sample_root_field(TreeShape(3, 3), 2.5, rng)
    assert f.values[0] == 2.5
    with pytest.raises(ValueError):
        f.values[0] = 1.0


def test_root_field_leaf_means(rng):
    vals = sample_root_values(TreeShape(2, 4), 3.0, 100_000, rng, leaves_only=True)
    assert np.all(np.abs(vals.mean(axis=0) - 3.0) < 0.05)


def test_root_field_rejects_negative_time(rng):
    with pytest.raises(DomainError):
        sample_root_values(TreeShape(2, 2), -1.0, 1, rng)


@settings(max_examples=25, deadline=None)
@given(st.integers(2, 4), st.integers(1, 5), st.floats(0.0, 5.0), st.integers(0, 2**32 - 1))
def test_zero_absorption(b, n, t, seed):
    shape = TreeShape(b, n)
    vals = sample_root_values(shape, t, 20, np.random.default_rng(seed))
    par = shape.parents[1:]
    assert np.all(vals >= 0)
    assert np.all(vals[:, 1:][vals[:, par] == 0] == 0)


def test_local_time_field_validates():
    s = TreeShape(2, 2)
    with pytest.raises(DomainError):
        LocalTimeField(s, -np.ones(s.num_vertices), "root", t=1.0)
    with pytest.raises(DomainError):
        LocalTimeField(s, np.zeros(3), "root", t=0.0)


def test_ctmc_accumulate_root_exact(rng):
    lt, jumps = simulate_ctmc_values(TreeShape(2, 3), ROOT, "accumulate", 500, rng, t=1.7)
    assert np.all(lt[:, 0] == 1.7)
    assert np.all(jumps >= 0)
    field, summary = simulate_ctmc(TreeShape(2, 3), ROOT, "accumulate", rng, t=0.4)
    assert field.values[0] == 0.4 and summary.wall_time >= 0


def test_ctmc_hit_root_from_leaf(rng):
    shape = TreeShape(3, 4)
    lt, _ = simulate_ctmc_values(shape, shape.leaf(0), "hit_root", 2000, rng)
    assert np.all(lt[:, 0] == 0)
    assert np.all(lt[:, shape.leaf_slice][:, 27:] == 0)
    assert np.all(lt[:, shape.index(shape.leaf(0))] > 0)


def test_ctmc_hit_leaves_stops_on_arrival(rng):
    shape = TreeShape(2, 3)
    lt, jumps = simulate_ctmc_values(shape, ROOT, "hit_leaves", 500, rng)
    assert np.all(lt[:, shape.leaf_slice] == 0)
    assert np.all(jumps >= 3)


@pytest.mark.parametrize(
    "start,rule,t",
    [(ROOT, "hit_root", None), (VertexRef((0, 0)), "hit_leaves", None), (ROOT, "accumulate", None), (ROOT, "bogus", 1.0)],
)
def test_ctmc_rule_mismatch(rng, start, rule, t):
    with pytest.raises(DomainError):
        simulate_ctmc_values(TreeShape(2, 2), start, rule, 1, rng, t=t)


def test_ctmc_zero_time(rng):
    lt, jumps = simulate_ctmc_values(TreeShape(2, 2), ROOT, "accumulate", 10, rng, t=0.0)
    assert np.all(lt == 0) and np.all(jumps == 0)


def test_path_times(rng):
    assert sample_path_times(5, rng).T[0] == 0
    T = sample_path_times_values(7, 100_000, rng)
    assert np.all(T[:, 0] == 0)
    for k in (1, 3, 7):
        assert ks_stat(T[:, k], cdf=lambda s, k=k: -np.expm1(-s / k)) < 0.01
        assert abs(T[:, k].mean() / k - 1) < 0.02


def test_path_times_rejects_zero_depth(rng):
    with pytest.raises(DomainError):
        sample_path_times_values(0, 1, rng)


@pytest.mark.parametrize("b", [2, 3, 4])
def test_leafstart_support(rng, b):
    shape = TreeShape(b, 5)
    vals = sample_leafstart_values(shape, 2000, rng)
    assert np.all(vals[:, 0] == 0)
    leaves = vals[:, shape.leaf_slice]
    assert np.all(leaves[:, shape.num_leaves // b :] == 0)
    f = sample_leafstart_field(shape, rng)
    assert f.origin == "leafstart" and f.values[0] == 0


def test_leafstart_path_carries_path_times(rng):
    shape = TreeShape(3, 6)
    vals = sample_leafstart_values(shape, 100_000, rng)
    path = path_vertices(shape)
    for k in (1, 3, 6):
        assert ks_stat(vals[:, path[k]], cdf=lambda s, k=k: -np.expm1(-s / k)) < 0.01


def test_leafstart_restriction_consistency(rng):
    deep = TreeShape(2, 6)
    shallow = TreeShape(2, 3)
    a = sample_leafstart_values(deep, 50_000, rng)[:, deep.level_slice(3)]
    b = sample_leafstart_values(shallow, 50_000, rng)[:, shallow.leaf_slice]
    assert max(ks_stat(a[:, i], b[:, i]) for i in range(shallow.num_leaves)) < 0.02


def test_leaf_hit_probability_monotone(rng):
    shape = TreeShape(2, 4)
    p = [leaf_hit_probability(shape, t, 20_000, rng) for t in (0.25, 1.0, 4.0)]
    assert 0 < p[0] <= p[1] <= p[2] < 1
