import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from treelocal.errors import DomainError
from treelocal.gff import GaussianField, brw_max_pairs, brw_max_samples, centering, sample_gff, sample_gff_values
from treelocal.local_time import sample_root_values
from treelocal.stats import ks_stat, tail_slope
from treelocal.tree import TreeShape, ball_distance


def _leaf_target(shape):
    idx = np.arange(shape.num_leaves)
    return 0.5 * (shape.n - ball_distance(shape, idx[:, None], idx[None, :]))


def test_root_is_zero(rng):
    vals = sample_gff_values(TreeShape(3, 4), 100, rng)
    assert np.all(vals[:, 0] == 0)
    assert sample_gff(TreeShape(2, 3), rng).values[0] == 0


def test_field_rejects_nonzero_root():
    s = TreeShape(2, 1)
    with pytest.raises(DomainError):
        GaussianField(s, np.array([1.0, 0.0, 0.0]))


def test_variance_by_level(rng):
    shape = TreeShape(2, 4)
    vals = sample_gff_values(shape, 100_000, rng)
    R = vals.shape[0]
    for v in range(1, shape.num_vertices):
        target = shape.levels[v] / 2
        se = target * math.sqrt(2 / R)
        assert abs(vals[:, v].var() - target) < 3 * se


def test_leaf_covariance_reconstruction(rng):
    shape = TreeShape(2, 5)
    leaves = sample_gff_values(shape, 100_000, rng, leaves_only=True)
    cov = np.cov(leaves, rowvar=False)
    assert np.abs(cov - _leaf_target(shape)).max() < 0.03


def test_centering_values():
    c = centering(2, 10, 1.0)
    assert round(c.m_n, 4) == 5.5599
    assert round(c.a_n, 4) == 5.5312
    s = math.sqrt(math.log(2))
    assert c.m_tilde_n == pytest.approx(10 * s - 0.75 / s * math.log(10))
    assert abs(centering(2, 10, 1e14).a_n - c.m_tilde_n) < 1e-6
    assert centering(3, 5).a_n is None


@pytest.mark.parametrize("args", [(2, 10, 0.0), (2, 10, -1.0), (1, 3, None), (2, 0, None)])
def test_centering_errors(args):
    with pytest.raises(DomainError):
        centering(*args)


@given(st.integers(2, 6), st.integers(1, 60), st.floats(1e-3, 1e6))
def test_a_n_below_m_tilde(b, n, t):
    c = centering(b, n, t)
    assert c.a_n < c.m_tilde_n


def test_restricted_max_is_dominated(rng):
    full, restricted = brw_max_pairs(8, 2000, rng, b=3, block=300)
    assert np.all(restricted <= full)
    assert np.any(restricted < full)


def test_brw_max_tightness(rng):
    iqr = []
    for k in range(8, 17, 2):
        x = brw_max_samples(k, False, 2000, rng) - centering(2, k).m_tilde_n
        q1, q3 = np.quantile(x, [0.25, 0.75])
        iqr.append(q3 - q1)
    # bounded: no sustained growth across k beyond sampling noise
    assert max(iqr) < 1.3 * min(iqr)
    assert np.polyfit(np.arange(len(iqr)), iqr, 1)[0] < 0.05


@pytest.mark.slow
def test_brw_max_right_tail(rng):
    x = brw_max_samples(16, False, 100_000, rng) - centering(2, 16).m_tilde_n
    fit = tail_slope(x, (1.0, 3.0))
    target = 2 * math.sqrt(math.log(2))
    assert abs(fit.rate - target) / target < 0.15


def test_clt_link_local_time_to_gff(rng):
    shape = TreeShape(2, 3)
    t = 1e4
    lt = np.sqrt(sample_root_values(shape, t, 100_000, rng, leaves_only=True)) - math.sqrt(t)
    g = sample_gff_values(shape, 100_000, rng, leaves_only=True)
    assert max(ks_stat(lt[:, i], g[:, i]) for i in range(shape.num_leaves)) < 0.03
    assert np.abs(np.cov(lt, rowvar=False) - np.cov(g, rowvar=False)).max() < 0.05
