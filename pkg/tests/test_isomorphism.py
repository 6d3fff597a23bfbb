import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from treelocal.errors import CapacityError, DomainError
from treelocal.gff import GaussianField, sample_gff_values
from treelocal.isomorphism import (
    SignConfig,
    couple,
    couple_values,
    coupling_residual,
    enumerate_sign_law,
    sample_signs,
    sample_signs_batch,
    sign_law_tv,
)
from treelocal.local_time import LocalTimeField, sample_root_field, sample_root_values
from treelocal.tree import TreeShape, subtree_index_map


def phi_half(x):
    return np.exp(-x * x) / math.sqrt(math.pi)


def brute_force_law(parents, y):
    """Independent oracle: loop over configurations with explicit edge densities."""
    V = len(parents)
    out = {}
    for code in range(2 ** (V - 1)):
        s = [1] + [(-1 if (code >> (V - 2 - i)) & 1 else 1) for i in range(V - 1)]
        w = 1.0
        for x in range(1, V):
            w *= phi_half(s[x] * y[x] - s[parents[x]] * y[parents[x]])
        key = tuple(1 if y[i] == 0 else s[i] for i in range(V))
        out[key] = out.get(key, 0.0) + w
    z = sum(out.values())
    return {k: v / z for k, v in out.items()}


def test_single_edge_closed_form(rng):
    r, y = 0.7, 1.3
    configs, probs = enumerate_sign_law([-1, 0], [r, y], r)
    expected = phi_half(y - r) / (phi_half(y - r) + phi_half(-y - r))
    p_plus = probs[configs[:, 1] == 1][0]
    assert p_plus == pytest.approx(expected, rel=1e-12)
    draws = sample_signs_batch([-1, 0], np.tile([r, y], (200_000, 1)), rng)
    assert abs(np.mean(draws[:, 1] == 1) - expected) < 5 * math.sqrt(expected * (1 - expected) / 200_000)


def test_zero_value_gets_plus(rng):
    sig = sample_signs([-1, 0, 0], [1.0, 0.0, 2.0], 1.0, rng)
    assert sig.signs[1] == 1
    configs, probs = enumerate_sign_law([-1, 0, 0], [1.0, 0.0, 2.0], 1.0)
    assert np.all(configs[:, 1] == 1) and len(configs) == 2


def test_sign_config_root_positive():
    with pytest.raises(DomainError):
        SignConfig(np.array([-1, 1], dtype=np.int8))


def test_rootvalue_must_match(rng):
    with pytest.raises(DomainError):
        sample_signs([-1, 0], [1.0, 1.0], 2.0, rng)


def test_negative_values_rejected(rng):
    with pytest.raises(DomainError):
        sample_signs_batch([-1, 0], np.array([[1.0, -0.5]]), rng)
    with pytest.raises(DomainError):
        enumerate_sign_law([-1, 0], [1.0, -0.5], 1.0)


def test_enumeration_capacity():
    with pytest.raises(CapacityError):
        enumerate_sign_law([-1] + list(range(16)), np.ones(17), 1.0)


@settings(max_examples=40, deadline=None)
@given(st.integers(2, 9), st.integers(0, 2**32 - 1))
def test_enumeration_matches_oracle(V, seed):
    g = np.random.default_rng(seed)
    parents = [-1] + [int(g.integers(0, i)) for i in range(1, V)]
    y = np.abs(g.normal(0, 2, V))
    if V > 2:
        y[int(g.integers(1, V))] = 0.0
    configs, probs = enumerate_sign_law(parents, y, y[0])
    assert probs.sum() == pytest.approx(1.0, abs=1e-12)
    oracle = brute_force_law(parents, y)
    assert len(oracle) == len(configs)
    for c, p in zip(configs, probs):
        assert p == pytest.approx(oracle[tuple(int(s) for s in c)], rel=1e-9, abs=1e-15)


def test_symmetric_star_equiprobable():
    configs, probs = enumerate_sign_law([-1, 0, 0, 0], [0.0, 1.2, 1.2, 1.2], 0.0)
    assert len(probs) == 8
    assert np.allclose(probs, 1 / 8, atol=1e-14)


def test_sampler_matches_enumeration_on_random_trees(rng):
    for _ in range(100):
        V = int(rng.integers(2, 8))
        parents = [-1] + [int(rng.integers(0, i)) for i in range(1, V)]
        y = np.abs(rng.normal(0, rng.uniform(0.2, 3), V))
        configs, probs = enumerate_sign_law(parents, y, y[0])
        draws = sample_signs_batch(parents, np.tile(y, (20_000, 1)), rng)
        # 20k draws: TV noise is well below this bound for <= 64 configurations
        assert sign_law_tv(draws, configs, probs) < 0.05


def test_deep_subtree_no_underflow(rng):
    shape = TreeShape(2, 10)
    y = np.abs(rng.normal(0, 15, shape.num_vertices)) + 30
    sig = sample_signs_batch(shape, y[None, :], rng)
    assert set(np.unique(sig)) <= {-1, 1}


@pytest.mark.parametrize("b,k", [(2, 2), (2, 8), (3, 2), (3, 8)])
def test_coupling_identity(rng, b, k):
    shape = TreeShape(b, 8)
    for t in (0.5, 4.0):
        L = sample_root_values(shape, t, 20, rng)
        h = sample_gff_values(shape, 20, rng)
        ht, sig = couple_values(shape, L, h, k, rng)
        assert coupling_residual(shape, L, h, ht, k).max() < 1e-9
        top = shape.level_offset(8 - k + 1)
        assert np.array_equal(ht[:, :top].view(np.int64), h[:, :top].view(np.int64))
        assert np.all(sig[:, :top] == 1)


def test_full_tree_identity(rng):
    shape = TreeShape(2, 6)
    t = 4.0
    triple = couple(sample_root_field(shape, t, rng), GaussianField(shape, sample_gff_values(shape, 1, rng)[0]), 6, rng)
    lhs = triple.L.values + triple.h.values**2
    rhs = (triple.h_tilde.values + 2.0) ** 2
    assert np.allclose(lhs, rhs, rtol=1e-12, atol=1e-12)


def test_coupled_signs_agree(rng):
    shape = TreeShape(3, 5)
    L = sample_root_values(shape, 2.0, 10, rng)
    h = sample_gff_values(shape, 10, rng)
    ht, sig = couple_values(shape, L, h, 3, rng)
    M = subtree_index_map(shape, 2)
    v = ht[:, M[:, 1:]] - ht[:, M[:, :1]] + np.sqrt(L[:, M[:, :1]])
    nz = np.abs(v) > 1e-9
    assert np.all(np.sign(v)[nz] == sig[:, M[:, 1:]][nz])


def test_zero_root_local_time_still_couples(rng):
    shape = TreeShape(2, 4)
    L = np.zeros((5, shape.num_vertices))
    h = sample_gff_values(shape, 5, rng)
    ht, _ = couple_values(shape, L, h, 4, rng)
    assert coupling_residual(shape, L, h, ht, 4).max() < 1e-12


def test_couple_errors(rng):
    shape = TreeShape(2, 3)
    L = sample_root_field(shape, 1.0, rng)
    with pytest.raises(DomainError):
        couple(L, GaussianField(TreeShape(2, 4), sample_gff_values(TreeShape(2, 4), 1, rng)[0]), 2, rng)
    h = GaussianField(shape, sample_gff_values(shape, 1, rng)[0])
    with pytest.raises(DomainError):
        couple(L, h, 0, rng)
    leafstart = LocalTimeField(shape, np.zeros(shape.num_vertices), "leafstart")
    with pytest.raises(DomainError):
        couple(leafstart, h, 2, rng)
