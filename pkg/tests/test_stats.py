import json
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from treelocal.errors import CapacityError, DomainError
from treelocal.stats import (
    TestReport,
    dispersion,
    fit_kappa,
    ks_critical,
    ks_stat,
    laplace_mixture,
    tail_slope,
)


def ks_oracle(a, b):
    pts = np.concatenate([a, b])
    return max(abs(np.mean(a <= x) - np.mean(b <= x)) for x in pts)


def test_ks_trivial():
    x = np.arange(10.0)
    assert ks_stat(x, x) == 0.0
    assert ks_stat([0.0], [1.0]) == 1.0
    with pytest.raises(DomainError):
        ks_stat([], [1.0])
    with pytest.raises(DomainError):
        ks_stat([1.0])


finite = st.floats(-1e3, 1e3, allow_nan=False)


@settings(max_examples=60, deadline=None)
@given(st.lists(finite, min_size=1, max_size=50), st.lists(finite, min_size=1, max_size=50))
def test_ks_matches_definition(a, b):
    # doubling is exact in floating point, so it is a strictly monotone transform
    a, b = np.array(a), np.array(b)
    assert ks_stat(a, b) == pytest.approx(ks_oracle(a, b), abs=1e-12)
    assert ks_stat(a, b) == pytest.approx(ks_stat(b, a), abs=1e-12)
    assert ks_stat(a, b) == pytest.approx(ks_stat(2 * a, 2 * b), abs=1e-12)


def test_ks_one_sample(rng):
    x = rng.exponential(size=20_000)
    assert ks_stat(x, cdf=lambda s: -np.expm1(-s)) < ks_critical(20_000)


def test_tail_slope_exponential(rng):
    fit = tail_slope(rng.exponential(0.5, 100_000), (0.5, 2.0))
    assert abs(fit.slope + 2) < 0.1


def test_tail_slope_gumbel(rng):
    fit = tail_slope(rng.gumbel(size=200_000), (2.0, 5.0))
    assert abs(fit.slope + 1) < 0.1


def test_tail_slope_corrected_rate(rng):
    # density u e^{-u} (Gamma(2)): survival (1 + u) e^{-u}, close to u e^{-u} for large u
    fit = tail_slope(rng.gamma(2.0, 1.0, 400_000), (4.0, 8.0))
    assert abs(fit.rate - 1) < abs(-fit.slope - 1)


def test_tail_slope_capacity(rng):
    with pytest.raises(CapacityError):
        tail_slope(rng.normal(size=1000), (3.0, 4.0))
    with pytest.raises(DomainError):
        tail_slope(rng.normal(size=1000), (1.0, 1.0))


def test_laplace_mixture():
    assert np.all(laplace_mixture(np.zeros(5), [-1.0, 0.0, 3.0], 2.0) == 1.0)
    assert laplace_mixture([1.0], 0.0, 1.0)[0] == pytest.approx(math.exp(-1))
    with pytest.raises(DomainError):
        laplace_mixture([1.0], 0.0, 0.0)
    with pytest.raises(DomainError):
        laplace_mixture([-1.0], 0.0, 1.0)


@given(st.lists(st.floats(0, 1e6), min_size=1, max_size=20), st.floats(0.01, 100), st.integers(2, 5))
def test_laplace_mixture_monotone(Z, kappa, b):
    u = np.linspace(-3, 3, 25)
    y = laplace_mixture(Z, u, kappa, b)
    assert np.all((y >= 0) & (y <= 1))
    assert np.all(np.diff(y) >= -1e-15)


def test_fit_kappa_recovers(rng):
    Z = rng.exponential(size=2000)
    target = laplace_mixture(Z, 1.0, 3.7)[0]
    assert fit_kappa(Z, target, 1.0) == pytest.approx(3.7, rel=1e-6)


def test_dispersion(rng):
    assert dispersion([3, 3, 3, 3]) == 0.0
    assert abs(dispersion(rng.poisson(4.0, 10_000)) - 1) < 0.1
    assert dispersion(rng.poisson(rng.exponential(4.0, 10_000))) > 1.5
    with pytest.raises(DomainError):
        dispersion([1])


def test_report_pass_flag():
    r = TestReport("x", 0.5, 0.5, {"n": 3}, 7)
    assert r.passed and r.row()["pass"] and json.loads(r.row()["sizes"]) == {"n": 3}
    assert not TestReport("x", 0.6, 0.5).passed
    assert not TestReport("x", math.nan, 0.5).passed
    assert r.line().startswith("[PASS]")
