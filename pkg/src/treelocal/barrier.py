"""Gaussian-bridge ballot estimates and the Q-measure of pinned BRW paths.

Walks have Normal(0, 1/2) steps, so a bridge pinned at ``X_0 = r`` and
``X_k = u`` has the law of a standard Brownian bridge of length ``k/2``
observed at half-integer times.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Mapping, Sequence

import numpy as np

from treelocal.errors import DomainError
from treelocal.gff import brw_max_samples, centering

_STEP_SD = math.sqrt(0.5)


@dataclass(frozen=True)
class BridgePath:
    k: int
    values: np.ndarray

    @property
    def r(self) -> float:
        return float(self.values[0])

    @property
    def u(self) -> float:
        return float(self.values[-1])


@dataclass(frozen=True)
class BarrierProfile:
    """gamma(j) = a + min(j, k - j)**sigma on j = 0..k."""

    k: int
    a: float = 0.0
    sigma: float = 0.08

    def __post_init__(self) -> None:
        if self.a < 0:
            raise DomainError("a must be >= 0")
        if not 0 < self.sigma < 0.1:
            raise DomainError("sigma must lie in (0, 1/10)")

    def values(self) -> np.ndarray:
        j = np.arange(self.k + 1)
        return self.a + np.minimum(j, self.k - j).astype(float) ** self.sigma


def _barrier_array(barrier, k: int) -> np.ndarray:
    if isinstance(barrier, BarrierProfile):
        if barrier.k != k:
            raise DomainError("barrier length does not match k")
        return barrier.values()
    g = np.asarray(barrier, dtype=float)
    if g.ndim == 0:
        return np.full(k + 1, float(g))
    if g.shape != (k + 1,):
        raise DomainError("barrier must have k + 1 entries")
    return g


# -- bridges -----------------------------------------------------------------


def sample_bridge_values(k: int, r: float, u: float, size: int, rng: np.random.Generator) -> np.ndarray:
    """(size, k+1) bridges X_j = r + (j/k)(u - r) + W_j - (j/k) W_k."""
    if k < 1:
        raise DomainError("k must be >= 1")
    W = np.zeros((size, k + 1))
    W[:, 1:] = np.cumsum(_STEP_SD * rng.standard_normal((size, k)), axis=1)
    frac = np.arange(k + 1) / k
    X = r + frac * (u - r) + W - frac * W[:, -1:]
    X[:, 0] = r
    X[:, -1] = u
    return X


def sample_bridge(k: int, r: float, u: float, rng: np.random.Generator) -> BridgePath:
    return BridgePath(k, sample_bridge_values(k, r, u, 1, rng)[0])


def bridge_density(s, k: int, ell: int, r: float, u: float):
    """Density of X_ell for the bridge pinned at X_0 = r and X_k = u."""
    if not 0 < ell < k:
        raise DomainError("need 0 < ell < k")
    s = np.asarray(s, dtype=float)
    harm = 1.0 / (1.0 / ell + 1.0 / (k - ell))
    arg = (r - s) / ell + (u - s) / (k - ell)
    return math.sqrt(k / (ell * (k - ell))) / math.sqrt(math.pi) * np.exp(-harm * arg**2)


# -- ballot probabilities ------------------------------------------------------


def ballot_survivors(
    k: int,
    r: float,
    u: float,
    barriers: Sequence,
    N: int,
    rng: np.random.Generator,
    chunk: int = 1 << 18,
) -> np.ndarray:
    """Number of N bridges staying on or above each barrier at 0 < j < k.

    All barriers are evaluated on the same bridges (common random numbers),
    so pathwise orderings of barriers carry over to the counts. Bridges are
    grown one step at a time from their conditional law and dropped once
    they have crossed every barrier.
    """
    if N < 1:
        raise DomainError("N must be >= 1")
    if k < 1:
        raise DomainError("k must be >= 1")
    G = np.stack([_barrier_array(g, k) for g in barriers])
    survivors = np.zeros(len(barriers), dtype=np.int64)
    steps = np.arange(k)
    # conditional mean pull and sd for the step j -> j+1
    pull = 1.0 / (k - steps)
    sd = np.sqrt(0.5 * (k - steps - 1) / (k - steps))
    for lo in range(0, N, chunk):
        m = min(chunk, N - lo)
        x = np.full(m, float(r))
        alive = np.ones((len(barriers), m), dtype=bool)
        for j in range(k - 1):
            x = x + (u - x) * pull[j] + sd[j] * rng.standard_normal(x.size)
            alive &= x >= G[:, j + 1 : j + 2]
            any_alive = alive.any(axis=0)
            if any_alive.mean() < 0.5:
                x = x[any_alive]
                alive = alive[:, any_alive]
                if x.size == 0:
                    break
        survivors += alive.sum(axis=1)
    return survivors


def ballot_mc_many(
    k: int,
    r: float,
    u: float,
    barriers: Sequence,
    N: int,
    rng: np.random.Generator,
    chunk: int = 1 << 18,
) -> list[tuple[float, float]]:
    """(estimate, binomial standard error) of the ballot probability for each barrier."""
    p = ballot_survivors(k, r, u, barriers, N, rng, chunk) / N
    return [(float(pi), float(math.sqrt(pi * (1 - pi) / N))) for pi in p]


def ballot_mc(k: int, r: float, u: float, barrier, N: int, rng: np.random.Generator) -> tuple[float, float]:
    """(estimate, binomial standard error) for one barrier (profile, array or constant)."""
    return ballot_mc_many(k, r, u, [barrier], N, rng)[0]


def reflection_formula(k: float, r: float, u: float) -> float:
    """P(Brownian bridge of length k/2 from r to u stays >= 0) = 1 - exp(-4ru/k)."""
    if not k > 0 or r < 0 or u < 0:
        raise DomainError("need k > 0 and r, u >= 0")
    return -math.expm1(-4.0 * r * u / k)


def ballot_asymptotic(k: float, r: float, u: float) -> float:
    if k < 2:
        raise DomainError("k must be >= 2")
    return 4.0 * r * u / k


def upper_bound(k: float, r: float, u: float, c: float) -> float:
    if k < 2:
        raise DomainError("k must be >= 2")
    return c * (1.0 + r) * (1.0 + u) / k


# -- BRW maximum curves and the Q-measure ------------------------------------------


@dataclass(frozen=True)
class CdfCurve:
    """Tabulated t -> P(M'_k <= m_tilde_k + t), linear between grid points.

    Below the grid the curve is 0, above it is 1.
    """

    k: int
    tgrid: np.ndarray
    estimate: np.ndarray
    stderr: np.ndarray

    def __call__(self, t):
        out = np.interp(t, self.tgrid, self.estimate, left=0.0, right=1.0)
        return np.clip(out, 0.0, 1.0)


def cdf_curve_from_samples(k: int, centered: np.ndarray, tgrid) -> CdfCurve:
    tgrid = np.asarray(tgrid, dtype=float)
    if tgrid.ndim != 1 or tgrid.size < 2 or np.any(np.diff(tgrid) <= 0):
        raise DomainError("tgrid must be strictly increasing with >= 2 points")
    srt = np.sort(centered)
    est = np.searchsorted(srt, tgrid, side="right") / srt.size
    est = np.maximum.accumulate(est)
    se = np.sqrt(est * (1 - est) / srt.size)
    return CdfCurve(k, tgrid, est, se)


def brw_max_cdf(k: int, tgrid, N: int, rng: np.random.Generator, b: int = 2) -> CdfCurve:
    """Empirical CDF of M'_k - m_tilde_k on ``tgrid`` from N BRW replicas."""
    if not 1 <= k <= 16:
        raise DomainError("k must lie in [1, 16]")
    samples = brw_max_samples(k, True, N, rng, b=b) - centering(b, k).m_tilde_n
    return cdf_curve_from_samples(k, samples, tgrid)


def extend_curves(curves: Mapping[int, CdfCurve], n: int) -> dict[int, CdfCurve]:
    """Curves for k = 1..n, reusing the deepest available curve beyond its depth.

    M'_k - m_tilde_k converges in law, so the deepest tabulated curve stands
    in for all larger k.
    """
    if not curves:
        raise DomainError("no curves given")
    kmax = max(curves)
    missing = [k for k in range(1, min(n, kmax) + 1) if k not in curves]
    if missing:
        raise DomainError(f"curves missing for k = {missing}")
    return {k: curves[min(k, kmax)] for k in range(1, n + 1)}


def q_weights(
    n: int,
    s: float,
    u: float,
    curves: Mapping[int, Callable],
    N: int,
    rng: np.random.Generator,
    b: int = 2,
    chunk: int = 1 << 14,
) -> np.ndarray:
    """Per-path weights prod_k curve_k(m_tilde_n + s - m_tilde_k - h(x_k)) of N pinned BRW paths.

    Paths run from h(x_0) = m_tilde_n + u at the leaf 0...0 to h(x_n) = 0 at
    the root with Normal(0, 1/2) steps.
    """
    if s < u:
        raise DomainError("need s >= u")
    missing = [k for k in range(1, n + 1) if k not in curves]
    if missing:
        raise DomainError(f"curves missing for k = {missing[:5]}")
    mt = np.array([centering(b, k).m_tilde_n for k in range(1, n + 1)])
    mtn = centering(b, n).m_tilde_n
    out = np.empty(N)
    for lo in range(0, N, chunk):
        m = min(chunk, N - lo)
        X = sample_bridge_values(n, mtn + u, 0.0, m, rng)
        logw = np.zeros(m)
        for k in range(1, n + 1):
            with np.errstate(divide="ignore"):
                logw += np.log(curves[k](mtn + s - mt[k - 1] - X[:, k]))
        out[lo : lo + m] = np.exp(logw)
    return out


def q_mass_mc(
    n: int,
    s: float,
    u: float,
    curves: Mapping[int, Callable],
    N: int,
    rng: np.random.Generator,
    b: int = 2,
) -> tuple[float, float]:
    """(estimate, standard error) of the total mass of Q_{n,s,u}."""
    if N < 1:
        raise DomainError("N must be >= 1")
    w = q_weights(n, s, u, curves, N, rng, b=b)
    se = float(w.std(ddof=1) / math.sqrt(N)) if N > 1 else 0.0
    return float(w.mean()), se
