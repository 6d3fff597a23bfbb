"""Gaussian free field / branching random walk on the regular tree.

The field is zero at the root and every edge carries an independent
Normal(0, 1/2) increment. Read generation by generation it is the branching
random walk with ``b`` i.i.d. Normal(0, 1/2) displacements per particle, so a
single sampler serves both.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from treelocal.errors import DomainError
from treelocal.tree import TreeShape

EDGE_VARIANCE = 0.5
_EDGE_SD = math.sqrt(EDGE_VARIANCE)


@dataclass(frozen=True)
class GaussianField:
    shape: TreeShape
    values: np.ndarray

    def __post_init__(self) -> None:
        if self.values.shape != (self.shape.num_vertices,):
            raise DomainError("values do not match the tree shape")
        if self.values[0] != 0.0:
            raise DomainError("the field vanishes at the root")
        self.values.setflags(write=False)

    @property
    def leaves(self) -> np.ndarray:
        return self.values[self.shape.leaf_slice]


@dataclass(frozen=True)
class CenteringConstants:
    b: int
    n: int
    m_n: float
    m_tilde_n: float
    t: float | None = None
    a_n: float | None = None


def centering(b: int, n: int, t: float | None = None) -> CenteringConstants:
    """Centering sequences for local-time and BRW extremes (natural logarithms).

    ``m_n`` centers the maximum of the square-root local time, ``a_n(t)`` its
    root-started version at fixed ``t`` (to which ``sqrt(t)`` is added) and
    ``m_tilde_n`` the BRW maximum.
    """
    if b < 2 or n < 1:
        raise DomainError("need b >= 2 and n >= 1")
    s = math.sqrt(math.log(b))
    m_n = s * n - math.log(n) / s
    mt = s * n - 0.75 / s * math.log(n)
    a_n = None
    if t is not None:
        if not t > 0:
            raise DomainError("a_n(t) needs t > 0")
        rt = math.sqrt(t)
        a_n = mt - 0.25 / s * math.log((n + rt) / rt)
    return CenteringConstants(b, n, m_n, mt, None if t is None else float(t), a_n)


def sample_gff_values(
    shape: TreeShape,
    replicas: int,
    rng: np.random.Generator,
    leaves_only: bool = False,
) -> np.ndarray:
    """(R, V) field draws, or (R, b**n) leaf values when ``leaves_only``."""
    b = shape.b
    level = np.zeros((replicas, 1))
    out = None if leaves_only else np.zeros((replicas, shape.num_vertices))
    for lv in range(1, shape.n + 1):
        level = np.repeat(level, b, axis=1)
        level += _EDGE_SD * rng.standard_normal(level.shape)
        if out is not None:
            out[:, shape.level_slice(lv)] = level
    return level if leaves_only else out


def sample_gff(shape: TreeShape, rng: np.random.Generator) -> GaussianField:
    return GaussianField(shape, sample_gff_values(shape, 1, rng)[0])


def brw_max_pairs(
    k: int,
    replicas: int,
    rng: np.random.Generator,
    b: int = 2,
    block: int | None = None,
) -> tuple[np.ndarray, np.ndarray]:
    """Return (M_k, M'_k) on shared replicas.

    ``M'_k`` is the maximum over leaves with theta >= 1/b, i.e. outside the
    subtree of the first child of the root.
    """
    if k < 1:
        raise DomainError("k must be >= 1")
    shape = TreeShape(b, k)
    if block is None:
        block = max(1, (1 << 22) // shape.num_leaves)
    full = np.empty(replicas)
    restricted = np.empty(replicas)
    cut = shape.num_leaves // b
    for lo in range(0, replicas, block):
        hi = min(replicas, lo + block)
        leaves = sample_gff_values(shape, hi - lo, rng, leaves_only=True)
        restricted[lo:hi] = leaves[:, cut:].max(axis=1)
        full[lo:hi] = np.maximum(restricted[lo:hi], leaves[:, :cut].max(axis=1))
    return full, restricted


def brw_max_samples(
    k: int,
    restrict: bool,
    replicas: int,
    rng: np.random.Generator,
    b: int = 2,
) -> np.ndarray:
    """Independent samples of M_k (``restrict=False``) or M'_k (``restrict=True``)."""
    full, restricted = brw_max_pairs(k, replicas, rng, b=b)
    return restricted if restrict else full
