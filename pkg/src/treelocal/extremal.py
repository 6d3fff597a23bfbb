"""Extremal structure of sampled fields.

All functions take leaf values in leaf-index order (which is increasing
``theta`` order). Local-time fields are compared on the square-root scale;
callers pass ``sqrt(L)`` where a comparison scale is expected.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Literal

import numpy as np

from treelocal.errors import DomainError, NoMaximizerError
from treelocal.local_time import LocalTimeField
from treelocal.tree import TreeShape, canopy_leaves

Mode = Literal["leafstart", "root", "subtree"]


@dataclass(frozen=True)
class ExtremalSample:
    """Points of the structured extremal process for one replica (or a stack of them).

    ``profile[i, j]`` is the value at the local maximum minus the value at
    canopy position ``j`` relative to it.
    """

    theta: np.ndarray
    height: np.ndarray
    profile: np.ndarray
    replica: np.ndarray
    meta: dict = field(default_factory=dict)

    def __len__(self) -> int:
        return len(self.theta)

    @property
    def points(self) -> list[tuple[float, float, np.ndarray]]:
        return [(float(a), float(b), p) for a, b, p in zip(self.theta, self.height, self.profile)]


@dataclass(frozen=True)
class WeightedMeasure:
    locations: np.ndarray
    masses: np.ndarray

    @property
    def total(self) -> float:
        return float(np.sum(self.masses))

    def __len__(self) -> int:
        return len(self.masses)


def _check_leaves(shape: TreeShape, leafvalues: np.ndarray) -> np.ndarray:
    v = np.asarray(leafvalues, dtype=float)
    if v.shape[-1] != shape.num_leaves:
        raise DomainError(f"expected {shape.num_leaves} leaf values, got {v.shape[-1]}")
    return v


def level_set(leafvalues, threshold: float) -> np.ndarray:
    """Leaf indices with value >= threshold, in increasing theta order."""
    return np.flatnonzero(np.asarray(leafvalues) >= threshold)


def k_local_max_mask(shape: TreeShape, leafvalues, k: int) -> np.ndarray:
    """Boolean mask of k-local maxima; works on (..., b**n) stacks. Ties count."""
    v = _check_leaves(shape, leafvalues)
    if not 0 <= k <= shape.n:
        raise DomainError(f"k must lie in [0, {shape.n}]")
    blocks = v.reshape(v.shape[:-1] + (-1, shape.b**k))
    return (blocks == blocks.max(axis=-1, keepdims=True)).reshape(v.shape)


def is_k_local_max(shape: TreeShape, leafvalues, x: int, k: int) -> bool:
    v = _check_leaves(shape, leafvalues)
    if not 0 <= k <= shape.n:
        raise DomainError(f"k must lie in [0, {shape.n}]")
    w = shape.b**k
    lo = (x // w) * w
    return bool(v[x] >= v[lo : lo + w].max())


def default_floor(n: int) -> float:
    return -(5.0 + math.log(n))


def extract_structured(
    shape: TreeShape,
    leafvalues,
    k: int,
    centering: float,
    floor: float | None = None,
    r: int | None = None,
    origin: str = "",
) -> ExtremalSample:
    """Structured extremal points of one field or a (R, b**n) stack of fields.

    One point per k-local maximum whose centered height is at least
    ``floor``; profiles list the first ``r`` canopy differences (default
    ``r = b**k``, the ball of the local maximum).
    """
    v = _check_leaves(shape, leafvalues)
    stack = np.atleast_2d(v)
    if floor is None:
        floor = default_floor(shape.n)
    if r is None:
        r = shape.b**k
    if not 1 <= r <= shape.num_leaves:
        raise DomainError("profile length must lie in [1, b**n]")
    mask = k_local_max_mask(shape, stack, k) & (stack - centering >= floor)
    rep, leaf = np.nonzero(mask)
    nbrs = canopy_leaves(shape, leaf, np.arange(r))
    top = stack[rep, leaf]
    profile = top[:, None] - stack[rep[:, None], nbrs]
    meta = dict(n=shape.n, b=shape.b, k=k, r=r, centering=float(centering), floor=float(floor), origin=origin)
    return ExtremalSample(
        theta=leaf / float(shape.num_leaves),
        height=top - centering,
        profile=profile,
        replica=rep,
        meta=meta,
    )


# -- intensity measures ------------------------------------------------------


def leaf_intensity_weights(v, n: int, b: int) -> np.ndarray:
    """b^-2n (n sqrt(log b) - sqrt v)^+ v^(1/4) exp(2 sqrt(log b) sqrt v), elementwise."""
    v = np.asarray(v, dtype=float)
    s = math.sqrt(math.log(b))
    rv = np.sqrt(v)
    return float(b) ** (-2 * n) * np.maximum(n * s - rv, 0.0) * v**0.25 * np.exp(2 * s * rv)


def subtree_intensity_weights(v, k: int, b: int) -> np.ndarray:
    """The level-k weight, with the logarithmic correction and truncation at one."""
    v = np.asarray(v, dtype=float)
    s = math.sqrt(math.log(b))
    v1 = np.maximum(v, 1.0)
    rv = np.sqrt(v)
    pos = np.maximum(s * k - rv - np.log(v1) / (8 * s), 0.0)
    return float(b) ** (-2 * k) * pos * v1**0.25 * np.exp(2 * s * rv)


_MODE_ORIGINS = {
    "leafstart": {("leafstart", None), ("ctmc", "hit_root")},
    "root": {("root", None), ("ctmc", "accumulate")},
    "subtree": {("root", None), ("ctmc", "accumulate")},
}


def intensity_estimate(field: LocalTimeField, mode: Mode, C: float = 1.0, k: int | None = None) -> WeightedMeasure:
    """Weighted point measure estimating the intensity measure of the extremes."""
    if mode not in _MODE_ORIGINS:
        raise DomainError(f"unknown mode {mode!r}")
    if (field.origin, field.rule) not in _MODE_ORIGINS[mode]:
        raise DomainError(f"mode {mode!r} does not match a field of origin {field.origin!r}")
    if not C > 0:
        raise DomainError("normalization must be positive")
    shape = field.shape
    if mode == "subtree":
        if k is None or not 1 <= k <= shape.n:
            raise DomainError("subtree mode needs 1 <= k <= n")
        vals = field.values[shape.level_slice(k)]
        w = C * subtree_intensity_weights(vals, k, shape.b)
        loc = np.arange(shape.b**k) / float(shape.b**k)
    else:
        w = C * leaf_intensity_weights(field.leaves, shape.n, shape.b)
        loc = shape.leaf_thetas
    keep = w > 0
    return WeightedMeasure(loc[keep], w[keep])


def intensity_totals(shape: TreeShape, leaf_local_times: np.ndarray, C: float = 1.0) -> np.ndarray:
    """Total mass of the leaf-level estimator for a (R, b**n) stack of local times."""
    return C * leaf_intensity_weights(leaf_local_times, shape.n, shape.b).sum(axis=-1)


# -- maximizer, gaps and clustering ------------------------------------------


def maximizer_location(shape: TreeShape, leafvalues, require_positive: bool = True) -> tuple[float, int | None]:
    """theta of the (first) maximizer and the scale j with theta in [b^-(j+1), b^-j).

    The scale is None when the maximizer is 0...0.
    """
    v = _check_leaves(shape, leafvalues)
    idx = int(np.argmax(v))
    if require_positive and not v[idx] > 0:
        raise NoMaximizerError("the field vanishes on all leaves")
    if idx == 0:
        return 0.0, None
    digits = 1
    while idx >= shape.b**digits:
        digits += 1
    return idx / float(shape.num_leaves), shape.n - digits


def maximizer_scales(shape: TreeShape, leafvalues: np.ndarray) -> np.ndarray:
    """Vectorized scale index for a (R, b**n) stack; -1 encodes the leaf 0...0."""
    idx = np.argmax(np.atleast_2d(leafvalues), axis=1)
    out = np.full(idx.shape, -1, dtype=np.int64)
    pos = idx > 0
    ndig = np.floor(np.log(np.where(pos, idx, 1)) / math.log(shape.b)).astype(np.int64) + 1
    # guard against rounding in the logarithm
    ndig = np.where(shape.b**ndig <= idx, ndig + 1, ndig)
    ndig = np.where(shape.b ** (ndig - 1) > idx, ndig - 1, ndig)
    out[pos] = shape.n - ndig[pos]
    return out


def gap_statistic(shape: TreeShape, leafvalues, x: int, k: int) -> float:
    """Largest minus second-largest value over the k-ball of leaf x."""
    if k < 1:
        raise DomainError("the gap needs k >= 1")
    v = _check_leaves(shape, leafvalues)
    w = shape.b**k
    lo = (x // w) * w
    top2 = np.partition(v[lo : lo + w], w - 2)[w - 2 :]
    return float(top2[1] - top2[0])


def intermediate_pair_event(shape: TreeShape, leafvalues: np.ndarray, threshold: float, lo: int, hi: int) -> np.ndarray:
    """Per replica: do two leaves above ``threshold`` sit at ball distance in [lo, hi]?

    The ball distance of x and y is the least j with y in the j-ball of x.
    """
    if not 1 <= lo <= hi <= shape.n:
        raise DomainError("need 1 <= lo <= hi <= n")
    v = np.atleast_2d(_check_leaves(shape, leafvalues))
    member = v >= threshold
    sub = np.arange(shape.num_leaves) // shape.b ** (lo - 1)
    sub = np.broadcast_to(sub, v.shape).reshape(v.shape[0], -1, shape.b**hi)
    m = member.reshape(sub.shape)
    big = np.iinfo(np.int64).max
    mn = np.where(m, sub, big).min(axis=-1)
    mx = np.where(m, sub, -1).max(axis=-1)
    return np.any(m.any(axis=-1) & (mx > mn), axis=-1)
