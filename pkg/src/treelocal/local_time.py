"""Local-time fields of the continuous-time simple random walk on a tree.

Three samplers live here:

* :func:`sample_root_field` draws ``L_t``, the local time when the root has
  accumulated ``t`` units, as a top-down tree-indexed Markov chain whose
  step is a compound Poisson-exponential draw;
* :func:`sample_leafstart_field` draws the local time of the walk started at
  the leaf ``0...0`` and killed at the root, by seeding independent cascades
  off a path of squared 2D Gaussian norms;
* :func:`simulate_ctmc` runs the walk itself, event by event, and serves as
  the oracle for the other two.

Every sampler has a batched ``*_values`` form returning an ``(R, V)`` array of
``R`` replicas; the single-replica forms wrap it in a :class:`LocalTimeField`.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field
from typing import Literal

import numpy as np

from treelocal.errors import DomainError
from treelocal.tree import ROOT, TreeShape, VertexRef, leaf_path

Origin = Literal["root", "leafstart", "ctmc"]
StopRule = Literal["accumulate", "hit_root", "hit_leaves"]


@dataclass(frozen=True)
class LocalTimeField:
    """Per-vertex local times in level-major order."""

    shape: TreeShape
    values: np.ndarray
    origin: Origin
    t: float | None = None
    rule: StopRule | None = None

    def __post_init__(self) -> None:
        if self.values.shape != (self.shape.num_vertices,):
            raise DomainError("values do not match the tree shape")
        if np.any(self.values < 0):
            raise DomainError("local times are nonnegative")
        self.values.setflags(write=False)

    @property
    def leaves(self) -> np.ndarray:
        return self.values[self.shape.leaf_slice]


@dataclass(frozen=True)
class PathTimes:
    """Local times T_0 = 0, T_1, ..., T_n along the path from the root to 0...0."""

    T: np.ndarray


@dataclass
class CTMCSummary:
    jumps: np.ndarray
    wall_time: float
    extra: dict = field(default_factory=dict)


# -- compound Poisson step ---------------------------------------------------


def offspring_sample(v, rng: np.random.Generator, size=None):
    """Child local time given the parent's: Exp(1) summed a Poisson(v) number of times.

    Given ``N`` the sum is Gamma(N, 1), so a single Gamma draw replaces the
    explicit sum; ``N == 0`` yields exactly 0.
    """
    v = np.asarray(v, dtype=float)
    if not np.all(np.isfinite(v)) or np.any(v < 0):
        raise DomainError("parent local time must be finite and >= 0")
    counts = rng.poisson(v, size=size)
    out = rng.standard_gamma(counts)
    if np.ndim(out) == 0:
        return float(out)
    return out


def _children_of(parent_vals: np.ndarray, b: int, rng: np.random.Generator) -> np.ndarray:
    """One level of the cascade; only nonzero parents consume randomness."""
    child = np.zeros(parent_vals.shape + (b,))
    live = parent_vals > 0
    if live.any():
        pv = np.repeat(parent_vals[live], b)
        child[live] = rng.standard_gamma(rng.poisson(pv)).reshape(-1, b)
    return child.reshape(parent_vals.shape[:-1] + (-1,))


def sample_root_values(
    shape: TreeShape,
    t: float,
    replicas: int,
    rng: np.random.Generator,
    leaves_only: bool = False,
) -> np.ndarray:
    """``replicas`` independent draws of L_t, shape (R, V) or (R, b**n)."""
    if not np.isfinite(t) or t < 0:
        raise DomainError("t must be finite and >= 0")
    level = np.full((replicas, 1), float(t))
    if leaves_only:
        for _ in range(shape.n):
            level = _children_of(level, shape.b, rng)
        return level
    out = np.empty((replicas, shape.num_vertices))
    out[:, 0] = t
    for lv in range(1, shape.n + 1):
        level = _children_of(level, shape.b, rng)
        out[:, shape.level_slice(lv)] = level
    return out


def sample_root_field(shape: TreeShape, t: float, rng: np.random.Generator) -> LocalTimeField:
    vals = sample_root_values(shape, t, 1, rng)[0]
    return LocalTimeField(shape, vals, "root", t=float(t))


# -- path times and the leaf-start field ---------------------------------------


def sample_path_times_values(n: int, replicas: int, rng: np.random.Generator) -> np.ndarray:
    """(R, n+1) array of T_k = |B_k|^2 / 2 for a standard planar Gaussian walk B."""
    if n < 1:
        raise DomainError("n must be >= 1")
    steps = rng.standard_normal((replicas, n, 2))
    B = np.cumsum(steps, axis=1)
    T = np.zeros((replicas, n + 1))
    T[:, 1:] = 0.5 * np.sum(B * B, axis=2)
    return T


def sample_path_times(n: int, rng: np.random.Generator) -> PathTimes:
    return PathTimes(sample_path_times_values(n, 1, rng)[0])


def sample_leafstart_values(
    shape: TreeShape,
    replicas: int,
    rng: np.random.Generator,
    leaves_only: bool = False,
) -> np.ndarray:
    """``replicas`` draws of the local time at the root-hitting time, walk started at 0...0.

    The path vertex at level k carries T_k; every other child is drawn from
    its parent by :func:`offspring_sample`, which realizes the independent
    cascades hanging off the path.
    """
    b, n = shape.b, shape.n
    T = sample_path_times_values(n, replicas, rng)
    level = T[:, :1].copy()
    out = None if leaves_only else np.empty((replicas, shape.num_vertices))
    if out is not None:
        out[:, 0] = T[:, 0]
    for lv in range(1, n + 1):
        level = _children_of(level, b, rng)
        level[:, 0] = T[:, lv]  # path vertex 0...0 is first in every level
        if out is not None:
            out[:, shape.level_slice(lv)] = level
    return level if leaves_only else out


def sample_leafstart_field(shape: TreeShape, rng: np.random.Generator) -> LocalTimeField:
    vals = sample_leafstart_values(shape, 1, rng)[0]
    return LocalTimeField(shape, vals, "leafstart")


# -- event-driven oracle -----------------------------------------------------


def simulate_ctmc_values(
    shape: TreeShape,
    start: VertexRef,
    rule: StopRule,
    replicas: int,
    rng: np.random.Generator,
    t: float | None = None,
) -> tuple[np.ndarray, np.ndarray]:
    """Run ``replicas`` walks in lockstep; returns (local times (R, V), jump counts (R,)).

    Holding times are Exp(degree); the next vertex is a uniform neighbour.
    ``accumulate`` stops once the root has accrued ``t`` (final sojourn
    truncated), ``hit_root`` on arrival at the root and ``hit_leaves`` on
    arrival at any leaf; no time accrues at the absorbing vertex.
    """
    b = shape.b
    s = shape.index(start)
    is_leaf_start = start.level == shape.n
    if rule == "accumulate":
        if t is None or not np.isfinite(t) or t < 0:
            raise DomainError("accumulate needs a finite t >= 0")
    elif rule == "hit_root":
        if s == 0:
            raise DomainError("hit_root requires a start other than the root")
    elif rule == "hit_leaves":
        if is_leaf_start:
            raise DomainError("hit_leaves requires a non-leaf start")
    else:
        raise DomainError(f"unknown stop rule {rule!r}")

    deg = shape.degrees
    leaf_start = shape.level_offset(shape.n)
    lt = np.zeros((replicas, shape.num_vertices))
    jumps = np.zeros(replicas, dtype=np.int64)
    cur = np.full(replicas, s, dtype=np.int64)
    ids = np.arange(replicas)
    if rule == "accumulate" and t == 0:
        return lt, jumps

    while ids.size:
        c = cur[ids]
        d = deg[c]
        hold = rng.standard_exponential(ids.size) / d
        if rule == "accumulate":
            at_root = c == 0
            room = t - lt[ids, 0]
            done = at_root & (hold >= room)
            hold = np.where(done, room, hold)
            lt[ids, c] += hold
            lt[ids[done], 0] = t
            keep = ~done
            ids, c, d = ids[keep], c[keep], d[keep]
        else:
            lt[ids, c] += hold
        # jump to a uniform neighbour: slot 0 is the parent for non-root vertices
        slot = (rng.random(ids.size) * d).astype(np.int64)
        slot = np.minimum(slot, d - 1)
        has_parent = c != 0
        to_parent = has_parent & (slot == 0)
        child_slot = np.where(has_parent, slot - 1, slot)
        nxt = np.where(to_parent, (c - 1) // b, b * c + 1 + child_slot)
        cur[ids] = nxt
        jumps[ids] += 1
        if rule == "hit_root":
            ids = ids[nxt != 0]
        elif rule == "hit_leaves":
            ids = ids[nxt < leaf_start]
    return lt, jumps


def simulate_ctmc(
    shape: TreeShape,
    start: VertexRef,
    rule: StopRule,
    rng: np.random.Generator,
    t: float | None = None,
) -> tuple[LocalTimeField, CTMCSummary]:
    t0 = time.perf_counter()
    lt, jumps = simulate_ctmc_values(shape, start, rule, 1, rng, t=t)
    summary = CTMCSummary(jumps=jumps, wall_time=time.perf_counter() - t0)
    return LocalTimeField(shape, lt[0], "ctmc", t=t, rule=rule), summary


def leaf_hit_probability(shape: TreeShape, t: float, replicas: int, rng: np.random.Generator) -> float:
    """Fraction of root-started walks that reach a leaf before the root accrues ``t``."""
    lt, _ = simulate_ctmc_values(shape, ROOT, "accumulate", replicas, rng, t=t)
    return float(np.mean(lt[:, shape.leaf_slice].max(axis=1) > 0))


def path_vertices(shape: TreeShape) -> np.ndarray:
    """Flat indices of the path root = x_0, ..., x_n = 0...0."""
    return leaf_path(shape, 0)
