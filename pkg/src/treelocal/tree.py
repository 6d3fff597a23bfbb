"""Regular rooted trees: vertex addressing, leaf encodings and ball geometry.

Vertices are stored level-major: the root has flat index 0, level ``l``
occupies the contiguous block starting at ``(b**l - 1) // (b - 1)`` and,
within a level, vertices are in lexicographic order of their digit strings.
The children of flat index ``i`` are ``b*i + 1, ..., b*i + b``.

Leaves are identified across the package by their *leaf index*, i.e. the
position within the leaf level, which equals the base-``b`` value of the
digit string.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property
from typing import Iterable, Sequence

import numpy as np

from treelocal.errors import DomainError


@dataclass(frozen=True)
class VertexRef:
    """A vertex given by its digit string; the empty string is the root."""

    digits: tuple[int, ...] = ()

    def __post_init__(self) -> None:
        object.__setattr__(self, "digits", tuple(int(d) for d in self.digits))

    @property
    def level(self) -> int:
        return len(self.digits)

    @property
    def parent(self) -> VertexRef:
        if not self.digits:
            raise DomainError("the root has no parent")
        return VertexRef(self.digits[:-1])


ROOT = VertexRef(())


@dataclass(frozen=True)
class TreeShape:
    """The regular rooted tree of forward degree ``b`` and depth ``n``."""

    b: int
    n: int

    def __post_init__(self) -> None:
        if int(self.b) != self.b or self.b < 2:
            raise DomainError(f"branching factor must be an integer >= 2, got {self.b}")
        if int(self.n) != self.n or self.n < 1:
            raise DomainError(f"depth must be an integer >= 1, got {self.n}")

    # -- sizes -----------------------------------------------------------
    @property
    def num_vertices(self) -> int:
        return (self.b ** (self.n + 1) - 1) // (self.b - 1)

    @property
    def num_leaves(self) -> int:
        return self.b**self.n

    def level_offset(self, level: int) -> int:
        return (self.b**level - 1) // (self.b - 1)

    def level_slice(self, level: int) -> slice:
        start = self.level_offset(level)
        return slice(start, start + self.b**level)

    @property
    def leaf_slice(self) -> slice:
        return self.level_slice(self.n)

    # -- flat index arithmetic -------------------------------------------
    def index(self, x: VertexRef) -> int:
        self._check(x)
        pos = 0
        for d in x.digits:
            pos = pos * self.b + d
        return self.level_offset(x.level) + pos

    def vertex(self, index: int) -> VertexRef:
        if not 0 <= index < self.num_vertices:
            raise DomainError(f"vertex index {index} out of range")
        level = int(self.levels[index])
        pos = index - self.level_offset(level)
        return VertexRef(_digits(pos, self.b, level))

    def leaf(self, leaf_index: int) -> VertexRef:
        if not 0 <= leaf_index < self.num_leaves:
            raise DomainError(f"leaf index {leaf_index} out of range")
        return VertexRef(_digits(leaf_index, self.b, self.n))

    def leaf_index(self, x: VertexRef) -> int:
        if x.level != self.n:
            raise DomainError("not a leaf")
        return self.index(x) - self.level_offset(self.n)

    @cached_property
    def parents(self) -> np.ndarray:
        """Parent flat index per vertex, -1 for the root."""
        p = (np.arange(self.num_vertices) - 1) // self.b
        p[0] = -1
        return p

    @cached_property
    def levels(self) -> np.ndarray:
        out = np.empty(self.num_vertices, dtype=np.int64)
        for level in range(self.n + 1):
            out[self.level_slice(level)] = level
        return out

    @cached_property
    def degrees(self) -> np.ndarray:
        deg = np.full(self.num_vertices, self.b + 1, dtype=np.int64)
        deg[0] = self.b
        deg[self.leaf_slice] = 1
        return deg

    @cached_property
    def leaf_digits(self) -> np.ndarray:
        """(b**n, n) array of leaf digit strings in leaf-index order."""
        idx = np.arange(self.num_leaves)
        powers = self.b ** np.arange(self.n - 1, -1, -1)
        return (idx[:, None] // powers[None, :]) % self.b

    @cached_property
    def leaf_thetas(self) -> np.ndarray:
        return np.arange(self.num_leaves) / float(self.num_leaves)

    def _check(self, x: VertexRef) -> None:
        if x.level > self.n:
            raise DomainError(f"vertex at level {x.level} exceeds depth {self.n}")
        if any(d < 0 or d >= self.b for d in x.digits):
            raise DomainError(f"digits must lie in 0..{self.b - 1}")


def _digits(pos: int, b: int, length: int) -> tuple[int, ...]:
    out = []
    for _ in range(length):
        pos, d = divmod(pos, b)
        out.append(d)
    return tuple(reversed(out))


def theta(x: VertexRef, shape: TreeShape) -> float:
    """Position of leaf ``x`` in [0, 1): sum of x_i * b**-i."""
    shape._check(x)
    if x.level != shape.n:
        raise DomainError("theta is defined on leaves only")
    return sum(d * float(shape.b) ** -(i + 1) for i, d in enumerate(x.digits))


def ancestor(x: VertexRef, k: int) -> VertexRef:
    """The k-th generation ancestor; ``ancestor(x, 0) == x``."""
    if k < 0 or k > x.level:
        raise DomainError(f"cannot go up {k} generations from level {x.level}")
    return VertexRef(x.digits[: x.level - k])


def ball_leaves(x: VertexRef, k: int, shape: TreeShape) -> set[VertexRef]:
    """Leaves within graph distance 2k of leaf ``x``."""
    if x.level != shape.n:
        raise DomainError("ball_leaves expects a leaf")
    if not 0 <= k <= shape.n:
        raise DomainError(f"k must lie in [0, {shape.n}]")
    top = ancestor(x, k).digits
    tails = np.arange(shape.b**k)
    return {VertexRef(top + _digits(int(j), shape.b, k)) for j in tails}


def canopy_index(x: VertexRef, y: VertexRef, shape: TreeShape) -> int:
    """Canopy embedding of leaf ``y`` relative to leaf ``x``."""
    if x.level != shape.n or y.level != shape.n:
        raise DomainError("canopy_index expects two leaves of the same tree")
    shape._check(x)
    shape._check(y)
    out = 0
    for xk, yk in zip(x.digits, y.digits):
        out = out * shape.b + (yk - xk) % shape.b
    return out


# -- vectorized views on leaf indices ----------------------------------------


def canopy_leaves(shape: TreeShape, leaf: int | np.ndarray, positions: Iterable[int] | np.ndarray) -> np.ndarray:
    """Leaf indices at the given canopy positions relative to ``leaf``.

    Broadcasts: for an array of leaves of shape ``S`` and ``r`` positions the
    result has shape ``S + (r,)``.
    """
    b, n = shape.b, shape.n
    leaf = np.asarray(leaf, dtype=np.int64)
    pos = np.asarray(list(positions) if not isinstance(positions, np.ndarray) else positions, dtype=np.int64)
    if pos.size and (pos.min() < 0 or pos.max() >= shape.num_leaves):
        raise DomainError("canopy position out of range")
    if b == 2:
        return leaf[..., None] ^ pos
    powers = b ** np.arange(n - 1, -1, -1, dtype=np.int64)
    xd = (leaf[..., None] // powers) % b  # S + (n,)
    jd = (pos[:, None] // powers) % b  # (r, n)
    yd = (xd[..., None, :] + jd) % b
    return yd @ powers


def ball_distance(shape: TreeShape, i: int | np.ndarray, j: int | np.ndarray) -> np.ndarray:
    """Smallest k with leaf j in the k-ball of leaf i (n minus the level of the common ancestor)."""
    a, c = np.broadcast_arrays(np.asarray(i, dtype=np.int64), np.asarray(j, dtype=np.int64))
    a = a.copy()
    c = c.copy()
    out = np.zeros(a.shape, dtype=np.int64)
    for _ in range(shape.n):
        out += a != c
        a //= shape.b
        c //= shape.b
    return out


def subtree_index_map(shape: TreeShape, top_level: int) -> np.ndarray:
    """Flat indices of every depth-(n - top_level) subtree hanging at ``top_level``.

    Row ``q`` lists the vertices of the subtree rooted at the ``q``-th vertex
    of level ``top_level``, in the subtree's own level-major order.
    """
    if not 0 <= top_level <= shape.n:
        raise DomainError("top_level out of range")
    depth = shape.n - top_level
    sub = TreeShape(shape.b, depth) if depth >= 1 else None
    roots = np.arange(shape.b**top_level)
    cols = []
    for j in range(depth + 1):
        within = np.arange(shape.b**j)
        cols.append(shape.level_offset(top_level + j) + roots[:, None] * shape.b**j + within[None, :])
    out = np.concatenate(cols, axis=1)
    if sub is not None:
        assert out.shape[1] == sub.num_vertices
    return out


def leaf_path(shape: TreeShape, leaf: int = 0) -> np.ndarray:
    """Flat indices x_0 = root, ..., x_n = leaf along the root-to-leaf path."""
    out = np.empty(shape.n + 1, dtype=np.int64)
    v = shape.level_offset(shape.n) + leaf
    for level in range(shape.n, -1, -1):
        out[level] = v
        v = (v - 1) // shape.b
    return out


def sequence_to_leaves(seq: Sequence[VertexRef], shape: TreeShape) -> np.ndarray:
    return np.array([shape.leaf_index(x) for x in seq], dtype=np.int64)
