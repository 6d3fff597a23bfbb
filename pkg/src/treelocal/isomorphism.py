"""Pointwise Ray-Knight coupling of local time and the Gaussian free field.

Given independent ``(L, h)`` the coupling builds a second field ``h_tilde``
that agrees with ``h`` above level ``n - k`` and satisfies, below each
level-``(n - k)`` vertex ``z``,

    L(x) + (h(x) - h(z))**2 == (h_tilde(x) - h_tilde(z) + sqrt(L(z)))**2.

Only the signs of ``h_tilde(x) - h_tilde(z) + sqrt(L(z))`` are random. They
are drawn from the conditional law of the signs of a GFF shifted by
``sqrt(L(z))`` given its absolute values, which is proportional to
``prod_edges phi(s_x y_x - s_p y_p)`` with ``phi`` the Normal(0, 1/2)
density. The sampler is an exact upward/downward pass in the log domain.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy.special import expit

from treelocal.errors import CapacityError, DomainError
from treelocal.gff import GaussianField
from treelocal.local_time import LocalTimeField
from treelocal.tree import TreeShape, subtree_index_map

TINY = 1e-300
MAX_ENUM_VERTICES = 16


@dataclass(frozen=True)
class SignConfig:
    signs: np.ndarray

    def __post_init__(self) -> None:
        if self.signs[0] != 1:
            raise DomainError("the subtree root carries sign +1")


@dataclass(frozen=True)
class CoupledTriple:
    L: LocalTimeField
    h: GaussianField
    h_tilde: GaussianField
    k: int
    signs: np.ndarray  # per-vertex signs, +1 on the top part of the tree


class _Layout:
    """Depth groups of a rooted tree given by a parent array with parents[i] < i."""

    def __init__(self, parents: tuple[int, ...]):
        par = np.asarray(parents, dtype=np.int64)
        if par.size == 0 or par[0] != -1:
            raise DomainError("vertex 0 must be the root (parent -1)")
        if np.any(par[1:] < 0) or np.any(par[1:] >= np.arange(1, par.size)):
            raise DomainError("parents must precede their children")
        depth = np.zeros(par.size, dtype=np.int64)
        for i in range(1, par.size):
            depth[i] = depth[par[i]] + 1
        self.size = par.size
        self.groups = []
        for d in range(1, int(depth.max(initial=0)) + 1):
            idx = np.flatnonzero(depth == d)
            idx = idx[np.argsort(par[idx], kind="stable")]
            p = par[idx]
            starts = np.flatnonzero(np.r_[True, p[1:] != p[:-1]])
            self.groups.append((idx, p, starts, p[starts]))


@lru_cache(maxsize=64)
def _layout(parents: tuple[int, ...]) -> _Layout:
    return _Layout(parents)


def _as_parents(parents) -> tuple[int, ...]:
    if isinstance(parents, TreeShape):
        parents = parents.parents
    return tuple(int(p) for p in parents)


def sample_signs_batch(parents, y: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    """Draw sign configurations for a batch of absolute-value vectors.

    ``y`` has shape (B, V) with the subtree root in column 0; returns an
    int8 array of the same shape. Vertices with ``y == 0`` get sign +1.
    """
    lay = _layout(_as_parents(parents))
    y = np.asarray(y, dtype=float)
    if y.ndim != 2 or y.shape[1] != lay.size:
        raise DomainError("y must have shape (batch, vertices)")
    if np.any(y < 0):
        raise DomainError("absolute values must be >= 0")
    B = y.shape[0]
    cp = np.zeros_like(y)  # summed child messages, own sign +1
    cm = np.zeros_like(y)  # same, own sign -1
    for idx, p, starts, up in reversed(lay.groups):
        yx, yp = y[:, idx], y[:, p]
        same = -((yx - yp) ** 2)
        flip = -((yx + yp) ** 2)
        msg_p = np.logaddexp(same + cp[:, idx], flip + cm[:, idx])
        msg_m = np.logaddexp(flip + cp[:, idx], same + cm[:, idx])
        cp[:, up] += np.add.reduceat(msg_p, starts, axis=1)
        cm[:, up] += np.add.reduceat(msg_m, starts, axis=1)
    sig = np.ones((B, lay.size), dtype=np.int8)
    for idx, p, _, _ in lay.groups:
        yx, yp = y[:, idx], y[:, p]
        s = sig[:, p]
        prob_plus = expit(4.0 * s * yx * yp + cp[:, idx] - cm[:, idx])
        draw = np.where(rng.random(prob_plus.shape) < prob_plus, 1, -1).astype(np.int8)
        draw[yx == 0] = 1
        sig[:, idx] = draw
    return sig


def sample_signs(parents, y, rootvalue: float, rng: np.random.Generator) -> SignConfig:
    y = np.asarray(y, dtype=float)
    if not np.isclose(y[0], rootvalue, rtol=1e-12, atol=0.0):
        raise DomainError("y at the root must equal rootvalue")
    return SignConfig(sample_signs_batch(parents, y[None, :], rng)[0])


def enumerate_sign_law(parents, y, rootvalue: float) -> tuple[np.ndarray, np.ndarray]:
    """Exact law of the sign configuration by brute-force enumeration.

    Returns ``(configs, probs)`` with configs of shape (m, V). Configurations
    that differ only at vertices with ``y == 0`` are merged under sign +1.
    """
    par = np.asarray(_as_parents(parents), dtype=np.int64)
    V = par.size
    if V > MAX_ENUM_VERTICES:
        raise CapacityError(f"enumeration limited to {MAX_ENUM_VERTICES} vertices, got {V}")
    y = np.asarray(y, dtype=float)
    if np.any(y < 0):
        raise DomainError("absolute values must be >= 0")
    if not np.isclose(y[0], rootvalue, rtol=1e-12, atol=0.0):
        raise DomainError("y at the root must equal rootvalue")
    configs = np.array(list(itertools.product((1, -1), repeat=V - 1)), dtype=np.int8).reshape(-1, V - 1)
    configs = np.hstack([np.ones((configs.shape[0], 1), dtype=np.int8), configs])
    g = configs * y
    logw = -np.sum((g[:, 1:] - g[:, par[1:]]) ** 2, axis=1)
    w = np.exp(logw - logw.max())
    configs[:, y == 0] = 1
    uniq, inv = np.unique(configs, axis=0, return_inverse=True)
    probs = np.bincount(inv.ravel(), weights=w, minlength=uniq.shape[0])
    return uniq, probs / probs.sum()


def sign_law_tv(samples: np.ndarray, configs: np.ndarray, probs: np.ndarray) -> float:
    """Total-variation distance between sampled configurations and an exact table."""
    V = configs.shape[1]
    weights = 2 ** np.arange(V - 1, -1, -1)
    code_exact = ((configs < 0).astype(np.int64) @ weights)
    code_samp = ((np.asarray(samples) < 0).astype(np.int64) @ weights)
    emp = np.bincount(code_samp, minlength=2**V) / len(code_samp)
    exact = np.zeros(2**V)
    exact[code_exact] = probs
    return 0.5 * float(np.abs(emp - exact).sum())


# -- the coupling ------------------------------------------------------------


def couple_values(
    shape: TreeShape,
    L: np.ndarray,
    h: np.ndarray,
    k: int,
    rng: np.random.Generator,
) -> tuple[np.ndarray, np.ndarray]:
    """Batched coupling: returns (h_tilde, signs), both of shape (R, V)."""
    L = np.atleast_2d(L)
    h = np.atleast_2d(h)
    if L.shape != h.shape or L.shape[1] != shape.num_vertices:
        raise DomainError("L and h must share the tree shape")
    if not 1 <= k <= shape.n:
        raise DomainError(f"k must lie in [1, {shape.n}]")
    R = L.shape[0]
    top = shape.n - k
    M = subtree_index_map(shape, top)
    nz, sv = M.shape
    root_L = L[:, M[:, 0]]
    root_h = h[:, M[:, 0]]
    rl = np.sqrt(root_L)
    d = h[:, M] - root_h[:, :, None]
    y = np.hypot(np.sqrt(L[:, M]), d)
    y[:, :, 0] = rl
    y[y < TINY] = 0.0
    sig = sample_signs_batch(TreeShape(shape.b, k), y.reshape(R * nz, sv), rng).reshape(R, nz, sv)
    h_tilde = h.copy()
    below = M[:, 1:]
    h_tilde[:, below] = (root_h - rl)[:, :, None] + sig[:, :, 1:] * y[:, :, 1:]
    signs = np.ones((R, shape.num_vertices), dtype=np.int8)
    signs[:, below] = sig[:, :, 1:]
    return h_tilde, signs


def couple(L: LocalTimeField, h: GaussianField, k: int, rng: np.random.Generator) -> CoupledTriple:
    if L.shape != h.shape:
        raise DomainError("L and h must share the tree shape")
    if L.origin not in ("root", "ctmc"):
        raise DomainError("the coupling takes a root-started local time")
    ht, sig = couple_values(L.shape, L.values[None, :], h.values[None, :], k, rng)
    return CoupledTriple(L, h, GaussianField(L.shape, ht[0]), k, sig[0])


def coupling_residual(shape: TreeShape, L: np.ndarray, h: np.ndarray, h_tilde: np.ndarray, k: int) -> np.ndarray:
    """Per-replica maximum relative residual of the coupling identity.

    Residuals are relative to ``max(lhs, rhs, 1)``: below unit scale the
    rounding of ``h_tilde`` itself is absolute, not relative.
    """
    L, h, h_tilde = (np.atleast_2d(a) for a in (L, h, h_tilde))
    M = subtree_index_map(shape, shape.n - k)
    z = M[:, :1]
    x = M[:, 1:]
    lhs = L[:, x] + (h[:, x] - h[:, z]) ** 2
    rhs = (h_tilde[:, x] - h_tilde[:, z] + np.sqrt(L[:, z])) ** 2
    rel = np.abs(lhs - rhs) / np.maximum(np.maximum(lhs, rhs), 1.0)
    return rel.reshape(rel.shape[0], -1).max(axis=1)
