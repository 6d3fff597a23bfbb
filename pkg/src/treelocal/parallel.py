"""Reproducible random streams and a block-parallel map.

Replicas are grouped into fixed-size blocks. Block ``i`` of stream ``s``
draws from ``SeedSequence(seed, spawn_key=(s, i))``, so results depend on
(seed, stream, block size) and never on how blocks are scheduled.
"""

from __future__ import annotations

from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from typing import Any, Callable, Iterable, Sequence

import numpy as np

from treelocal.errors import DomainError


def block_rng(seed: int, stream: int, block: int) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(seed, spawn_key=(stream, block))))


def block_sizes(replicas: int, block: int) -> list[int]:
    if replicas < 1 or block < 1:
        raise DomainError("replicas and block size must be >= 1")
    full, rest = divmod(replicas, block)
    return [block] * full + ([rest] if rest else [])


@dataclass(frozen=True)
class Task:
    seed: int
    stream: int
    block: int
    size: int
    offset: int

    def rng(self) -> np.random.Generator:
        return block_rng(self.seed, self.stream, self.block)


def tasks(seed: int, stream: int, replicas: int, block: int) -> list[Task]:
    out, offset = [], 0
    for i, size in enumerate(block_sizes(replicas, block)):
        out.append(Task(seed, stream, i, size, offset))
        offset += size
    return out


def _call(args):
    fn, task, extra = args
    return fn(task, *extra)


class Pool:
    """Ordered map over tasks; serial when ``workers <= 1``."""

    def __init__(self, workers: int = 1):
        if workers < 1:
            raise DomainError("workers must be >= 1")
        self.workers = workers
        self._ex: ProcessPoolExecutor | None = None

    def __enter__(self) -> Pool:
        if self.workers > 1:
            self._ex = ProcessPoolExecutor(max_workers=self.workers)
        return self

    def __exit__(self, *exc) -> None:
        if self._ex is not None:
            self._ex.shutdown()
            self._ex = None

    def map(self, fn: Callable[..., Any], items: Iterable[Task], *extra) -> list:
        jobs = [(fn, t, extra) for t in items]
        if self._ex is None:
            return [_call(j) for j in jobs]
        return list(self._ex.map(_call, jobs))


def concat(parts: Sequence[np.ndarray]) -> np.ndarray:
    return np.concatenate(parts) if parts else np.empty(0)
