"""Deterministic parallel map over independent work items.

Results always come back in input order, so output artifacts are
byte-identical no matter how many workers ran.  Worker count resolves
from the explicit argument, then the ANISOFRAC_THREADS environment
variable, then 1.
"""

from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor
from typing import Callable, Sequence, TypeVar

T = TypeVar("T")
R = TypeVar("R")


def resolve_threads(threads: int | None = None) -> int:
    if threads is not None:
        return max(1, int(threads))
    env = os.environ.get("ANISOFRAC_THREADS", "").strip()
    if env:
        return max(1, int(env))
    return 1


def pmap(fn: Callable[[T], R], items: Sequence[T], threads: int | None = None) -> list[R]:
    k = resolve_threads(threads)
    if k == 1 or len(items) <= 1:
        return [fn(it) for it in items]
    with ThreadPoolExecutor(max_workers=k) as pool:
        return list(pool.map(fn, items))
