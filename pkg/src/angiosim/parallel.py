"""Worker-pool plumbing shared by batch operations.

The ANGIOSIM_THREADS environment variable caps parallelism; it defaults to
the hardware CPU count.  Work is split into chunks processed in index order,
so results (and therefore all on-disk outputs) are identical whether a batch
runs serially or on a pool.
"""

from __future__ import annotations

import os
from concurrent.futures import ProcessPoolExecutor

from .errors import ValidationError

__all__ = ["resolve_threads", "chunked", "run_chunks"]

ENV_VAR = "ANGIOSIM_THREADS"


def resolve_threads() -> int:
    raw = os.environ.get(ENV_VAR)
    if raw is None:
        return os.cpu_count() or 1
    try:
        value = int(raw)
    except ValueError:
        raise ValidationError(f"{ENV_VAR} must be an integer, got {raw!r}")
    if value < 1:
        raise ValidationError(f"{ENV_VAR} must be >= 1, got {value}")
    return value


def chunked(items, size: int) -> list[list]:
    items = list(items)
    return [items[i : i + size] for i in range(0, len(items), size)]


def run_chunks(fn, arg_tuples, threads: int) -> list:
    """Apply ``fn(*args)`` to every tuple, in order; pooled when threads > 1."""
    if threads <= 1 or len(arg_tuples) <= 1:
        return [fn(*args) for args in arg_tuples]
    with ProcessPoolExecutor(max_workers=min(threads, len(arg_tuples))) as pool:
        futures = [pool.submit(fn, *args) for args in arg_tuples]
        return [f.result() for f in futures]
