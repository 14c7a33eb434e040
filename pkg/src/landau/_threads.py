"""Worker-count resolution shared by FFT-heavy paths.

Thread count never changes results: transforms and reductions are
computed in a fixed order per array regardless of worker count.
"""

from __future__ import annotations

import os

_DEFAULT: int | None = None


def set_default_workers(n: int | None) -> None:
    global _DEFAULT
    _DEFAULT = n


def resolve_workers(explicit: int | None = None) -> int:
    if explicit is not None:
        return max(1, int(explicit))
    if _DEFAULT is not None:
        return max(1, int(_DEFAULT))
    env = os.environ.get("LANDAU_THREADS")
    if env:
        try:
            return max(1, int(env))
        except ValueError:
            pass
    return max(1, os.cpu_count() or 1)
