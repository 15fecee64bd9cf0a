"""Call counters proving the augment stage never re-fits parameters.

Parameter estimation is expensive and belongs in the precompute stage; the
batch augmentation path must run pure re-rendering plus I/O. These counters
let tests (and wary users) assert that no estimation code executed during
augmentation.
"""

from __future__ import annotations

import threading

_lock = threading.Lock()
_counts: dict[str, int] = {}


def count(name: str) -> None:
    with _lock:
        _counts[name] = _counts.get(name, 0) + 1


def snapshot() -> dict[str, int]:
    with _lock:
        return dict(_counts)


def reset() -> None:
    with _lock:
        _counts.clear()
