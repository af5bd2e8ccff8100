"""Process-wide execution settings."""

import os


def thread_limit(default=None):
    """Worker cap from ``GAS_THREADS`` (falls back to the CPU count)."""
    raw = os.environ.get("GAS_THREADS", "").strip()
    if raw:
        try:
            value = int(raw)
        except ValueError:
            raise ValueError(f"GAS_THREADS must be a positive integer, got {raw!r}") from None
        if value < 1:
            raise ValueError(f"GAS_THREADS must be a positive integer, got {raw!r}")
        return value
    return default or os.cpu_count() or 1
