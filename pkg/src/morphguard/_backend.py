"""Kernel backend selection.

Numba is used when importable unless ``MORPHGUARD_DISABLE_NUMBA`` is set to a
truthy value, in which case the pure-numpy kernels are used everywhere.
``MORPHGUARD_THREADS`` caps internal parallelism (default: all cores).
"""

import importlib.util
import os

_TRUTHY = {"1", "true", "yes", "on"}


def _numba_available():
    return importlib.util.find_spec("numba") is not None


NUMBA_DISABLED = os.environ.get("MORPHGUARD_DISABLE_NUMBA", "").strip().lower() in _TRUTHY
HAS_NUMBA = _numba_available()
USE_NUMBA = HAS_NUMBA and not NUMBA_DISABLED


def backend_name():
    return "numba" if USE_NUMBA else "numpy"


def max_threads():
    raw = os.environ.get("MORPHGUARD_THREADS", "").strip()
    cores = os.cpu_count() or 1
    if not raw:
        return cores
    try:
        value = int(raw)
    except ValueError:
        return cores
    return max(1, min(value, cores))
