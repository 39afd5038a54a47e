"""Backend selection for the hot kernels.

Numba is used when it imports cleanly and ``AGECHEMOSTAT_DISABLE_NUMBA`` is
unset (or set to ``0``). Otherwise kernels fall back to vectorised numpy.
The flag only affects speed; both paths produce the same numbers to
round-off.
"""
from __future__ import annotations

import logging
import os

logger = logging.getLogger(__name__)

ENV_FLAG = "AGECHEMOSTAT_DISABLE_NUMBA"

try:
    from numba import njit as _numba_njit

    NUMBA_AVAILABLE = True
except ImportError:  # pragma: no cover - numba is a declared dependency
    _numba_njit = None
    NUMBA_AVAILABLE = False


def _flag_disables() -> bool:
    return os.environ.get(ENV_FLAG, "0").strip().lower() not in ("", "0", "false", "no")


_backend = "numba" if (NUMBA_AVAILABLE and not _flag_disables()) else "numpy"


def njit(func=None, *, reassociate: bool = False):
    """Compile with numba when available, otherwise return ``func`` unchanged.

    ``reassociate`` lets LLVM reorder floating-point sums so reductions
    vectorise; results then differ from the numpy path at round-off level.
    """
    if func is None:
        return lambda f: njit(f, reassociate=reassociate)
    if _numba_njit is None:
        return func
    options = {"cache": True, "nogil": True}
    if reassociate:
        options["fastmath"] = {"reassoc", "contract"}
    return _numba_njit(**options)(func)


def backend() -> str:
    """Name of the active backend, ``"numba"`` or ``"numpy"``."""
    return _backend


def set_backend(name: str) -> None:
    """Switch backend at runtime (used by tests and the benchmark)."""
    global _backend
    if name not in ("numba", "numpy"):
        raise ValueError(f"unknown backend {name!r}")
    if name == "numba" and not NUMBA_AVAILABLE:
        raise RuntimeError("numba is not installed")
    _backend = name
    logger.debug("kernel backend set to %s", name)
