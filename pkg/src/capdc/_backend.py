"""Selects the simulation kernel backend at import time.

The compiled extension (``capdc._core``) is preferred; the pure-Python
module (``capdc._core_py``) is the drop-in fallback. ``CAPDC_BACKEND``
(values ``cython`` or ``python``) forces the choice.
"""

from __future__ import annotations

import os

from . import _core_py

try:
    from . import _core
except ImportError:  # extension not built on this install
    _core = None

def available_backends() -> tuple[str, ...]:
    return ("cython", "python") if _core is not None else ("python",)


def get_backend(name: str | None = None):
    """Return the kernel module for ``name`` (default: env var, then best)."""
    forced = os.environ.get("CAPDC_BACKEND", "").strip().lower()
    choice = name if name is not None else (forced or None)
    if choice in (None, ""):
        return _core if _core is not None else _core_py
    if choice == "python":
        return _core_py
    if choice == "cython":
        if _core is None:
            raise ImportError("compiled backend capdc._core is not available")
        return _core
    raise ValueError(f"unknown backend {choice!r}")


def active_backend_name() -> str:
    return "cython" if get_backend() is not _core_py else "python"
