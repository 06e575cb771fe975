"""Kernel backend selection.

The compiled extension (`etseed._kernels`, Cython) is preferred when it
imported cleanly; otherwise the pure-numpy twin is used. Selection happens
once at import and can be overridden with ETSEED_BACKEND={python,compiled}
or programmatically via :func:`select` (used by the parity tests and the
benchmark).
"""

import os

from . import _kernels_py

try:
    from . import _kernels as _kernels_c
except ImportError:
    _kernels_c = None

_active = None


def available_backends() -> list[str]:
    names = ["python"]
    if _kernels_c is not None:
        names.append("compiled")
    return names


def select(name: str):
    """Activate a backend by name and return its module."""
    global _active
    if name == "python":
        _active = _kernels_py
    elif name == "compiled":
        if _kernels_c is None:
            raise RuntimeError("compiled kernel extension is not built")
        _active = _kernels_c
    else:
        raise ValueError(f"unknown backend {name!r}")
    return _active


def active():
    return _active


def active_name() -> str:
    return _active.BACKEND_NAME


_requested = os.environ.get("ETSEED_BACKEND")
if _requested:
    select(_requested)
else:
    select("compiled" if _kernels_c is not None else "python")
