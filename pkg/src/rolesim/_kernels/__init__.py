"""Kernel backend selection for the exhaustive-search oracle.

The compiled Cython kernel is preferred when importable; the pure-Python
backend implements the identical algorithm. Force one with
ROLESIM_KERNEL=c or ROLESIM_KERNEL=py.
"""

import os

from . import py_backend

_requested = os.environ.get("ROLESIM_KERNEL", "auto")
_compiled = None
if _requested in ("auto", "c"):
    try:
        from . import _ck as _compiled
    except ImportError:
        _compiled = None
        if _requested == "c":
            raise ImportError("ROLESIM_KERNEL=c but the compiled kernel is not built")

if _requested == "py":
    _impl = py_backend
    BACKEND = "py"
elif _compiled is not None:
    _impl = _compiled
    BACKEND = "c"
else:
    _impl = py_backend
    BACKEND = "py"

search = _impl.search


def get_backend(name: str):
    """Explicit backend lookup, used by the benchmark and parity tests."""
    if name == "py":
        return py_backend
    if name == "c":
        if _compiled is None:
            raise ImportError("compiled kernel not built")
        return _compiled
    raise ValueError(f"unknown backend {name!r}")


def available_backends() -> list[str]:
    return ["c", "py"] if _compiled is not None else ["py"]
