"""Propagation kernel backends.

The compiled Cython core is used when available; the pure-NumPy fallback has
identical semantics.  Set RYDARP_PURE_PYTHON=1 to force the fallback (useful
for the backend benchmark and for debugging).
"""
import os

from . import py_backend

_forced_python = os.environ.get("RYDARP_PURE_PYTHON", "") not in ("", "0")

if not _forced_python:
    try:
        from . import _cy_core as _impl
    except ImportError:
        _impl = py_backend
else:
    _impl = py_backend

BACKEND = _impl.BACKEND_NAME

integrate_schrodinger = _impl.integrate_schrodinger
integrate_lindblad = _impl.integrate_lindblad


def backend_name() -> str:
    return BACKEND


def get_backend(name: str | None = None):
    """Return a kernel module by name ('cython' or 'python'); default backend if None."""
    if name is None:
        return _impl
    if name == "python":
        return py_backend
    if name == "cython":
        from . import _cy_core
        return _cy_core
    raise ValueError(f"unknown backend {name!r}")
