"""Kernel backend selection.

The compiled extension (Cython) is used when importable; otherwise the numpy
reference implementation takes over with identical semantics.  Set
``OPENQB_PURE_PYTHON=1`` to force the fallback (used by the benchmark and the
backend-parity tests).
"""

from __future__ import annotations

import os

from . import pyref

_FORCE_PY = os.environ.get("OPENQB_PURE_PYTHON", "").strip().lower() in ("1", "true", "yes")

if _FORCE_PY:
    _impl = pyref
else:
    try:
        from . import _core as _impl  # type: ignore[no-redef]
    except ImportError:
        _impl = pyref


def get_backend(name: str | None = None):
    """Selected kernel module (or an explicit one: "compiled" / "python")."""
    if name is None:
        return _impl
    if name == "python":
        return pyref
    if name == "compiled":
        from . import _core
        return _core
    raise ValueError(f"unknown backend {name!r}")


def backend_name() -> str:
    return _impl.BACKEND
