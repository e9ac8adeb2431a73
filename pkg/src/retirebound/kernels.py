"""Kernel backend selection.

The compiled extension is used when it imports; otherwise the numpy
implementation takes over.  Set ``RETIREBOUND_KERNELS=python`` to force the
fallback (the benchmark and the backend-parity tests rely on this switch).
"""

from __future__ import annotations

import importlib
import os
from types import ModuleType

from . import _pykernels

__all__ = ["BACKEND", "backend", "get_backend", "available_backends"]


def _load_compiled() -> ModuleType | None:
    try:
        return importlib.import_module(f"{__package__}._ckernels")
    except ImportError:
        return None


_compiled = _load_compiled()

if os.environ.get("RETIREBOUND_KERNELS", "").lower() in ("python", "numpy", "fallback") or _compiled is None:
    backend: ModuleType = _pykernels
    BACKEND = "python"
else:
    backend = _compiled
    BACKEND = "compiled"


def available_backends() -> list[str]:
    return ["python"] + (["compiled"] if _compiled is not None else [])


def get_backend(name: str | None = None) -> ModuleType:
    """Return the kernel module by name, or the import-time default."""
    if name is None:
        return backend
    if name == "python":
        return _pykernels
    if name == "compiled":
        if _compiled is None:
            raise ImportError("compiled kernels are not built")
        return _compiled
    raise ValueError(f"unknown backend {name!r}")
