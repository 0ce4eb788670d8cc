"""Split-search backend selection.

The compiled extension is used when it was built; setting
``VISJIT_PURE_PYTHON=1`` forces the numpy fallback.
"""
from __future__ import annotations

import os
from types import ModuleType

from . import _pykernels


def _load() -> ModuleType:
    if os.environ.get("VISJIT_PURE_PYTHON", "").strip() not in ("", "0"):
        return _pykernels
    try:
        from . import _ckernels
    except ImportError:
        return _pykernels
    return _ckernels


_backend = _load()
BACKEND: str = _backend.BACKEND
best_split_entropy = _backend.best_split_entropy
best_split_gradient = _backend.best_split_gradient


def available_backends() -> dict[str, ModuleType]:
    out = {"python": _pykernels}
    try:
        from . import _ckernels

        out["cython"] = _ckernels
    except ImportError:
        pass
    return out
