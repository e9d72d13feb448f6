"""Kernel backend selection.

The compiled ``_core`` extension is used when it imports; setting
``MMFCTT_PURE_PYTHON=1`` forces the pure-Python twin.
"""

from __future__ import annotations

import os
from types import ModuleType

from mmfctt import _core_py


def _load() -> tuple[ModuleType, str]:
    if os.environ.get("MMFCTT_PURE_PYTHON", "") not in ("", "0"):
        return _core_py, "python"
    try:
        from mmfctt import _core
    except ImportError:
        return _core_py, "python"
    return _core, "cython"


core, BACKEND = _load()


def available_backends() -> dict[str, ModuleType]:
    """All importable backends, keyed by name."""
    out = {"python": _core_py}
    try:
        from mmfctt import _core
    except ImportError:
        pass
    else:
        out["cython"] = _core
    return out
