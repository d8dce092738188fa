"""Backend selection for the rasterization kernels.

The compiled extension is used when it imports; otherwise the numpy twin.
Set ``ZCOLLIDE_BACKEND=python`` to force the fallback.
"""

from __future__ import annotations

import os
from types import ModuleType

from . import _pykernels

try:
    from . import _kernels as _native
except ImportError:  # extension not built
    _native = None

BACKENDS: dict[str, ModuleType] = {"python": _pykernels}
if _native is not None:
    BACKENDS["cython"] = _native


def _default() -> str:
    wanted = os.environ.get("ZCOLLIDE_BACKEND", "").strip().lower()
    if wanted:
        if wanted not in BACKENDS:
            raise ImportError(f"ZCOLLIDE_BACKEND={wanted!r} not available; have {sorted(BACKENDS)}")
        return wanted
    return "cython" if "cython" in BACKENDS else "python"


ACTIVE = _default()


def get(name: str | None = None) -> ModuleType:
    name = name or ACTIVE
    try:
        return BACKENDS[name]
    except KeyError:
        raise ValueError(f"unknown or unavailable backend {name!r}; have {sorted(BACKENDS)}") from None


def set_backend(name: str) -> None:
    global ACTIVE
    get(name)
    ACTIVE = name
