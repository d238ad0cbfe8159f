"""Backend selection for the greedy selection kernel.

The compiled extension is used when it imports; ``TDIF_PURE_PYTHON=1`` or
``set_backend("python")`` forces the numpy fallback.
"""

from __future__ import annotations

import os

from . import _greedy_py

try:
    from . import _greedy as _compiled
except ImportError:  # extension not built
    _compiled = None

BACKENDS = ("python", "cython")
_backends = {"python": _greedy_py.greedy_kernel}
if _compiled is not None:
    _backends["cython"] = _compiled.greedy_kernel


def _default() -> str:
    return "python" if os.environ.get("TDIF_PURE_PYTHON") == "1" or _compiled is None else "cython"


_active = _default()


def available_backends() -> list[str]:
    return sorted(_backends)


def get_backend() -> str:
    return _active


def set_backend(name: str) -> None:
    global _active
    if name == "auto":
        name = _default()
    if name not in _backends:
        raise ValueError(f"backend {name!r} unavailable (have {available_backends()})")
    _active = name


def greedy_kernel(*args, backend: str | None = None):
    return _backends[backend or _active](*args)
