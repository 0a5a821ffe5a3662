"""Kernel backend selection.

The compiled extension is used when it imports; ``SJLT_PURE_PYTHON=1``
forces the numpy fallback.  Callers reach kernels through
``_backend.kernels`` at call time so :func:`set_backend` takes effect
everywhere.
"""

import os

from . import _pykernels

try:
    from . import _kernels as _compiled
except ImportError:  # extension not built
    _compiled = None

if _compiled is not None and not os.environ.get("SJLT_PURE_PYTHON"):
    kernels = _compiled
else:
    kernels = _pykernels


def available() -> list[str]:
    names = ["python"]
    if _compiled is not None:
        names.insert(0, "compiled")
    return names


def get(name: str):
    if name == "python":
        return _pykernels
    if name == "compiled":
        if _compiled is None:
            raise RuntimeError("compiled kernels are not built")
        return _compiled
    raise ValueError(f"unknown backend {name!r}")


def set_backend(name: str) -> str:
    """Switch the active backend, returning the previous one's name."""
    global kernels
    prev = kernels.BACKEND
    kernels = get(name)
    return prev


def active() -> str:
    return kernels.BACKEND
