"""Pick the compiled Euler-Poisson kernels when available.

Set ``LAXTOP_PURE_PYTHON=1`` to force the pure-Python reference loop.
"""
from __future__ import annotations

import os

from laxtop import _rk

BACKENDS = {"python": _rk}
try:
    from laxtop import _kernels
except ImportError:  # extension not built
    _kernels = None
else:
    BACKENDS["compiled"] = _kernels

if os.environ.get("LAXTOP_PURE_PYTHON") == "1" or _kernels is None:
    DEFAULT = "python"
else:
    DEFAULT = "compiled"


def get(name: str | None = None):
    name = name or DEFAULT
    try:
        return BACKENDS[name]
    except KeyError:
        raise ValueError(f"backend {name!r} unavailable; have {sorted(BACKENDS)}") from None
