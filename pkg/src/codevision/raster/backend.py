"""Kernel backend selection.

The compiled extension is preferred when built; the pure-Python fallback is
used otherwise. `CODEVISION_BACKEND=pure|compiled` forces the choice (useful
for the equivalence tests and the benchmark).
"""
from __future__ import annotations

import os

from . import kernels as _pure

try:
    from . import _fastkernels as _compiled
except ImportError:  # extension not built
    _compiled = None


def available() -> dict[str, object]:
    """Importable backends keyed by name."""
    out = {"pure": _pure}
    if _compiled is not None:
        out["compiled"] = _compiled
    return out


def _select():
    forced = os.environ.get("CODEVISION_BACKEND", "").strip().lower()
    if forced in ("pure", "py"):
        return _pure
    if forced in ("compiled", "fast", "c"):
        if _compiled is None:
            raise ImportError(
                "CODEVISION_BACKEND=compiled but codevision.raster._fastkernels "
                "is not built; install with the extension or unset the variable"
            )
        return _compiled
    if forced:
        raise ImportError(f"unknown CODEVISION_BACKEND value {forced!r}")
    return _compiled if _compiled is not None else _pure


impl = _select()
name: str = impl.NAME
