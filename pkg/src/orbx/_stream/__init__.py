"""Streaming level-pass backends.

The compiled Cython core is preferred; the pure-Python twin is the fallback
and the reference for the backend-equivalence tests. Set ORBX_STREAM_BACKEND
to "python" or "compiled" to override the automatic choice.
"""

from __future__ import annotations

import os

from . import _pure

try:
    from . import _core
except ImportError:  # extension not built; fall back to pure Python
    _core = None

_FORCED = os.environ.get("ORBX_STREAM_BACKEND", "auto")

if _FORCED == "python":
    _impl = _pure
elif _FORCED == "compiled":
    if _core is None:
        raise ImportError("ORBX_STREAM_BACKEND=compiled but orbx._stream._core is not built")
    _impl = _core
else:
    _impl = _core if _core is not None else _pure

BACKEND = "compiled" if _impl is _core and _core is not None else "python"


def available_backends() -> tuple[str, ...]:
    return ("compiled", "python") if _core is not None else ("python",)


def get_backend(name: str):
    """Return the backend module for "compiled", "python" or "auto"."""
    if name == "python":
        return _pure
    if name == "compiled":
        if _core is None:
            raise ValueError("compiled streaming backend is not available")
        return _core
    if name == "auto":
        return _impl
    raise ValueError(f"unknown backend {name!r}")


run_level_stream = _impl.run_level_stream
