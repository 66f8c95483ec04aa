"""Select the compiled kernel when importable, else the pure-Python twin.

Set ``QDCASCADE_PURE_PYTHON=1`` to force the fallback.
"""

import os

from . import _fallback

compiled = None
if os.environ.get("QDCASCADE_PURE_PYTHON", "").strip() not in ("1", "true", "yes"):
    try:
        from . import _kernels as compiled
    except ImportError:
        compiled = None

kernel = compiled if compiled is not None else _fallback
NAME = "cython" if compiled is not None else "python"


def get(name: str | None = None):
    """Return a kernel module by name (``"cython"``, ``"python"`` or None for the default)."""
    if name is None:
        return kernel
    if name == "python":
        return _fallback
    if name == "cython":
        if compiled is None:
            raise ImportError("compiled kernel is not available")
        return compiled
    raise ValueError(f"unknown backend {name!r}")
