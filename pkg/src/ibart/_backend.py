"""Picks the compiled kernels when importable, else the pure-Python ones.

Set ``IBART_BACKEND=python`` to force the fallback.
"""

import os

from . import _fallback

_choice = os.environ.get("IBART_BACKEND", "auto").lower()
kernels = _fallback
if _choice != "python":
    try:
        from . import _ext as kernels  # type: ignore[no-redef]
    except ImportError:
        if _choice in ("cython", "compiled"):
            raise
        kernels = _fallback

BACKEND = kernels.NAME


def get(name: str):
    """Kernel module by name (``"python"`` or ``"cython"``)."""
    if name == "python":
        return _fallback
    from . import _ext
    return _ext
