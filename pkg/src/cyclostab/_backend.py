"""Select the compiled kernels when available, else the pure-Python ones.

Set ``CYCLOSTAB_PURE_PYTHON=1`` to force the fallback (used by the
equivalence tests and the benchmark).
"""

import os

from . import _fallback

COMPILED = False
kernels = _fallback

if not os.environ.get("CYCLOSTAB_PURE_PYTHON"):
    try:
        from . import _kernels as kernels  # noqa: F811

        COMPILED = True
    except ImportError:  # extension not built
        pass


def get(name="auto"):
    """Return a kernel module by name: ``"compiled"``, ``"python"`` or ``"auto"``."""
    if name == "auto":
        return kernels
    if name == "python":
        return _fallback
    if name == "compiled":
        from . import _kernels

        return _kernels
    raise ValueError(f"unknown backend {name!r}")
