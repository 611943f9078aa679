"""Episode kernel selection.

The compiled Cython kernel is used when it imports; otherwise the pure-Python
one. Setting ``SBGNP_PURE=1`` forces the fallback.
"""

import os

from . import _pykernel

try:
    if os.environ.get("SBGNP_PURE", "") not in ("", "0"):
        raise ImportError("pure-Python kernel forced")
    from . import _ckernel
except ImportError:
    _ckernel = None

BACKEND = "compiled" if _ckernel is not None else "python"
run_kernel = (_ckernel or _pykernel).run_kernel


def available() -> list[str]:
    return (["compiled"] if _ckernel is not None else []) + ["python"]


def get(name: str):
    if name == "python":
        return _pykernel.run_kernel
    if name == "compiled":
        if _ckernel is None:
            raise ImportError("compiled kernel is not built")
        return _ckernel.run_kernel
    raise ValueError(f"unknown kernel backend {name!r}")
