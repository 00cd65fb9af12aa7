"""Backend selection for the Metropolis chain kernels.

The compiled extension is used when it was built; otherwise, or when the
environment variable ``ATVMC_PURE_PYTHON`` is set to a non-empty value other
than ``0``, the pure-Python implementation is used.
"""

import os

from . import _kernels_py

_force_python = os.environ.get("ATVMC_PURE_PYTHON", "") not in ("", "0")

compiled = None
if not _force_python:
    try:
        from . import _kernels as compiled  # type: ignore[no-redef]
    except ImportError:
        compiled = None

python = _kernels_py
active = compiled if compiled is not None else python
BACKEND = active.BACKEND


def get_backend(name: str | None = None):
    """Return the kernel module for ``name`` ("cython", "python", or None/"auto" for default)."""
    if name is None or name == "auto":
        return active
    if name == "python":
        return python
    if name == "cython":
        if compiled is None:
            raise ImportError("compiled kernels are not available in this build")
        return compiled
    raise ValueError(f"unknown kernel backend {name!r}")
