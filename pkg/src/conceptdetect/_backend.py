"""Picks the compiled loss kernels when available, else the numpy fallback.

Set ``CONCEPTDETECT_PURE_PYTHON=1`` to force the fallback.
"""

import os

from . import _kernels_py

kernels_py = _kernels_py
kernels_ext = None

try:
    from . import _kernels as kernels_ext
except ImportError:
    pass

if kernels_ext is not None and os.environ.get("CONCEPTDETECT_PURE_PYTHON", "") not in ("1", "true", "yes"):
    kernels = kernels_ext
    BACKEND = "cython"
else:
    kernels = kernels_py
    BACKEND = "python"


def get_kernels(name: str | None = None):
    """Return a kernel module by name (``"cython"``/``"python"``) or the active one."""
    if name is None:
        return kernels
    if name == "python":
        return kernels_py
    if name == "cython":
        if kernels_ext is None:
            raise ImportError("compiled kernels are not built; run `pip install -e .`")
        return kernels_ext
    raise ValueError(f"unknown backend {name!r}")
