"""Select the kernel implementation at import time.

The compiled extension ``conlasso._ckernels`` is used when it imports; set
``CONLASSO_PURE_PYTHON=1`` to force the NumPy fallback.
"""
import os

from . import _pykernels

python_kernels = _pykernels
compiled_kernels = None

if not os.environ.get("CONLASSO_PURE_PYTHON"):
    try:
        from . import _ckernels as compiled_kernels  # type: ignore[no-redef]
    except ImportError:  # extension not built
        compiled_kernels = None

kernels = compiled_kernels if compiled_kernels is not None else python_kernels
BACKEND = "compiled" if compiled_kernels is not None else "python"


def get(name=None):
    """Return a kernel module by name (``"compiled"``/``"python"``) or the default."""
    if name is None:
        return kernels
    if name == "python":
        return python_kernels
    if name == "compiled":
        if compiled_kernels is None:
            raise ImportError("compiled kernels are not available")
        return compiled_kernels
    raise ValueError(f"unknown backend {name!r}")
