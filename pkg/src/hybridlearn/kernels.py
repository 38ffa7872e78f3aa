"""Backend selection for the recurrent kernels.

The compiled extension is used when it imports; otherwise the numpy
implementation takes over.  Set ``HYBRIDLEARN_PURE_PYTHON=1`` to force the
fallback.
"""

import os

from . import _kernels_py

if os.environ.get("HYBRIDLEARN_PURE_PYTHON", "") not in ("", "0"):
    _impl = _kernels_py
    BACKEND = "python"
else:
    try:
        from . import _kernels as _impl
        BACKEND = "compiled"
    except ImportError:
        _impl = _kernels_py
        BACKEND = "python"

forward = _impl.forward
loss_grad = _impl.loss_grad


def get_backend(name):
    """Return the kernel module for ``"python"`` or ``"compiled"``."""
    if name == "python":
        return _kernels_py
    if name == "compiled":
        from . import _kernels
        return _kernels
    raise ValueError(f"unknown backend {name!r}")
