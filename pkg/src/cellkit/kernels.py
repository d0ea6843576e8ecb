"""Backend selection for the set kernels.

The compiled extension is used when it imports; otherwise the numpy fallback.
Set ``CELLKIT_PURE=1`` to force the fallback.
"""
import os

from . import _kernels_py as pure

if os.environ.get("CELLKIT_PURE"):
    _impl = pure
else:
    try:
        from . import _kernels as _impl  # type: ignore[attr-defined]
    except ImportError:  # extension not built
        _impl = pure

BACKEND = "compiled" if _impl is not pure else "python"

sumset = _impl.sumset
periods = _impl.periods
translate = _impl.translate
