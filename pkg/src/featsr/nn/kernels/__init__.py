"""Conv kernel backend selection.

The compiled extension is preferred when importable; set FEATSR_BACKEND to
"python" or "cython" to force one (forcing cython fails loudly if the
extension was not built).
"""

import os

from . import _pure

_requested = os.environ.get("FEATSR_BACKEND", "auto")

if _requested == "python":
    _impl = _pure
elif _requested == "cython":
    from . import _convops as _impl
elif _requested == "auto":
    try:
        from . import _convops as _impl
    except ImportError:
        _impl = _pure
else:
    raise ValueError(f"FEATSR_BACKEND must be auto|python|cython, got {_requested!r}")

BACKEND = _impl.BACKEND_NAME
im2col = _impl.im2col
col2im = _impl.col2im
conv_out_hw = _pure.conv_out_hw

__all__ = ["BACKEND", "im2col", "col2im", "conv_out_hw", "_pure"]
