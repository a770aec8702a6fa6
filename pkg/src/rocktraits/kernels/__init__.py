"""Hot per-pixel kernels with a numba and a pure-numpy implementation.

Set ``ROCKTRAITS_DISABLE_NUMBA=1`` to force the numpy path. Both paths are
expected to return identical results; the test suite checks this.
"""

import os

_FLAG = os.environ.get("ROCKTRAITS_DISABLE_NUMBA", "").strip().lower()

if _FLAG in ("1", "true", "yes", "on"):
    from . import _numpy as _impl

    BACKEND = "numpy"
else:
    try:
        from . import _numba as _impl

        BACKEND = "numba"
    except ImportError:  # numba missing from the environment
        from . import _numpy as _impl

        BACKEND = "numpy"

rle_encode = _impl.rle_encode
rle_decode = _impl.rle_decode
horn_gradients = _impl.horn_gradients
horn_slope = _impl.horn_slope
correlate_axis = _impl.correlate_axis
zhang_suen = _impl.zhang_suen
follow_borders = _impl.follow_borders

__all__ = [
    "BACKEND",
    "rle_encode",
    "rle_decode",
    "horn_gradients",
    "horn_slope",
    "correlate_axis",
    "zhang_suen",
    "follow_borders",
]
