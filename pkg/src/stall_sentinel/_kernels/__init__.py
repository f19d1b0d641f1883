"""Hot per-pixel kernels with a compiled core and a numpy fallback.

The compiled extension is preferred when importable; set
STALL_SENTINEL_BACKEND=numpy to force the fallback (the benchmark and the
backend-equivalence tests do). Both backends produce bit-identical mixture
state by construction.
"""

import os

from . import numpy_backend

if os.environ.get("STALL_SENTINEL_BACKEND", "").lower() == "numpy":
    _impl = numpy_backend
    BACKEND = "numpy"
else:
    try:
        from . import _core as _impl

        BACKEND = "cython"
    except ImportError:
        _impl = numpy_backend
        BACKEND = "numpy"

mog2_update = _impl.mog2_update
ssim_mean = _impl.ssim_mean
