"""Kernel backend selection: compiled core if built, numpy fallback otherwise.

Set LATTICECLOCK_KERNEL=python (or =cython) to force a backend; forcing
cython raises if the extension is missing.  Both backends implement the
same blocked deterministic reduction, so results are bit-identical across
thread counts within a backend and agree to roundoff across backends.
"""

import os

from . import fallback

_requested = os.environ.get("LATTICECLOCK_KERNEL", "").lower()

if _requested in ("python", "numpy", "fallback"):
    _impl = fallback
    BACKEND = "numpy"
else:
    try:
        from . import _core as _impl  # type: ignore[attr-defined]

        BACKEND = "cython"
    except ImportError:
        if _requested == "cython":
            raise ImportError(
                "LATTICECLOCK_KERNEL=cython but the compiled extension is not built; "
                "run pip install -e . --no-build-isolation"
            )
        _impl = fallback
        BACKEND = "numpy"

BLOCK_SIZE = fallback.BLOCK_SIZE

chain_range_sum = _impl.chain_range_sum
class_sum = _impl.class_sum
cubic_center_sum = _impl.cubic_center_sum
