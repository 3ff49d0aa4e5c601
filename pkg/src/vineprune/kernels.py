"""Kernel dispatch.

``VINEPRUNE_KERNELS=numpy`` forces the pure-numpy path; the default is
``numba`` and silently degrades to numpy when numba cannot be imported.
"""

import logging
import os

log = logging.getLogger(__name__)

_requested = os.environ.get("VINEPRUNE_KERNELS", "numba").strip().lower()

if _requested == "numpy":
    from . import _kernels_numpy as _impl

    BACKEND = "numpy"
else:
    try:
        from . import _kernels_numba as _impl

        BACKEND = "numba"
    except ImportError:  # pragma: no cover - depends on environment
        log.warning("numba unavailable, using numpy kernels")
        from . import _kernels_numpy as _impl

        BACKEND = "numpy"

rasterize_polygon = _impl.rasterize_polygon
dilate_disc = _impl.dilate_disc
row_extents = _impl.row_extents

__all__ = ["BACKEND", "rasterize_polygon", "dilate_disc", "row_extents"]
