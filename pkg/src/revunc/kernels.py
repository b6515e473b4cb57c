"""Backend selection for the numerical kernels.

The compiled extension is used when it imports; otherwise the pure-Python
reference implementation is loaded. Setting ``REVUNC_PURE_PYTHON=1`` forces
the fallback.
"""

from __future__ import annotations

import logging
import os

logger = logging.getLogger(__name__)

if os.environ.get("REVUNC_PURE_PYTHON", "").strip() not in ("", "0"):
    from . import _pykernels as _impl

    BACKEND = "python"
else:
    try:
        from . import _kernels as _impl  # type: ignore[attr-defined]

        BACKEND = "compiled"
    except ImportError:  # pragma: no cover - depends on the build
        from . import _pykernels as _impl

        BACKEND = "python"
        logger.debug("compiled kernels unavailable, using pure-Python fallback")

band_cholesky = _impl.band_cholesky
band_solve_lower = _impl.band_solve_lower
band_solve_upper = _impl.band_solve_upper
psd_cholesky = _impl.psd_cholesky
psd_solve = _impl.psd_solve
kalman_filter = _impl.kalman_filter
backward_sample = _impl.backward_sample
draw_mixture_indicators = _impl.draw_mixture_indicators

__all__ = [
    "BACKEND",
    "band_cholesky",
    "band_solve_lower",
    "band_solve_upper",
    "psd_cholesky",
    "psd_solve",
    "kalman_filter",
    "backward_sample",
    "draw_mixture_indicators",
]
