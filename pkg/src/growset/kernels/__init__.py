"""Hot scoring kernels with a compiled core and a NumPy fallback.

The compiled Cython extension is preferred when present; the pure NumPy
implementation is selected otherwise. GROWSET_KERNEL=numpy|cython forces
a backend (forcing cython raises if the extension is not built).
"""
from __future__ import annotations

import logging
import os

logger = logging.getLogger(__name__)

_FORCED = os.environ.get("GROWSET_KERNEL", "").strip().lower()

if _FORCED == "numpy":
    from growset.kernels._simnp import topk_mean_max_sim, topk_mean_max_sim_batch

    BACKEND = "numpy"
elif _FORCED == "cython":
    from growset.kernels._simcy import topk_mean_max_sim, topk_mean_max_sim_batch

    BACKEND = "cython"
else:
    try:
        from growset.kernels._simcy import topk_mean_max_sim, topk_mean_max_sim_batch

        BACKEND = "cython"
    except ImportError:
        from growset.kernels._simnp import topk_mean_max_sim, topk_mean_max_sim_batch

        BACKEND = "numpy"
        logger.debug("compiled kernel unavailable, using NumPy fallback")

__all__ = ["BACKEND", "topk_mean_max_sim", "topk_mean_max_sim_batch"]
