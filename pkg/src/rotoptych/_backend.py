"""Select the compiled kernels when available, else the numpy fallback.

Set ``ROTOPTYCH_NO_EXT=1`` to force the fallback (used by the benchmark and
the backend-parity tests).
"""

from __future__ import annotations

import os

if os.environ.get("ROTOPTYCH_NO_EXT"):
    from . import _kernels_np as _impl

    BACKEND = "numpy"
else:
    try:
        from . import _kernels as _impl  # type: ignore[attr-defined]

        BACKEND = "cython"
    except ImportError:
        from . import _kernels_np as _impl

        BACKEND = "numpy"

amplitude_constraint = _impl.amplitude_constraint
intensity_sse = _impl.intensity_sse
sse_diff_stack = _impl.sse_diff_stack
