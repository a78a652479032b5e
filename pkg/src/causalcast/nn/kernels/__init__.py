"""Recurrent sequence kernels with backend selection at import time.

The compiled Cython extension is used when present; otherwise the pure
numpy implementation takes over. Set CAUSALCAST_PURE_PYTHON=1 to force the
fallback (used by the backend-parity tests and the benchmark).
"""

import os

_force_py = os.environ.get("CAUSALCAST_PURE_PYTHON", "") not in ("", "0")

if _force_py:
    from . import numpy_impl as _impl
    BACKEND = "numpy"
else:
    try:
        from . import _speedups as _impl
        BACKEND = "cython"
    except ImportError:
        from . import numpy_impl as _impl
        BACKEND = "numpy"

gru_forward = _impl.gru_forward
gru_backward = _impl.gru_backward
lstm_forward = _impl.lstm_forward
lstm_backward = _impl.lstm_backward

__all__ = ["BACKEND", "gru_forward", "gru_backward", "lstm_forward", "lstm_backward"]
