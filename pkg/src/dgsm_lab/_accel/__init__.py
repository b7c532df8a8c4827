"""Backend selection for the numerical hot paths.

The compiled extension ``dgsm_lab._accel._native`` is preferred when it
imports cleanly; otherwise the NumPy implementation in ``pyimpl`` is used.
Setting the environment variable ``DGSM_LAB_PURE_PYTHON=1`` forces the
fallback regardless of what is installed.
"""

import os

from . import pyimpl

if os.environ.get("DGSM_LAB_PURE_PYTHON", "").strip() not in ("", "0"):
    _impl = pyimpl
else:
    try:
        from . import _native as _impl
    except ImportError:
        _impl = pyimpl

BACKEND_NAME = _impl.BACKEND_NAME

entropy_term = _impl.entropy_term
folded_mean_var = _impl.folded_mean_var
rbf_cross_stack = _impl.rbf_cross_stack
splitmix64 = _impl.splitmix64
sobol_raw = _impl.sobol_raw
owen_scramble = _impl.owen_scramble

__all__ = [
    "BACKEND_NAME",
    "entropy_term",
    "folded_mean_var",
    "rbf_cross_stack",
    "splitmix64",
    "sobol_raw",
    "owen_scramble",
    "pyimpl",
]
