"""Kernel selection: the compiled extension when it imports, numpy otherwise.

Set ``CAYLEY_QA_PURE_PYTHON=1`` to force the fallback.
"""
import os

from . import _fallback

BACKEND = "python"
if os.environ.get("CAYLEY_QA_PURE_PYTHON", "") in ("", "0"):
    try:
        from . import _kernels as _impl

        BACKEND = "cython"
    except ImportError:  # extension not built
        _impl = _fallback
else:
    _impl = _fallback

interaction_diagonal = _impl.interaction_diagonal
up_counts = _impl.up_counts
matvec = _impl.matvec
cheb_step = _impl.cheb_step
cheb_step_batch = _impl.cheb_step_batch

__all__ = ["BACKEND", "interaction_diagonal", "up_counts", "matvec", "cheb_step", "cheb_step_batch"]
