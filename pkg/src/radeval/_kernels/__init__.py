"""Kernel backend selection.

Prefers the compiled extension; falls back to the pure implementation when
the extension is missing or when ``RADEVAL_PURE_PYTHON=1`` is set (used for
parity tests and the backend benchmark).
"""

import os

if os.environ.get("RADEVAL_PURE_PYTHON"):
    from radeval._kernels import pure as _impl
else:
    try:
        from radeval._kernels import _native as _impl  # type: ignore[no-redef]
    except ImportError:
        from radeval._kernels import pure as _impl  # type: ignore[no-redef]

BACKEND: str = _impl.BACKEND
kendall_counts = _impl.kendall_counts
lcs_len = _impl.lcs_len

__all__ = ["BACKEND", "kendall_counts", "lcs_len"]
