"""Kernel backend selection: compiled extension if available, else Python.

Set LATTICECFTP_PURE=1 to force the pure-Python kernel (used by the
equivalence tests and the benchmark).
"""

from __future__ import annotations

import os

if os.environ.get("LATTICECFTP_PURE") == "1":
    from ._fwd_py import apply_events
    BACKEND = "python"
else:
    try:
        from ._fwdkernel import apply_events  # type: ignore[attr-defined]
        BACKEND = "cython"
    except ImportError:
        from ._fwd_py import apply_events
        BACKEND = "python"

__all__ = ["apply_events", "BACKEND"]
