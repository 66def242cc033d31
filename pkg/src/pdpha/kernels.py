"""Kernel dispatch: the compiled extension when importable, else the pure-Python twin.

Set ``PDPHA_PURE_PYTHON=1`` to force the fallback.
"""

from __future__ import annotations

import os

from pdpha import _kernels_py

if os.environ.get("PDPHA_PURE_PYTHON", "") not in ("", "0"):
    _impl = _kernels_py
    BACKEND = "python"
else:
    try:
        from pdpha import _kernels as _impl  # type: ignore[attr-defined]

        BACKEND = "cython"
    except ImportError:
        _impl = _kernels_py
        BACKEND = "python"

dp_solve = _impl.dp_solve
sa_run = _impl.sa_run
tour_cost = _impl.tour_cost

__all__ = ["BACKEND", "dp_solve", "sa_run", "tour_cost"]
