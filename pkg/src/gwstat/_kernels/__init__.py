"""Backend selection for the transport kernel.

The compiled Cython extension is used when importable; the pure-Python
mirror is the fallback. Set ``GW_PURE_PYTHON=1`` to force the fallback (used
by the benchmark and the backend-parity tests).
"""

from __future__ import annotations

import os

if os.environ.get("GW_PURE_PYTHON", "").strip() in {"1", "true", "yes"}:
    from gwstat._kernels.transport_py import BACKEND, TransportError, TransportSolver
else:
    try:
        from gwstat._kernels.transport import BACKEND, TransportError, TransportSolver
    except ImportError:  # extension not built
        from gwstat._kernels.transport_py import BACKEND, TransportError, TransportSolver

__all__ = ["TransportSolver", "TransportError", "BACKEND"]
