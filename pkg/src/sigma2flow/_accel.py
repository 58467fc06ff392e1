"""Kernel backend selection.

Hot loops compile with numba when it is importable and ``SIGMA2_NUMBA`` is not
set to ``0``; otherwise a pure-numpy fallback runs the same algorithms.
``SIGMA2_THREADS`` caps the numba thread pool (kernels here are serial by
design, the cap is honored for forward compatibility).

Results are bit-reproducible per backend: the compiled path accumulates with
serial compensated sums, the numpy path relies on numpy's deterministic
pairwise reduction.  The two backends may differ in the last ulp.
"""

from __future__ import annotations

import os

USE_NUMBA = os.environ.get("SIGMA2_NUMBA", "1") != "0"

if USE_NUMBA:
    try:
        import numba
    except ImportError:  # pragma: no cover - depends on environment
        USE_NUMBA = False

if USE_NUMBA:
    _threads = os.environ.get("SIGMA2_THREADS")
    if _threads:
        try:
            numba.set_num_threads(max(1, int(_threads)))
        except ValueError:
            pass

    def jit(fn):
        return numba.njit(cache=True)(fn)

else:

    def jit(fn):
        return fn


def backend_name() -> str:
    return "numba" if USE_NUMBA else "numpy"
