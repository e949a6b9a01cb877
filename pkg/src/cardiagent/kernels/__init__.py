"""Hot numeric kernels with selectable backends.

Two implementations exist for each kernel: a numba ``@njit`` version and
a pure-numpy version.  Set ``CARDIAGENT_FORCE_NUMPY=1`` to skip numba
(useful on platforms where it is unavailable and for benchmarking the
fallback path).  ``benchmarks/bench_kernels.py`` compares the two.
"""

from __future__ import annotations

import os

from . import numpy_impl

_FORCE_NUMPY = os.environ.get("CARDIAGENT_FORCE_NUMPY", "").lower() in ("1", "true", "yes")

if not _FORCE_NUMPY:
    try:
        from . import numba_impl as _impl
        BACKEND = "numba"
    except ImportError:  # pragma: no cover - numba is a declared dependency
        _impl = numpy_impl
        BACKEND = "numpy"
else:
    _impl = numpy_impl
    BACKEND = "numpy"

directed_min_dists = _impl.directed_min_dists
first_ray_run = _impl.first_ray_run

__all__ = ["BACKEND", "directed_min_dists", "first_ray_run", "numpy_impl"]
