"""Backend selection for the hot kernels.

The compiled ``_core`` extension is used when it imports; otherwise the
numpy fallback in ``_pycore``. Set ``HYPEREMBED_BACKEND=python`` to force
the fallback. ``HYPEREMBED_THREADS`` caps the thread count of the
compiled kernels.
"""
from __future__ import annotations

import logging
import os

from . import _pycore

log = logging.getLogger(__name__)

try:
    if os.environ.get("HYPEREMBED_BACKEND", "").lower() == "python":
        raise ImportError("fallback forced by HYPEREMBED_BACKEND")
    from . import _core as _backend

    BACKEND = "compiled"
except ImportError as exc:
    log.debug("compiled core unavailable (%s); using numpy fallback", exc)
    _backend = _pycore
    BACKEND = "python"


def num_threads() -> int:
    raw = os.environ.get("HYPEREMBED_THREADS")
    if raw:
        try:
            return max(1, int(raw))
        except ValueError:
            log.warning("ignoring non-integer HYPEREMBED_THREADS=%r", raw)
    return os.cpu_count() or 1


def get_backend(name: str | None = None):
    """Return the kernel module: ``"compiled"``, ``"python"`` or the active one."""
    if name is None:
        return _backend
    if name == "python":
        return _pycore
    if name == "compiled":
        from . import _core

        return _core
    raise ValueError(f"unknown backend {name!r}")


def compiled_available() -> bool:
    try:
        from . import _core  # noqa: F401
    except ImportError:
        return False
    return True


bfs_multi = _backend.bfs_multi
bfs_gather = _backend.bfs_gather
point_stress = _backend.point_stress
refine_points = _backend.refine_points


def cross_sums(X_N, X_L, D_N, sqrt_kappa, nthreads=1):
    """Residual sums over the non-landmark/landmark block.

    On a single thread the numpy path (BLAS product plus vectorized
    arccosh) beats the fused compiled loop, so it is used there.
    """
    if _backend is _pycore or nthreads <= 1:
        return _pycore.cross_sums(X_N, X_L, D_N, sqrt_kappa)
    return _backend.cross_sums(X_N, X_L, D_N, sqrt_kappa, nthreads)
