"""Pure numpy implementations of the hot kernels.

Same signatures and results as the compiled ``_core`` module. The
``nthreads`` arguments are accepted for interface parity and ignored.
"""
from __future__ import annotations

import numpy as np

from .optimize import lbfgs

ARCOSH_DERIV_FLOOR = 1.0 + 1e-9


def _expand(indptr, indices, frontier):
    starts = indptr[frontier]
    lens = indptr[frontier + 1] - starts
    total = int(lens.sum())
    if total == 0:
        return indices[:0]
    offs = np.repeat(starts - np.cumsum(lens) + lens, lens) + np.arange(total)
    return indices[offs]


def bfs_row(indptr, indices, source, out):
    """Level-synchronous BFS from ``source`` writing hop counts into ``out`` (-1 = unreachable)."""
    out.fill(-1)
    out[source] = 0
    frontier = np.array([source], dtype=np.int64)
    level = 0
    while frontier.size:
        level += 1
        nbrs = _expand(indptr, indices, frontier)
        nbrs = nbrs[out[nbrs] < 0]
        if nbrs.size == 0:
            break
        nbrs = np.unique(nbrs)
        out[nbrs] = level
        frontier = nbrs
    return out


def bfs_multi(indptr, indices, sources, nthreads=1):
    indptr = np.asarray(indptr, dtype=np.int64)
    indices = np.asarray(indices, dtype=np.int64)
    sources = np.asarray(sources, dtype=np.int64)
    n = indptr.size - 1
    out = np.empty((sources.size, n), dtype=np.int32)
    for k, s in enumerate(sources):
        bfs_row(indptr, indices, s, out[k])
    return out


def bfs_gather(indptr, indices, sources, target_ptr, targets, nthreads=1):
    """For each source, BFS once and read off the distances to its targets.

    ``targets[target_ptr[k]:target_ptr[k+1]]`` are the targets of
    ``sources[k]``; the result is aligned with ``targets``.
    """
    indptr = np.asarray(indptr, dtype=np.int64)
    indices = np.asarray(indices, dtype=np.int64)
    target_ptr = np.asarray(target_ptr, dtype=np.int64)
    targets = np.asarray(targets, dtype=np.int64)
    n = indptr.size - 1
    buf = np.empty(n, dtype=np.int32)
    res = np.empty(targets.size, dtype=np.int32)
    for k, s in enumerate(np.asarray(sources, dtype=np.int64)):
        bfs_row(indptr, indices, s, buf)
        lo, hi = target_ptr[k], target_ptr[k + 1]
        res[lo:hi] = buf[targets[lo:hi]]
    return res


def point_stress(z, anchors, targets, sqrt_kappa):
    """Squared stress of one point against fixed anchors, with its gradient.

    ``z`` holds the spacelike coordinates; the timelike one is
    ``sqrt(1 + |z|^2)``. ``anchors`` are hyperboloid points (rows).
    """
    z = np.asarray(z, dtype=np.float64)
    x1 = np.sqrt(1.0 + z @ z)
    a1 = anchors[:, 0]
    ab = anchors[:, 1:]
    u = x1 * a1 - ab @ z
    dist = np.arccosh(np.maximum(u, 1.0)) / sqrt_kappa
    r = targets - dist
    f = float(r @ r)
    ud = np.maximum(u, ARCOSH_DERIV_FLOOR)
    w = -2.0 * r / (sqrt_kappa * np.sqrt((ud - 1.0) * (ud + 1.0)))
    g = (z / x1) * (w @ a1) - w @ ab
    return f, g


def refine_points(anchors, targets, Z0, sqrt_kappa, gtol=1e-6, maxiter=500, memory=10, nthreads=1):
    """Independent per-point stress minimization against fixed anchors.

    Returns ``(Z, f_initial, f_final, iterations, status)``.
    """
    anchors = np.ascontiguousarray(anchors, dtype=np.float64)
    targets = np.ascontiguousarray(targets, dtype=np.float64)
    Z = np.array(Z0, dtype=np.float64, copy=True)
    m = Z.shape[0]
    f0 = np.empty(m)
    f1 = np.empty(m)
    iters = np.empty(m, dtype=np.int32)
    status = np.empty(m, dtype=np.int32)
    for i in range(m):
        t = targets[i]
        res = lbfgs(lambda z: point_stress(z, anchors, t, sqrt_kappa), Z[i],
                    gtol=gtol, maxiter=maxiter, memory=memory)
        Z[i] = res.x
        f0[i] = res.f0
        f1[i] = res.f
        iters[i] = res.iterations
        status[i] = res.status
    return Z, f0, f1, iters, status


def cross_sums(X_N, X_L, D_N, sqrt_kappa, nthreads=1, chunk_rows=1 << 14):
    """Residual sums for non-landmark/landmark pairs; see ``_core.cross_sums``."""
    s2 = sd = mx = 0.0
    low = 0
    XLJ = np.array(X_L, dtype=np.float64)
    XLJ[:, 1:] *= -1.0
    for lo in range(0, X_N.shape[0], chunk_rows):
        U = X_N[lo:lo + chunk_rows] @ XLJ.T
        low += int(np.count_nonzero(U < 1.0 - 1e-6))
        T = D_N[lo:lo + chunk_rows]
        R = T - np.arccosh(np.maximum(U, 1.0)) / sqrt_kappa
        s2 += float(np.sum(R * R))
        sd += float(np.sum(T))
        if R.size:
            mx = max(mx, float(np.max(np.abs(R))))
    return s2, sd, mx, low
