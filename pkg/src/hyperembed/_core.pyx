# cython: language_level=3
"""Compiled kernels: multi-source BFS and per-point L-BFGS stress refinement.

Mirrors ``hyperembed._pycore`` (same signatures, same results up to
floating-point summation order). The optimizer below is a direct
translation of ``hyperembed.optimize.lbfgs``.
"""
import numpy as np
cimport numpy as cnp
from cython.parallel cimport prange
from libc.math cimport sqrt, acosh, fabs, log
from libc.stdlib cimport malloc, free

cnp.import_array()

cdef double C1 = 1e-4
cdef int MAX_BACKTRACKS = 60
cdef double CURVATURE_EPS = 1e-12
cdef double STALL_RTOL = 1e-15
cdef double FLOOR = 1.0 + 1e-9

cdef enum:
    CONVERGED = 0
    MAXITER = 1
    LINESEARCH = 2
    STALLED = 3


cdef inline void _bfs(const long long* indptr, const int* indices, Py_ssize_t n,
                      long long source, int* dist, long long* queue) noexcept nogil:
    cdef Py_ssize_t i, head = 0, tail = 0
    cdef long long u, v, e
    cdef int du
    for i in range(n):
        dist[i] = -1
    dist[source] = 0
    queue[tail] = source
    tail += 1
    while head < tail:
        u = queue[head]
        head += 1
        du = dist[u] + 1
        for e in range(indptr[u], indptr[u + 1]):
            v = indices[e]
            if dist[v] < 0:
                dist[v] = du
                queue[tail] = v
                tail += 1


def bfs_multi(const long long[::1] indptr, const int[::1] indices,
              const long long[::1] sources, int nthreads=1):
    """Hop distances from each source; row k belongs to ``sources[k]`` (-1 = unreachable)."""
    cdef Py_ssize_t n = indptr.shape[0] - 1
    cdef Py_ssize_t k, nsrc = sources.shape[0]
    out = np.empty((nsrc, n), dtype=np.int32)
    cdef int[:, ::1] o = out
    cdef long long* queue
    if n == 0 or nsrc == 0:
        return out
    for k in prange(nsrc, nogil=True, num_threads=max(nthreads, 1), schedule="dynamic"):
        queue = <long long*> malloc(n * sizeof(long long))
        _bfs(&indptr[0], &indices[0], n, sources[k], &o[k, 0], queue)
        free(queue)
    return out


def bfs_gather(const long long[::1] indptr, const int[::1] indices,
               const long long[::1] sources, const long long[::1] target_ptr,
               const long long[::1] targets, int nthreads=1):
    """One BFS per source, reading off ``targets[target_ptr[k]:target_ptr[k+1]]``."""
    cdef Py_ssize_t n = indptr.shape[0] - 1
    cdef Py_ssize_t k, j, nsrc = sources.shape[0]
    res = np.empty(targets.shape[0], dtype=np.int32)
    cdef int[::1] r = res
    cdef int* dist
    cdef long long* queue
    if nsrc == 0:
        return res
    for k in prange(nsrc, nogil=True, num_threads=max(nthreads, 1), schedule="dynamic"):
        dist = <int*> malloc(n * sizeof(int))
        queue = <long long*> malloc(n * sizeof(long long))
        _bfs(&indptr[0], &indices[0], n, sources[k], dist, queue)
        for j in range(target_ptr[k], target_ptr[k + 1]):
            r[j] = dist[targets[j]]
        free(dist)
        free(queue)
    return res


cdef double _point_fg(const double* z, int dim, const double* anchors, int l,
                      const double* targets, double sk, double* g) noexcept nogil:
    cdef int a, k
    cdef double zz = 0.0, x1, u, uc, ud, r, w, f = 0.0, wsum = 0.0
    cdef const double* row
    for k in range(dim):
        zz += z[k] * z[k]
        g[k] = 0.0
    x1 = sqrt(1.0 + zz)
    for a in range(l):
        row = anchors + a * (dim + 1)
        u = x1 * row[0]
        for k in range(dim):
            u -= row[k + 1] * z[k]
        uc = u if u > 1.0 else 1.0
        r = targets[a] - acosh(uc) / sk
        f += r * r
        ud = u if u > FLOOR else FLOOR
        w = -2.0 * r / (sk * sqrt((ud - 1.0) * (ud + 1.0)))
        wsum += w * row[0]
        for k in range(dim):
            g[k] -= w * row[k + 1]
    for k in range(dim):
        g[k] += (z[k] / x1) * wsum
    return f


def point_stress(const double[::1] z, const double[:, ::1] anchors,
                 const double[::1] targets, double sqrt_kappa):
    """Squared stress of one point against fixed anchors, with its gradient."""
    cdef int dim = z.shape[0]
    grad = np.empty(dim, dtype=np.float64)
    cdef double[::1] gv = grad
    cdef double f = _point_fg(&z[0], dim, &anchors[0, 0], anchors.shape[0],
                              &targets[0], sqrt_kappa, &gv[0])
    return f, grad


cdef inline double _dot(const double* a, const double* b, int n) noexcept nogil:
    cdef int i
    cdef double s = 0.0
    for i in range(n):
        s += a[i] * b[i]
    return s


cdef int _lbfgs_point(double* x, int n, const double* anchors, int l,
                      const double* targets, double sk, double gtol, int maxiter,
                      int memory, double* f0_out, double* f_out, int* it_out,
                      double* work) noexcept nogil:
    # work layout: g, xn, gn, d, q, S (memory*n), Y (memory*n), rho, alpha
    cdef double* g = work
    cdef double* xn = g + n
    cdef double* gn = xn + n
    cdef double* d = gn + n
    cdef double* q = d + n
    cdef double* S = q + n
    cdef double* Y = S + memory * n
    cdef double* rho = Y + memory * n
    cdef double* alpha = rho + memory
    cdef double f, fn, gd, step, sy, ss, yy, gamma, beta, decrease, gnorm
    cdef int count = 0, head = 0, it = 0, status = MAXITER
    cdef int i, k, j, newest, bt, accepted

    f = _point_fg(x, n, anchors, l, targets, sk, g)
    f0_out[0] = f
    gnorm = 0.0
    for i in range(n):
        if fabs(g[i]) > gnorm:
            gnorm = fabs(g[i])
    while True:
        if gnorm < gtol:
            status = CONVERGED
            break
        if it >= maxiter:
            status = MAXITER
            break
        if count > 0:
            for i in range(n):
                q[i] = g[i]
            for k in range(count):
                j = (head - 1 - k + memory) % memory
                alpha[j] = rho[j] * _dot(S + j * n, q, n)
                for i in range(n):
                    q[i] -= alpha[j] * Y[j * n + i]
            newest = (head - 1 + memory) % memory
            gamma = _dot(S + newest * n, Y + newest * n, n) / _dot(Y + newest * n, Y + newest * n, n)
            for i in range(n):
                q[i] *= gamma
            for k in range(count - 1, -1, -1):
                j = (head - 1 - k + memory) % memory
                beta = rho[j] * _dot(Y + j * n, q, n)
                for i in range(n):
                    q[i] += (alpha[j] - beta) * S[j * n + i]
            for i in range(n):
                d[i] = -q[i]
            gd = _dot(g, d, n)
            if not gd < 0.0:
                count = 0
                head = 0
        if count == 0:
            for i in range(n):
                d[i] = -g[i]
            gd = -_dot(g, g, n)
            step = 1.0 / sqrt(-gd)
            if step > 1.0:
                step = 1.0
        else:
            step = 1.0
        accepted = 0
        for bt in range(MAX_BACKTRACKS):
            for i in range(n):
                xn[i] = x[i] + step * d[i]
            fn = _point_fg(xn, n, anchors, l, targets, sk, gn)
            if fn <= f + C1 * step * gd:
                accepted = 1
                break
            step *= 0.5
        if not accepted:
            if count > 0:
                count = 0
                head = 0
                continue
            status = LINESEARCH
            break
        # q <- s, d <- y; only copied into the ring buffer when accepted
        for i in range(n):
            q[i] = xn[i] - x[i]
            d[i] = gn[i] - g[i]
        sy = _dot(q, d, n)
        ss = _dot(q, q, n)
        yy = _dot(d, d, n)
        if sy > CURVATURE_EPS * sqrt(ss * yy):
            for i in range(n):
                S[head * n + i] = q[i]
                Y[head * n + i] = d[i]
            rho[head] = 1.0 / sy
            head = (head + 1) % memory
            count = count + 1 if count < memory else memory
        decrease = f - fn
        for i in range(n):
            x[i] = xn[i]
            g[i] = gn[i]
        f = fn
        it += 1
        gnorm = 0.0
        for i in range(n):
            if fabs(g[i]) > gnorm:
                gnorm = fabs(g[i])
        if decrease <= STALL_RTOL * (fabs(f) if fabs(f) > 1.0 else 1.0) and gnorm >= gtol:
            status = STALLED
            break
    f_out[0] = f
    it_out[0] = it
    return status


def refine_points(const double[:, ::1] anchors, const double[:, ::1] targets,
                  Z0, double sqrt_kappa, double gtol=1e-6, int maxiter=500,
                  int memory=10, int nthreads=1):
    """Independent per-point stress minimization against fixed anchors.

    Returns ``(Z, f_initial, f_final, iterations, status)``.
    """
    Z = np.array(Z0, dtype=np.float64, order="C", copy=True)
    cdef double[:, ::1] z = Z
    cdef Py_ssize_t i, m = z.shape[0]
    cdef int dim = z.shape[1]
    cdef int l = anchors.shape[0]
    f0 = np.empty(m, dtype=np.float64)
    f1 = np.empty(m, dtype=np.float64)
    iters = np.empty(m, dtype=np.int32)
    status = np.empty(m, dtype=np.int32)
    cdef double[::1] f0v = f0
    cdef double[::1] f1v = f1
    cdef int[::1] itv = iters
    cdef int[::1] stv = status
    cdef Py_ssize_t wsize = 5 * dim + 2 * memory * dim + 2 * memory
    cdef double* work
    if m == 0 or dim == 0:
        if m:
            f0[:] = 0.0
            f1[:] = 0.0
            iters[:] = 0
            status[:] = CONVERGED
        return Z, f0, f1, iters, status
    if anchors.shape[1] != dim + 1 or targets.shape[0] != m or targets.shape[1] != l:
        raise ValueError("shape mismatch between anchors, targets and Z0")
    for i in prange(m, nogil=True, num_threads=max(nthreads, 1), schedule="dynamic"):
        work = <double*> malloc(wsize * sizeof(double))
        stv[i] = _lbfgs_point(&z[i, 0], dim, &anchors[0, 0], l, &targets[i, 0],
                              sqrt_kappa, gtol, maxiter, memory,
                              &f0v[i], &f1v[i], &itv[i], work)
        free(work)
    return Z, f0, f1, iters, status


cdef void _cross_row(const double* x, const double* XL, const double* target, Py_ssize_t l,
                     int dim, double sk, double* s2, double* sd, double* mx,
                     long long* low) noexcept nogil:
    cdef Py_ssize_t a
    cdef int k
    cdef double u, r, t, acc2 = 0.0, accd = 0.0, amx = 0.0
    cdef long long nlow = 0
    cdef const double* y
    cdef double inv_sk = 1.0 / sk
    for a in range(l):
        y = XL + a * (dim + 1)
        u = x[0] * y[0]
        for k in range(1, dim + 1):
            u -= x[k] * y[k]
        if u < 1.0 - 1e-6:
            nlow += 1
        if u < 1.0:
            u = 1.0
        t = target[a]
        r = t - log(u + sqrt((u - 1.0) * (u + 1.0))) * inv_sk
        acc2 += r * r
        accd += t
        if fabs(r) > amx:
            amx = fabs(r)
    s2[0] = acc2
    sd[0] = accd
    mx[0] = amx
    low[0] = nlow


def cross_sums(const double[:, ::1] X_N, const double[:, ::1] X_L,
               const double[:, ::1] D_N, double sqrt_kappa, int nthreads=1):
    """Fused residual sums for non-landmark/landmark pairs.

    Returns ``(sum of squared residuals, sum of targets, max |residual|,
    count of Lorentz products below 1 - 1e-6)``.
    """
    cdef Py_ssize_t m = X_N.shape[0], l = X_L.shape[0], i, a
    cdef int dim = X_N.shape[1] - 1
    cdef double s2 = 0.0, sd = 0.0, mx = 0.0
    cdef long long low = 0
    row_s2 = np.zeros(m, dtype=np.float64)
    row_sd = np.zeros(m, dtype=np.float64)
    row_mx = np.zeros(m, dtype=np.float64)
    row_low = np.zeros(m, dtype=np.int64)
    cdef double[::1] rs2 = row_s2
    cdef double[::1] rsd = row_sd
    cdef double[::1] rmx = row_mx
    cdef long long[::1] rlow = row_low
    if X_L.shape[1] != dim + 1 or D_N.shape[0] != m or D_N.shape[1] != l:
        raise ValueError("shape mismatch")
    for i in prange(m, nogil=True, num_threads=max(nthreads, 1), schedule="static"):
        _cross_row(&X_N[i, 0], &X_L[0, 0], &D_N[i, 0], l, dim, sqrt_kappa,
                   &rs2[i], &rsd[i], &rmx[i], &rlow[i])
    # per-row partials keep the reduction order independent of the thread count
    for i in range(m):
        s2 += rs2[i]
        sd += rsd[i]
        low += rlow[i]
        if rmx[i] > mx:
            mx = rmx[i]
    return s2, sd, mx, low
