# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled hot loops: per-edge factorization updates and Jacobi sweeps."""

from libc.math cimport fabs, sqrt


def gf_epoch(double[:, ::1] y, Py_ssize_t[::1] heads, Py_ssize_t[::1] tails,
             double[::1] weights, Py_ssize_t[::1] order, double lr, double lam):
    """One epoch of per-edge SGD for graph factorization, updating y in place."""
    cdef Py_ssize_t d = y.shape[1]
    cdef Py_ssize_t m = order.shape[0]
    cdef Py_ssize_t k, e, i, j, l
    cdef double r, dot, yi, yj, two_lr
    two_lr = 2.0 * lr
    for k in range(m):
        e = order[k]
        i = heads[e]
        j = tails[e]
        dot = 0.0
        for l in range(d):
            dot += y[i, l] * y[j, l]
        r = weights[e] - dot
        for l in range(d):
            yi = y[i, l]
            yj = y[j, l]
            y[i, l] = yi + two_lr * (r * yj - lam * yi)
            y[j, l] = yj + two_lr * (r * yi - lam * yj)


def jacobi_sweeps(double[:, ::1] g, double[:, ::1] v, double tol, int max_sweeps):
    """One-sided Jacobi orthogonalization of the columns of g, in place.

    Accumulates rotations into v.  Returns completed sweep count, or -1 when
    the tolerance was still violated after ``max_sweeps`` sweeps.  Columns
    decaying below eps * ||g_in||_F are zeroed and skipped; the relative test
    never settles for them.
    """
    cdef Py_ssize_t n = g.shape[0]
    cdef Py_ssize_t d = g.shape[1]
    cdef Py_ssize_t dv = v.shape[0]
    cdef Py_ssize_t p, q, k
    cdef int sweep, rotated
    cdef double apq, app, aqq, zeta, t, c, s, xp, xq, sign
    cdef double eps = 2.220446049250313e-16
    cdef double fro2 = 0.0
    cdef double cut2, nj
    for q in range(d):
        for k in range(n):
            fro2 += g[k, q] * g[k, q]
    cut2 = eps * eps * fro2
    for sweep in range(max_sweeps):
        for q in range(d):
            nj = 0.0
            for k in range(n):
                nj += g[k, q] * g[k, q]
            if 0.0 < nj <= cut2:
                for k in range(n):
                    g[k, q] = 0.0
        rotated = 0
        for p in range(d - 1):
            for q in range(p + 1, d):
                apq = 0.0
                app = 0.0
                aqq = 0.0
                for k in range(n):
                    xp = g[k, p]
                    xq = g[k, q]
                    apq += xp * xq
                    app += xp * xp
                    aqq += xq * xq
                if app == 0.0 or aqq == 0.0:
                    continue
                if fabs(apq) <= tol * sqrt(app * aqq):
                    continue
                rotated += 1
                zeta = (aqq - app) / (2.0 * apq)
                sign = 1.0 if zeta >= 0.0 else -1.0
                t = sign / (fabs(zeta) + sqrt(1.0 + zeta * zeta))
                c = 1.0 / sqrt(1.0 + t * t)
                s = c * t
                for k in range(n):
                    xp = g[k, p]
                    xq = g[k, q]
                    g[k, p] = c * xp - s * xq
                    g[k, q] = s * xp + c * xq
                for k in range(dv):
                    xp = v[k, p]
                    xq = v[k, q]
                    v[k, p] = c * xp - s * xq
                    v[k, q] = s * xp + c * xq
        if rotated == 0:
            return sweep
    return -1
