"""Pure-Python (numpy) implementations of the hot loops.

Selected by :mod:`dyngem.kernels` when the compiled extension is missing or
disabled.  Kept semantically identical to ``_kernels.pyx``; results may
differ from the compiled path only in last-bit rounding because numpy's dot
products accumulate in a different order.
"""

from __future__ import annotations

import math


def gf_epoch(y, heads, tails, weights, order, lr, lam):
    """One epoch of per-edge SGD for graph factorization, updating y in place.

    For each edge (i, j, w) visited in ``order``:
    r = w - <y_i, y_j>, then y_i += 2*lr*(r*y_j - lam*y_i) and symmetrically
    for y_j, both computed from the pre-update rows.
    """
    two_lr = 2.0 * lr
    for k in order:
        i = heads[k]
        j = tails[k]
        yi = y[i].copy()
        yj = y[j].copy()
        r = weights[k] - float(yi @ yj)
        y[i] += two_lr * (r * yj - lam * yi)
        y[j] += two_lr * (r * yi - lam * yj)


def jacobi_sweeps(g, v, tol, max_sweeps):
    """One-sided Jacobi orthogonalization of the columns of g, in place.

    Accumulates the applied rotations into v (so g_in @ v == g_out holds up
    to rounding).  Returns the number of completed sweeps, or -1 if some
    column pair still violated the tolerance after ``max_sweeps`` sweeps.
    A pair (p, q) is converged when |g_p . g_q| <= tol * |g_p| * |g_q|.

    Columns whose norm decays below eps * ||g_in||_F are zeroed and skipped:
    the relative test can never settle for them (rotations bleed their mass
    away indefinitely), and their contribution is below roundoff anyway.
    """
    d = g.shape[1]
    eps = 2.220446049250313e-16
    fro2 = 0.0
    for j in range(d):
        fro2 += float(g[:, j] @ g[:, j])
    cut2 = eps * eps * fro2
    for sweep in range(max_sweeps):
        for j in range(d):
            nj = float(g[:, j] @ g[:, j])
            if 0.0 < nj <= cut2:
                g[:, j] = 0.0
        rotated = 0
        for p in range(d - 1):
            for q in range(p + 1, d):
                gp = g[:, p]
                gq = g[:, q]
                app = float(gp @ gp)
                aqq = float(gq @ gq)
                if app == 0.0 or aqq == 0.0:
                    continue
                apq = float(gp @ gq)
                if abs(apq) <= tol * math.sqrt(app * aqq):
                    continue
                rotated += 1
                zeta = (aqq - app) / (2.0 * apq)
                t = math.copysign(1.0, zeta) / (abs(zeta) + math.sqrt(1.0 + zeta * zeta))
                c = 1.0 / math.sqrt(1.0 + t * t)
                s = c * t
                new_p = c * gp - s * gq
                new_q = s * gp + c * gq
                g[:, p] = new_p
                g[:, q] = new_q
                vp = v[:, p].copy()
                vq = v[:, q].copy()
                v[:, p] = c * vp - s * vq
                v[:, q] = s * vp + c * vq
        if rotated == 0:
            return sweep
    return -1
