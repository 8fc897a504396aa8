"""Backend selection for the numerical hot loops, plus the Jacobi SVD driver.

The compiled Cython extension is used when available; setting the
environment variable ``DYNGEM_PURE_PYTHON=1`` before import forces the
pure-numpy fallback.  ``BACKEND`` names the active implementation.
"""

from __future__ import annotations

import os

import numpy as np

from dyngem.errors import ConvergenceError

if os.environ.get("DYNGEM_PURE_PYTHON") == "1":
    from dyngem import _kernels_py as _impl

    BACKEND = "python"
else:
    try:
        from dyngem import _kernels as _impl

        BACKEND = "compiled"
    except ImportError:
        from dyngem import _kernels_py as _impl

        BACKEND = "python"

gf_epoch = _impl.gf_epoch
jacobi_sweeps = _impl.jacobi_sweeps


def _complete_basis(u, null_cols):
    """Fill the marked columns of u with unit vectors orthogonal to the rest.

    Greedy: per column, the identity candidate with the largest residual
    after projecting out the current columns (any fixed fraction threshold
    can reject every candidate when the residual mass spreads evenly).
    """
    d = u.shape[0]
    for j in null_cols:
        residuals = np.eye(d) - u @ (u.T @ np.eye(d))
        best = int(np.argmax(np.linalg.norm(residuals, axis=0)))
        w = residuals[:, best]
        w -= u @ (u.T @ w)  # re-orthogonalize once for numerical safety
        norm = float(np.linalg.norm(w))
        if norm <= np.sqrt(np.finfo(np.float64).eps):
            raise ConvergenceError("could not complete an orthogonal basis")
        u[:, j] = w / norm


def jacobi_svd(m, tol=1e-12, max_sweeps=100):
    """Full SVD of a square matrix by one-sided Jacobi rotations.

    Returns ``(u, s, vt)`` with ``m == u @ diag(s) @ vt``, singular values in
    descending order and both factors orthogonal (rank-deficient inputs get
    their null columns completed to an orthonormal basis).  Raises
    ConvergenceError if the off-diagonal tolerance is still violated after
    ``max_sweeps`` sweeps.
    """
    a = np.asarray(m, dtype=np.float64)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise ValueError("jacobi_svd expects a square 2-D matrix")
    d = a.shape[0]
    g = np.ascontiguousarray(a.copy())
    v = np.eye(d)
    if d > 1:
        sweeps = jacobi_sweeps(g, v, tol, max_sweeps)
        if sweeps < 0:
            raise ConvergenceError(f"Jacobi SVD did not converge within {max_sweeps} sweeps")
    s = np.sqrt(np.einsum("ij,ij->j", g, g))
    order = np.argsort(-s, kind="stable")
    g, v, s = g[:, order], v[:, order], s[order]
    u = np.zeros_like(g)
    cutoff = d * np.finfo(np.float64).eps * (s[0] if s.size else 0.0)
    nonnull = s > cutoff
    u[:, nonnull] = g[:, nonnull] / s[nonnull]
    if not nonnull.all():
        _complete_basis(u, np.nonzero(~nonnull)[0])
    return u, s, v.T
