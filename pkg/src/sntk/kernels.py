"""Hot inner loops, each with a numba kernel and a pure-numpy twin.

Public entry points take a ``backend`` keyword (``None`` means the process
default chosen by ``SNTK_BACKEND``). Both paths must agree to rounding; the
test suite runs them against each other.
"""

import numpy as np

from ._backend import njit, resolve

# --------------------------------------------------------------------------
# Cyclic Jacobi eigensolver
# --------------------------------------------------------------------------

_EPS = np.finfo(np.float64).eps


@njit
def _jacobi_nb(A, tol, max_sweeps):
    n = A.shape[0]
    V = np.eye(n)
    fro = 0.0
    for i in range(n):
        for j in range(n):
            fro += A[i, j] * A[i, j]
    fro = np.sqrt(fro)
    floor = 4.0 * 2.220446049250313e-16 * fro
    sweeps = 0
    while sweeps < max_sweeps:
        off = 0.0
        for i in range(n):
            for j in range(i + 1, n):
                off += 2.0 * A[i, j] * A[i, j]
        off = np.sqrt(off)
        if off <= tol or off <= floor:
            break
        for p in range(n - 1):
            for q in range(p + 1, n):
                apq = A[p, q]
                if apq == 0.0:
                    continue
                theta = (A[q, q] - A[p, p]) / (2.0 * apq)
                if theta >= 0.0:
                    t = 1.0 / (theta + np.sqrt(theta * theta + 1.0))
                else:
                    t = -1.0 / (-theta + np.sqrt(theta * theta + 1.0))
                c = 1.0 / np.sqrt(t * t + 1.0)
                s = t * c
                for k in range(n):
                    akp = A[k, p]
                    akq = A[k, q]
                    A[k, p] = c * akp - s * akq
                    A[k, q] = s * akp + c * akq
                for k in range(n):
                    apk = A[p, k]
                    aqk = A[q, k]
                    A[p, k] = c * apk - s * aqk
                    A[q, k] = s * apk + c * aqk
                A[p, q] = 0.0
                A[q, p] = 0.0
                for k in range(n):
                    vkp = V[k, p]
                    vkq = V[k, q]
                    V[k, p] = c * vkp - s * vkq
                    V[k, q] = s * vkp + c * vkq
        sweeps += 1
    w = np.empty(n)
    for i in range(n):
        w[i] = A[i, i]
    return w, V, sweeps


def _jacobi_np(A, tol, max_sweeps):
    n = A.shape[0]
    V = np.eye(n)
    fro = np.sqrt(np.sum(A * A))
    floor = 4.0 * _EPS * fro
    iu = np.triu_indices(n, 1)
    sweeps = 0
    while sweeps < max_sweeps:
        off = np.sqrt(2.0 * np.sum(A[iu] ** 2))
        if off <= tol or off <= floor:
            break
        for p in range(n - 1):
            for q in range(p + 1, n):
                apq = A[p, q]
                if apq == 0.0:
                    continue
                theta = (A[q, q] - A[p, p]) / (2.0 * apq)
                if theta >= 0.0:
                    t = 1.0 / (theta + np.sqrt(theta * theta + 1.0))
                else:
                    t = -1.0 / (-theta + np.sqrt(theta * theta + 1.0))
                c = 1.0 / np.sqrt(t * t + 1.0)
                s = t * c
                colp = A[:, p].copy()
                colq = A[:, q]
                A[:, p] = c * colp - s * colq
                A[:, q] = s * colp + c * colq
                rowp = A[p, :].copy()
                rowq = A[q, :]
                A[p, :] = c * rowp - s * rowq
                A[q, :] = s * rowp + c * rowq
                A[p, q] = 0.0
                A[q, p] = 0.0
                vp = V[:, p].copy()
                vq = V[:, q]
                V[:, p] = c * vp - s * vq
                V[:, q] = s * vp + c * vq
        sweeps += 1
    return np.diag(A).copy(), V, sweeps


def jacobi_eigh(A, tol=1e-12, max_sweeps=100, backend=None):
    """Eigen-decomposition of a symmetric matrix by cyclic Jacobi rotations.

    Returns ``(eigenvalues, eigenvectors, sweeps)`` with eigenvalues sorted
    ascending. Iteration stops once the off-diagonal Frobenius mass drops
    below ``tol`` (which bounds every eigenvalue error) or below the
    roundoff floor ``4 eps ||A||_F``.
    """
    A = np.array(A, dtype=np.float64, copy=True)
    if resolve(backend) == "numba":
        w, V, sweeps = _jacobi_nb(A, float(tol), int(max_sweeps))
    else:
        w, V, sweeps = _jacobi_np(A, float(tol), int(max_sweeps))
    order = np.argsort(w, kind="stable")
    return w[order], V[:, order], int(sweeps)


# --------------------------------------------------------------------------
# Cholesky factorization
# --------------------------------------------------------------------------

@njit
def _cholesky_nb(A):
    n = A.shape[0]
    L = np.zeros((n, n))
    for j in range(n):
        s = A[j, j]
        for k in range(j):
            s -= L[j, k] * L[j, k]
        if not s > 0.0:
            return L, j
        d = np.sqrt(s)
        L[j, j] = d
        for i in range(j + 1, n):
            t = A[i, j]
            for k in range(j):
                t -= L[i, k] * L[j, k]
            L[i, j] = t / d
    return L, -1


def _cholesky_np(A):
    n = A.shape[0]
    L = np.zeros((n, n))
    for j in range(n):
        s = A[j, j] - L[j, :j] @ L[j, :j]
        if not s > 0.0:
            return L, j
        d = np.sqrt(s)
        L[j, j] = d
        L[j + 1:, j] = (A[j + 1:, j] - L[j + 1:, :j] @ L[j, :j]) / d
    return L, -1


def cholesky(A, backend=None):
    """Lower Cholesky factor; returns ``(L, bad_pivot)`` with -1 on success."""
    A = np.ascontiguousarray(A, dtype=np.float64)
    if resolve(backend) == "numba":
        L, bad = _cholesky_nb(A)
    else:
        L, bad = _cholesky_np(A)
    return L, int(bad)


# --------------------------------------------------------------------------
# Sparse gradient-descent step over the active neurons only
# --------------------------------------------------------------------------

@njit
def _sparse_step_nb(W, b, a, Xt, y, active, eta, scale):
    k = active.shape[0]
    n, d = Xt.shape
    P = np.empty((k, n))
    f = np.zeros(n)
    for jj in range(k):
        r = active[jj]
        ar = a[r]
        br = b[r]
        for i in range(n):
            s = 0.0
            for c in range(d):
                s += W[r, c] * Xt[i, c]
            p = s - br
            P[jj, i] = p
            if p >= 0.0:
                f[i] += ar * p
    for i in range(n):
        f[i] *= scale
    resid = f - y
    counts = np.zeros(k, dtype=np.int64)
    gw = np.empty(d)
    for jj in range(k):
        r = active[jj]
        for c in range(d):
            gw[c] = 0.0
        gsum = 0.0
        for i in range(n):
            if P[jj, i] >= 0.0:
                g = resid[i]
                gsum += g
                for c in range(d):
                    gw[c] += g * Xt[i, c]
        coef = eta * scale * a[r]
        for c in range(d):
            W[r, c] -= coef * gw[c]
        b[r] += coef * gsum
        br = b[r]
        cnt = 0
        for i in range(n):
            s = 0.0
            for c in range(d):
                s += W[r, c] * Xt[i, c]
            if s - br >= 0.0:
                cnt += 1
        counts[jj] = cnt
    return f, P, counts


def _sparse_step_np(W, b, a, Xt, y, active, eta, scale):
    Wa = W[active]
    ba = b[active]
    aa = a[active]
    P = Wa @ Xt.T - ba[:, None]
    M = P >= 0.0
    f = scale * (aa @ np.where(M, P, 0.0))
    resid = f - y
    G = np.where(M, resid[None, :], 0.0)
    coef = eta * scale * aa
    W[active] = Wa - coef[:, None] * (G @ Xt)
    b[active] = ba + coef * G.sum(axis=1)
    Pn = W[active] @ Xt.T - b[active][:, None]
    counts = np.count_nonzero(Pn >= 0.0, axis=1).astype(np.int64)
    return f, P, counts


def sparse_step(W, b, a, Xt, y, active, eta, scale, backend=None):
    """Update rows ``active`` of ``W`` and ``b`` in place with one GD step.

    Neurons outside ``active`` must be inactive on every example: their
    gradient is then exactly zero, so skipping them reproduces the dense
    update. Returns the pre-update outputs ``f``, the pre-update
    preactivations of the listed neurons (``len(active) x n``) and their
    post-update activation counts.
    """
    active = np.ascontiguousarray(active, dtype=np.int64)
    if resolve(backend) == "numba":
        return _sparse_step_nb(W, b, a, Xt, y, active, float(eta), float(scale))
    return _sparse_step_np(W, b, a, Xt, y, active, float(eta), float(scale))


@njit
def _active_counts_nb(W, b, Xt, rows):
    n, d = Xt.shape
    out = np.zeros(rows.shape[0], dtype=np.int64)
    for jj in range(rows.shape[0]):
        r = rows[jj]
        cnt = 0
        for i in range(n):
            s = 0.0
            for c in range(d):
                s += W[r, c] * Xt[i, c]
            if s - b[r] >= 0.0:
                cnt += 1
        out[jj] = cnt
    return out


def active_counts(W, b, Xt, rows=None, backend=None):
    """Number of examples on which each neuron in ``rows`` is active."""
    if rows is None:
        rows = np.arange(W.shape[0], dtype=np.int64)
    rows = np.ascontiguousarray(rows, dtype=np.int64)
    if resolve(backend) == "numba":
        return _active_counts_nb(W, b, Xt, rows)
    P = W[rows] @ Xt.T - b[rows][:, None]
    return np.count_nonzero(P >= 0.0, axis=1).astype(np.int64)
