"""Empirical and limiting neural tangent kernels for the biased ReLU network.

The limiting kernel for unit-norm inputs is

    Hinf_ij(B) = (<x_i, x_j> + 1) * Pr[w^T x_i >= B, w^T x_j >= B],   w ~ N(0, I)

and the pair probability reduces to a one-dimensional integral over the
correlation c = <x_i, x_j>:

    p(c, B) = int_B^inf phi(t) Q((B - c t) / sqrt(1 - c^2)) dt

evaluated with composite Gauss-Legendre quadrature on [B, B + 12]. Q is the
standard normal upper tail, computed from ``erfc``.
"""

import json
import math

import numpy as np
from scipy.special import erfc

from .data import Dataset
from .errors import InvalidInputError
from .model import activation_mask
from .numerics import SymMatrix

_SQRT2 = math.sqrt(2.0)
_INV_SQRT_2PI = 1.0 / math.sqrt(2.0 * math.pi)

QUAD_SPAN = 12.0
QUAD_PANELS = 16
QUAD_ORDER = 32
DEGENERATE_CORR = 1.0 - 1e-9

_gl_nodes, _gl_weights = np.polynomial.legendre.leggauss(QUAD_ORDER)


def gaussian_tail(x):
    """Q(x) = Pr[g >= x] for a standard normal g."""
    return 0.5 * erfc(np.asarray(x, dtype=np.float64) / _SQRT2)


def gaussian_cdf(x):
    return gaussian_tail(-np.asarray(x, dtype=np.float64))


def gaussian_pdf(x):
    x = np.asarray(x, dtype=np.float64)
    return _INV_SQRT_2PI * np.exp(-0.5 * x * x)


def _panel_edges(c, B):
    lo, hi = B, B + QUAD_SPAN
    edges = set(np.linspace(lo, hi, QUAD_PANELS + 1).tolist())
    s = math.sqrt(max(0.0, 1.0 - c * c))
    if abs(c) > 0.0:
        width = s / abs(c)
        marks = [B + k * width for k in (0.25, 1.0, 4.0, 10.0)]
        if c > 0:
            # the tail factor switches from ~0 to ~1 around t = B / c
            center = B / c
            marks += [center + k * width for k in (-10.0, -4.0, -1.0, 0.0, 1.0, 4.0, 10.0)]
        edges.update(t for t in marks if lo < t < hi)
    return np.array(sorted(edges))


def pair_activation_probability(c, B):
    """Pr[g1 >= B, c g1 + sqrt(1 - c^2) g2 >= B] for independent standard normals.

    Correlations within 1e-9 of +-1 use the limits Q(B) and 0 respectively.
    """
    c = float(c)
    B = float(B)
    if not -1.0 - 1e-12 <= c <= 1.0 + 1e-12:
        raise InvalidInputError(f"correlation {c} outside [-1, 1]")
    if not B >= 0.0:
        raise InvalidInputError("B must be >= 0")
    if c >= DEGENERATE_CORR:
        return float(gaussian_tail(B))
    if c <= -DEGENERATE_CORR:
        return 0.0
    s = math.sqrt(1.0 - c * c)
    edges = _panel_edges(c, B)
    left, right = edges[:-1], edges[1:]
    half = 0.5 * (right - left)
    mid = 0.5 * (right + left)
    t = (mid[:, None] + half[:, None] * _gl_nodes[None, :]).ravel()
    w = (half[:, None] * _gl_weights[None, :]).ravel()
    vals = gaussian_pdf(t) * gaussian_tail((B - c * t) / s)
    return float(min(max(w @ vals, 0.0), gaussian_tail(B)))


class PairProbMatrix(SymMatrix):
    """P_ij = Pr[w^T x_i >= B, w^T x_j >= B]; the diagonal holds p0 = Q(B)."""

    __slots__ = ()

    @property
    def p0(self):
        return float(self.entries[0, 0])

    def offdiag(self):
        n = self.n
        return self.entries[~np.eye(n, dtype=bool)]

    def min_offdiag(self):
        if self.n < 2:
            return 0.0
        return float(self.offdiag().min())


def _correlations(X):
    X = X.X if isinstance(X, Dataset) else np.asarray(X, dtype=np.float64)
    norms = np.linalg.norm(X, axis=0)
    if np.any(np.abs(norms - 1.0) > 1e-9):
        raise InvalidInputError("limiting kernel needs unit-norm columns")
    return np.clip(X.T @ X, -1.0, 1.0)


def pair_prob_matrix(X, B):
    C = _correlations(X)
    n = C.shape[0]
    P = np.empty((n, n))
    np.fill_diagonal(P, float(gaussian_tail(B)))
    for i in range(n):
        for j in range(i + 1, n):
            P[i, j] = P[j, i] = pair_activation_probability(C[i, j], B)
    return PairProbMatrix(P)


def limiting_ntk_quadrature(X, B):
    C = _correlations(X)
    P = pair_prob_matrix(X, B).entries
    return SymMatrix((C + 1.0) * P)


def limiting_ntk_closed_form_b0(X):
    """Hinf at B = 0: (c + 1) (pi - arccos c) / (2 pi)."""
    C = _correlations(X)
    return SymMatrix((C + 1.0) * (np.pi - np.arccos(C)) / (2.0 * np.pi))


def limiting_ntk_mc(X, B, samples, stream, chunk=65536, return_stderr=False):
    """Monte Carlo Hinf sharing the same Gaussian draws across all entries.

    Each draw contributes the PSD matrix (X^T X + 1) * (v v^T), v = 1[X^T w >= B],
    and chunks are accumulated in a fixed order.
    """
    X = X.X if isinstance(X, Dataset) else np.asarray(X, dtype=np.float64)
    if samples < 1:
        raise InvalidInputError("samples must be >= 1")
    d, n = X.shape
    acc = np.zeros((n, n))
    done = 0
    k = 0
    while done < samples:
        size = min(chunk, samples - done)
        Wk = stream.child(k).gaussian(size * d).reshape(size, d)
        ind = (Wk @ X >= B).astype(np.float64)
        acc += ind.T @ ind
        done += size
        k += 1
    Pm = acc / samples
    K = X.T @ X + 1.0
    H = SymMatrix(K * Pm)
    if not return_stderr:
        return H
    se = np.abs(K) * np.sqrt(np.clip(Pm * (1.0 - Pm), 0.0, None) / samples)
    return H, se


def empirical_ntk(model, X):
    """H_ij = (1/m) sum_r (<x_i, x_j> + 1) 1[r active on i] 1[r active on j]."""
    X = X.X if isinstance(X, Dataset) else np.asarray(X, dtype=np.float64)
    M = activation_mask(model, X).astype(np.float64)
    return SymMatrix((X.T @ X + 1.0) * (M.T @ M) / model.m)


def feature_matrix_Z(model, X):
    """The m(d+1) x n matrix whose block (r, i) is m^{-1/2} 1[r active on i] a_r [x_i; -1]."""
    X = X.X if isinstance(X, Dataset) else np.asarray(X, dtype=np.float64)
    M = activation_mask(model, X).astype(np.float64)
    n = X.shape[1]
    Xt = np.vstack([X, -np.ones((1, n))])
    coef = model.scale * M * model.a[:, None]
    Z = coef[:, None, :] * Xt[None, :, :]
    return Z.reshape(model.m * (model.d + 1), n)


# --------------------------------------------------------------------------
# Export
# --------------------------------------------------------------------------

def kernel_to_csv(H, path):
    H = np.asarray(H)
    with open(path, "w") as fh:
        fh.write(f"{H.shape[0]}\n")
        for row in H:
            fh.write(",".join(repr(float(v)) for v in row) + "\n")


def kernel_from_csv(path):
    with open(path) as fh:
        lines = [ln.strip() for ln in fh if ln.strip()]
    n = int(lines[0])
    rows = [[float(v) for v in ln.split(",")] for ln in lines[1:]]
    if len(rows) != n or any(len(r) != n for r in rows):
        raise InvalidInputError(f"{path}: expected {n} rows of {n} entries")
    return SymMatrix(rows)


def kernel_to_json(H, B, method):
    H = np.asarray(H)
    return json.dumps({"n": int(H.shape[0]), "B": float(B), "method": method,
                       "entries": H.tolist()}, sort_keys=True)
