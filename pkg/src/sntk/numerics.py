"""Small dense symmetric linear algebra and reproducible Gaussian sampling.

Random numbers come from a counter-based SplitMix64 stream so that a
``(master_seed, stream_id)`` pair maps to the same sequence everywhere:

* key  = mix64(master_seed ^ mix64(stream_id + GOLDEN))
* word k (k = 0, 1, ...) = mix64(key + (k + 1) * GOLDEN)   (mod 2**64)
* uniform in (0, 1]: ((word >> 11) + 1) * 2**-53
* normals: Box-Muller on consecutive uniform pairs (u1, u2), emitting
  sqrt(-2 ln u1) cos(2 pi u2) then sqrt(-2 ln u1) sin(2 pi u2).

``mix64`` is the SplitMix64 finalizer with multipliers 0xBF58476D1CE4E5B9
and 0x94D049BB133111EB and shifts 30, 27, 31.
"""

from dataclasses import dataclass
import math

import numpy as np

from . import kernels
from .errors import InvalidInputError, SingularMatrixError

GOLDEN = np.uint64(0x9E3779B97F4A7C15)
_M1 = np.uint64(0xBF58476D1CE4E5B9)
_M2 = np.uint64(0x94D049BB133111EB)
_TWO_M53 = 2.0 ** -53


class SymMatrix:
    """An immutable, exactly symmetric real matrix.

    The input is symmetrized as ``(A + A.T) / 2`` which leaves an already
    symmetric array bit-identical.
    """

    __slots__ = ("_a",)

    def __init__(self, entries):
        if isinstance(entries, SymMatrix):
            self._a = entries._a
            return
        a = np.array(entries, dtype=np.float64)
        if a.ndim == 0:
            a = a.reshape(1, 1)
        if a.ndim != 2 or a.shape[0] != a.shape[1] or a.shape[0] < 1:
            raise InvalidInputError(f"expected a nonempty square matrix, got shape {a.shape}")
        if not np.all(np.isfinite(a)):
            raise InvalidInputError("matrix has non-finite entries")
        a = 0.5 * (a + a.T)
        a.setflags(write=False)
        self._a = a

    @property
    def n(self):
        return self._a.shape[0]

    @property
    def entries(self):
        return self._a

    def __array__(self, dtype=None, copy=None):
        return self._a if dtype is None else self._a.astype(dtype)

    def __repr__(self):
        return f"SymMatrix(n={self.n})"


def as_sym(M):
    return M if isinstance(M, SymMatrix) else SymMatrix(M)


def eigh(M, tol=1e-12, backend=None):
    """All eigenpairs of ``M`` (ascending) via cyclic Jacobi."""
    M = as_sym(M)
    w, V, _ = kernels.jacobi_eigh(M.entries, tol=tol, backend=backend)
    return w, V


def eigvalsh(M, tol=1e-12, backend=None):
    return eigh(M, tol=tol, backend=backend)[0]


def smallest_eigenvalue(M, tol=1e-12, backend=None):
    if not tol > 0:
        raise InvalidInputError("tol must be positive")
    return float(eigvalsh(M, tol=tol, backend=backend)[0])


def largest_eigenvalue(M, tol=1e-12, backend=None):
    return float(eigvalsh(M, tol=tol, backend=backend)[-1])


def spectral_norm(M, tol=1e-12, backend=None):
    w = eigvalsh(M, tol=tol, backend=backend)
    return float(max(abs(w[0]), abs(w[-1])))


def frobenius_norm(M):
    a = as_sym(M).entries
    return float(math.sqrt(np.sum(a * a)))


def cholesky(M, ridge=0.0, backend=None):
    """Lower Cholesky factor of ``M + ridge*I``.

    Raises SingularMatrixError naming the first non-positive pivot.
    """
    M = as_sym(M)
    if ridge < 0:
        raise InvalidInputError("ridge must be nonnegative")
    A = M.entries + ridge * np.eye(M.n)
    L, bad = kernels.cholesky(A, backend=backend)
    if bad >= 0:
        raise SingularMatrixError(
            f"matrix + {ridge:g}*I is not positive definite: pivot {bad} is non-positive",
            pivot=bad,
        )
    return L


def _forward_sub(L, y):
    n = L.shape[0]
    z = np.empty(n)
    for i in range(n):
        z[i] = (y[i] - L[i, :i] @ z[:i]) / L[i, i]
    return z


def quadratic_form_inverse(M, y, ridge=0.0, backend=None):
    """``y^T (M + ridge I)^{-1} y`` through a Cholesky factor.

    With ``M + ridge I = L L^T`` the value is ``||L^{-1} y||^2``.
    """
    M = as_sym(M)
    y = np.asarray(y, dtype=np.float64)
    if y.shape != (M.n,):
        raise InvalidInputError(f"vector length {y.shape} does not match matrix size {M.n}")
    L = cholesky(M, ridge=ridge, backend=backend)
    z = _forward_sub(L, y)
    return float(z @ z)


# --------------------------------------------------------------------------
# Random streams
# --------------------------------------------------------------------------

def _mix64(z):
    z = np.asarray(z, dtype=np.uint64)
    with np.errstate(over="ignore"):
        z = (z ^ (z >> np.uint64(30))) * _M1
        z = (z ^ (z >> np.uint64(27))) * _M2
    return z ^ (z >> np.uint64(31))


def _u64(x):
    return np.uint64(int(x) & 0xFFFFFFFFFFFFFFFF)


@dataclass(frozen=True)
class RngStream:
    master_seed: int
    stream_id: int = 0

    @property
    def key(self):
        with np.errstate(over="ignore"):
            inner = _mix64(_u64(self.stream_id) + GOLDEN)
        return _mix64(_u64(self.master_seed) ^ inner)

    def child(self, tag):
        """A stream statistically independent of this one, derived from ``tag``."""
        with np.errstate(over="ignore"):
            sid = int(_mix64(_u64(self.stream_id) * GOLDEN + _u64(tag) + np.uint64(1)))
        return RngStream(self.master_seed, sid)

    def words(self, count, offset=0):
        k = np.arange(offset + 1, offset + count + 1, dtype=np.uint64)
        with np.errstate(over="ignore"):
            return _mix64(self.key + k * GOLDEN)

    def uniform(self, count, offset=0):
        """``count`` uniforms in (0, 1]."""
        w = self.words(count, offset)
        return ((w >> np.uint64(11)).astype(np.float64) + 1.0) * _TWO_M53

    def gaussian(self, count):
        return gaussian_sample(self, count)

    def signs(self, count):
        """Uniform draws from {-1, +1}."""
        return np.where(self.uniform(count) <= 0.5, 1.0, -1.0)


def gaussian_sample(stream, count):
    """``count`` i.i.d. N(0, 1) draws, reproducible per ``stream``."""
    if count < 0:
        raise InvalidInputError("count must be nonnegative")
    if count == 0:
        return np.empty(0)
    pairs = (count + 1) // 2
    u = stream.uniform(2 * pairs)
    u1 = u[0::2]
    u2 = u[1::2]
    rad = np.sqrt(-2.0 * np.log(u1))
    ang = 2.0 * np.pi * u2
    out = np.empty(2 * pairs)
    out[0::2] = rad * np.cos(ang)
    out[1::2] = rad * np.sin(ang)
    return out[:count]
