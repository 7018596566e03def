"""Datasets: synthetic generators, MNIST IDX ingestion, CSV persistence.

A :class:`Dataset` stores features column-wise (``X`` is ``d x n``) with every
column scaled to unit norm, and a response vector ``y`` of length ``n``.

CSV layout written by :func:`save_csv`::

    d,n,y_max
    <d>,<n>,<y_max>
    y,x_1,...,x_d          <- one row per example, n rows

Floats are written with ``repr`` so a save/load round trip is exact.
"""

import csv
from dataclasses import dataclass, field
import logging
import math
import struct

import numpy as np

from .errors import CapacityError, DomainError, FormatError, InvalidInputError

log = logging.getLogger(__name__)

IDX_IMAGES_MAGIC = 0x00000803
IDX_LABELS_MAGIC = 0x00000801

_UNIT_TOL = 1e-12


@dataclass
class Dataset:
    X: np.ndarray
    y: np.ndarray
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        self.X = np.ascontiguousarray(self.X, dtype=np.float64)
        self.y = np.ascontiguousarray(self.y, dtype=np.float64).reshape(-1)
        if self.X.ndim != 2:
            raise InvalidInputError("X must be a d x n matrix")
        if self.X.shape[1] != self.y.shape[0]:
            raise InvalidInputError(
                f"X has {self.X.shape[1]} columns but y has {self.y.shape[0]} entries"
            )
        self.meta.setdefault("y_max", float(np.max(np.abs(self.y))) if self.n else 0.0)

    @property
    def d(self):
        return self.X.shape[0]

    @property
    def n(self):
        return self.X.shape[1]

    @property
    def Xt(self):
        """Row-major ``n x d`` view used by the kernels."""
        return np.ascontiguousarray(self.X.T)

    def column_norms(self):
        return np.linalg.norm(self.X, axis=0)

    def is_unit_norm(self, tol=_UNIT_TOL):
        return bool(np.all(np.abs(self.column_norms() - 1.0) <= tol))

    def require_unit_norm(self, tol=1e-9):
        if not self.is_unit_norm(tol):
            worst = float(np.max(np.abs(self.column_norms() - 1.0)))
            raise InvalidInputError(f"dataset columns must have unit norm (worst deviation {worst:.3g})")

    def with_y(self, y):
        return Dataset(self.X, y, dict(self.meta))


def _normalize_columns(X):
    return X / np.linalg.norm(X, axis=0, keepdims=True)


def _teacher(d, stream):
    w = stream.gaussian(d)
    return w / np.linalg.norm(w)


def gen_linear_teacher(d, n, stream):
    """Gaussian inputs projected to the sphere; ``y = w^T x`` for a unit teacher ``w``.

    The response is computed on the normalized inputs, so ``|y| <= 1``.
    """
    if d < 1 or n < 1:
        raise DomainError("need d >= 1 and n >= 1")
    X = _normalize_columns(stream.child(1).gaussian(d * n).reshape(n, d).T)
    w = _teacher(d, stream.child(2))
    return Dataset(X, w @ X, {"name": "linear_teacher", "seed": stream.master_seed,
                              "stream": stream.stream_id, "d": d, "n": n})


def separation(X):
    """min over pairs of min(||x_i - x_j||, ||x_i + x_j||) for unit columns."""
    n = X.shape[1]
    best = np.inf
    for i in range(n - 1):
        rest = X[:, i + 1:]
        dm = np.linalg.norm(rest - X[:, i:i + 1], axis=0)
        dp = np.linalg.norm(rest + X[:, i:i + 1], axis=0)
        best = min(best, float(np.min(np.minimum(dm, dp))))
    return best


def gen_separated(d, n, min_sep, stream, max_tries=10_000):
    """Rejection-sample unit vectors whose pairwise separation is at least ``min_sep``.

    Each candidate is kept only if ``min(||x - x_j||, ||x + x_j||) >= min_sep``
    against every accepted point; one candidate consumes one try. Separation
    ``sqrt(2)`` forces exact orthogonality, which rejection cannot hit, so
    that case is built by Gram-Schmidt instead.
    """
    if not 0 < min_sep <= math.sqrt(2) + 1e-15:
        raise DomainError("min_sep must lie in (0, sqrt(2)]")
    if n < 1 or d < 1:
        raise DomainError("need d >= 1 and n >= 1")
    # <x, x_j>^2 <= (1 - min_sep^2 / 2)^2
    max_abs_corr = 1.0 - 0.5 * min_sep * min_sep
    if max_abs_corr <= 1e-12:
        if n > d:
            raise CapacityError(f"only {d} of {n} points with separation sqrt(2) fit in dimension {d}",
                                achieved=d)
        X = gen_orthonormal(d, n, stream).X
        tries = n
    else:
        X, tries = _reject(d, n, max_abs_corr, min_sep, stream, max_tries)
    w = _teacher(d, stream.child(2))
    y = np.clip(w @ X, -1.0, 1.0)
    return Dataset(X, y, {"name": "separated", "seed": stream.master_seed,
                          "stream": stream.stream_id, "d": d, "n": n,
                          "min_sep": min_sep, "tries": tries})


def _reject(d, n, max_abs_corr, min_sep, stream, max_tries):
    draws = stream.child(1)
    batch = 256
    accepted = []
    tries = 0
    offset_tag = 0
    while len(accepted) < n and tries < max_tries:
        C = draws.child(offset_tag).gaussian(batch * d).reshape(batch, d)
        offset_tag += 1
        C /= np.linalg.norm(C, axis=1, keepdims=True)
        for x in C:
            if tries >= max_tries or len(accepted) >= n:
                break
            tries += 1
            if accepted:
                corr = np.abs(np.asarray(accepted) @ x)
                if np.any(corr > max_abs_corr - 1e-14):  # keep a rounding margin
                    continue
            accepted.append(x)
    if len(accepted) < n:
        raise CapacityError(
            f"only {len(accepted)} of {n} points with separation {min_sep} after {max_tries} tries",
            achieved=len(accepted),
        )
    return np.asarray(accepted).T, tries


def gen_orthonormal(d, n, stream):
    """``n`` orthonormal columns by modified Gram-Schmidt on Gaussian draws."""
    if n > d:
        raise DomainError(f"cannot place {n} orthonormal vectors in dimension {d}")
    G = stream.child(1).gaussian(d * n).reshape(n, d).T
    Q = np.zeros((d, n))
    for j in range(n):
        v = G[:, j].copy()
        for _ in range(2):
            for k in range(j):
                v -= (Q[:, k] @ v) * Q[:, k]
        Q[:, j] = v / np.linalg.norm(v)
    w = _teacher(d, stream.child(2))
    return Dataset(Q, w @ Q, {"name": "orthonormal", "seed": stream.master_seed,
                              "stream": stream.stream_id, "d": d, "n": n})


# --------------------------------------------------------------------------
# MNIST IDX
# --------------------------------------------------------------------------

def _read_header(buf, fields, magic, what):
    if len(buf) >= 4:
        found = struct.unpack(">I", buf[:4])[0]
        if found != magic:
            raise FormatError(f"{what} file has magic 0x{found:08x}, expected 0x{magic:08x}", offset=0)
    need = 4 * fields
    if len(buf) < need:
        raise FormatError(f"{what} file truncated inside header", offset=len(buf))
    return struct.unpack(f">{fields}I", buf[:need])


def read_idx_images(path):
    with open(path, "rb") as fh:
        buf = fh.read()
    _, count, rows, cols = _read_header(buf, 4, IDX_IMAGES_MAGIC, "images")
    size = count * rows * cols
    if len(buf) < 16 + size:
        raise FormatError(f"images file truncated: need {16 + size} bytes", offset=len(buf))
    return np.frombuffer(buf, dtype=np.uint8, count=size, offset=16).reshape(count, rows, cols)


def read_idx_labels(path):
    with open(path, "rb") as fh:
        buf = fh.read()
    _, count = _read_header(buf, 2, IDX_LABELS_MAGIC, "labels")
    if len(buf) < 8 + count:
        raise FormatError(f"labels file truncated: need {8 + count} bytes", offset=len(buf))
    return np.frombuffer(buf, dtype=np.uint8, count=count, offset=8)


def write_idx(images_path, labels_path, images, labels):
    """Write uint8 images ``(count, rows, cols)`` and labels in IDX format."""
    images = np.asarray(images, dtype=np.uint8)
    labels = np.asarray(labels, dtype=np.uint8)
    count, rows, cols = images.shape
    with open(images_path, "wb") as fh:
        fh.write(struct.pack(">4I", IDX_IMAGES_MAGIC, count, rows, cols))
        fh.write(images.tobytes())
    with open(labels_path, "wb") as fh:
        fh.write(struct.pack(">2I", IDX_LABELS_MAGIC, labels.shape[0]))
        fh.write(labels.tobytes())


def _dedupe(X, tol=1e-9):
    """Drop columns that duplicate or negate an earlier column within ``tol``."""
    keep = []
    for j in range(X.shape[1]):
        x = X[:, j]
        if keep:
            K = X[:, keep]
            if np.any(np.abs(np.abs(K.T @ x) - 1.0) <= tol):
                continue
        keep.append(j)
    return np.asarray(keep, dtype=np.int64)


def load_mnist_idx(images_path, labels_path, limit=None, positive_class=0):
    """One-vs-rest MNIST regression set: unit-norm flattened images, y in {-1, +1}."""
    images = read_idx_images(images_path)
    labels = read_idx_labels(labels_path)
    if images.shape[0] != labels.shape[0]:
        raise FormatError(f"{images.shape[0]} images but {labels.shape[0]} labels")
    if limit is not None:
        images = images[:limit]
        labels = labels[:limit]
    X = images.reshape(images.shape[0], -1).astype(np.float64).T
    norms = np.linalg.norm(X, axis=0)
    blank = norms == 0.0
    if blank.any():
        log.warning("dropping %d all-black images", int(blank.sum()))
    X = X[:, ~blank] / norms[~blank]
    labels = labels[~blank]
    keep = _dedupe(X)
    dropped = X.shape[1] - keep.size
    X = X[:, keep]
    y = np.where(labels[keep] == positive_class, 1.0, -1.0)
    return Dataset(X, y, {"name": "mnist", "positive_class": int(positive_class),
                          "blank_dropped": int(blank.sum()), "duplicates_dropped": int(dropped)})


# --------------------------------------------------------------------------
# CSV
# --------------------------------------------------------------------------

def save_csv(data, path):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["d", "n", "y_max"])
        w.writerow([data.d, data.n, repr(float(data.meta.get("y_max", 0.0)))])
        w.writerow(["y"] + [f"x_{k + 1}" for k in range(data.d)])
        for i in range(data.n):
            w.writerow([repr(float(data.y[i]))] + [repr(float(v)) for v in data.X[:, i]])


def load_csv(path):
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows:
        raise FormatError(f"{path}: empty file (line 1)")
    if rows[0] != ["d", "n", "y_max"]:
        raise FormatError(f"{path}: line 1: expected header 'd,n,y_max'")
    try:
        d, n = int(rows[1][0]), int(rows[1][1])
        y_max = float(rows[1][2])
    except (IndexError, ValueError) as exc:
        raise FormatError(f"{path}: line 2: bad shape row ({exc})") from None
    body = rows[3:]
    if len(body) != n:
        raise FormatError(f"{path}: expected {n} data rows, found {len(body)}")
    X = np.empty((d, n))
    y = np.empty(n)
    for i, row in enumerate(body):
        lineno = i + 4
        if len(row) != d + 1:
            raise FormatError(f"{path}: line {lineno}: expected {d + 1} fields, got {len(row)}")
        try:
            vals = [float(v) for v in row]
        except ValueError as exc:
            raise FormatError(f"{path}: line {lineno}: {exc}") from None
        y[i] = vals[0]
        X[:, i] = vals[1:]
    return Dataset(X, y, {"name": "csv", "y_max": y_max})
