"""One-hidden-layer ReLU network with a trainable constant-initialized bias.

    f(x; W, b) = m^{-1/2} sum_r a_r relu(<w_r, x> - b_r)

The output signs ``a`` are fixed at initialization; only ``W`` and ``b``
train. A neuron counts as active on ``x`` when ``<w_r, x> - b_r >= 0`` (the
boundary is active), and the same indicator drives the gradients, the NTK
and the feature matrix.

Checkpoint format (little-endian after the magic)::

    b"SNTK" | u32 version | u64 m | u64 d | f64[m*d] W (row-major) | f64[m] b | i8[m] a
"""

from dataclasses import dataclass
import struct

import numpy as np

from .errors import FormatError, InvalidInputError
from .numerics import RngStream

CHECKPOINT_MAGIC = b"SNTK"
CHECKPOINT_VERSION = 1
_HEADER = struct.Struct("<4sIQQ")


@dataclass(frozen=True)
class InitScheme:
    kind: str = "standard"
    B: float = 0.0
    seed: int = 0

    def __post_init__(self):
        if self.kind not in ("standard", "symmetric"):
            raise InvalidInputError(f"unknown init kind {self.kind!r}")
        if not self.B >= 0:
            raise InvalidInputError("bias init B must be >= 0")


class ModelState:
    """Snapshot of the network parameters. Arrays are read-only."""

    __slots__ = ("W", "b", "a")

    def __init__(self, W, b, a):
        W = np.array(W, dtype=np.float64, order="C")
        b = np.array(b, dtype=np.float64).reshape(-1)
        a = np.array(a, dtype=np.float64).reshape(-1)
        if W.ndim != 2 or W.shape[0] < 1 or W.shape[1] < 1:
            raise InvalidInputError(f"W must be m x d with m, d >= 1, got {W.shape}")
        if b.shape != (W.shape[0],) or a.shape != (W.shape[0],):
            raise InvalidInputError("b and a must have one entry per neuron")
        if not np.all(np.abs(a) == 1.0):
            raise InvalidInputError("output signs a must be +1 or -1")
        if not (np.all(np.isfinite(W)) and np.all(np.isfinite(b))):
            raise InvalidInputError("parameters must be finite")
        for arr in (W, b, a):
            arr.setflags(write=False)
        self.W, self.b, self.a = W, b, a

    @property
    def m(self):
        return self.W.shape[0]

    @property
    def d(self):
        return self.W.shape[1]

    @property
    def scale(self):
        return 1.0 / np.sqrt(self.m)

    def replace(self, W=None, b=None):
        return ModelState(self.W if W is None else W, self.b if b is None else b, self.a)

    def __eq__(self, other):
        if not isinstance(other, ModelState):
            return NotImplemented
        return (np.array_equal(self.W, other.W) and np.array_equal(self.b, other.b)
                and np.array_equal(self.a, other.a))

    def __repr__(self):
        return f"ModelState(m={self.m}, d={self.d})"


def init(scheme, m, d):
    """Gaussian weights, random output signs, every bias equal to ``scheme.B``.

    The symmetric scheme draws ``m`` neurons and appends a mirrored copy with
    the same weights and negated signs, returning ``2m`` neurons whose output
    is identically zero.
    """
    if m < 1 or d < 1:
        raise InvalidInputError("need m >= 1 and d >= 1")
    stream = RngStream(scheme.seed, 0)
    W = stream.child(1).gaussian(m * d).reshape(m, d)
    a = stream.child(2).signs(m)
    if scheme.kind == "symmetric":
        W = np.vstack([W, W])
        a = np.concatenate([a, -a])
    b = np.full(W.shape[0], float(scheme.B))
    return ModelState(W, b, a)


def _check_dim(model, X):
    X = np.asarray(X, dtype=np.float64)
    if X.shape[0] != model.d:
        raise InvalidInputError(f"input dimension {X.shape[0]} does not match model d={model.d}")
    return X


def _features(data):
    return data.X if hasattr(data, "X") else np.asarray(data, dtype=np.float64)


def preactivations(model, X):
    """``m x n`` matrix of ``<w_r, x_i> - b_r``."""
    X = _check_dim(model, _features(X))
    return model.W @ X - model.b[:, None]


def activation_mask(model, X):
    return preactivations(model, X) >= 0.0


def forward_batch(model, X):
    P = preactivations(model, X)
    return model.scale * (model.a @ np.maximum(P, 0.0))


def forward(model, x):
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 1:
        raise InvalidInputError("forward takes a single input vector")
    return float(forward_batch(model, x[:, None])[0])


def residual(model, data):
    return forward_batch(model, data.X) - data.y


def loss(model, data):
    r = residual(model, data)
    return 0.5 * float(r @ r)


def gradients(model, data):
    """Gradients of the loss with respect to ``W`` and ``b``.

    gW_r =  m^{-1/2} a_r sum_i (f_i - y_i) 1[r active on i] x_i
    gb_r = -m^{-1/2} a_r sum_i (f_i - y_i) 1[r active on i]
    """
    P = preactivations(model, data.X)
    M = P >= 0.0
    r = model.scale * (model.a @ np.where(M, P, 0.0)) - data.y
    G = np.where(M, r[None, :], 0.0)
    coef = model.scale * model.a
    gW = coef[:, None] * (G @ data.X.T)
    gb = -coef * G.sum(axis=1)
    return gW, gb


def param_distance(model, origin):
    """(max_r ||w_r - w_r0||, max_r |b_r - b_r0|, ||[W, b] - [W0, b0]||_F)."""
    if model.W.shape != origin.W.shape:
        raise InvalidInputError(f"shape mismatch {model.W.shape} vs {origin.W.shape}")
    dW = model.W - origin.W
    db = model.b - origin.b
    row = np.sqrt(np.einsum("ij,ij->i", dW, dW))
    fro = float(np.sqrt(np.sum(row * row) + db @ db))
    return float(row.max()), float(np.abs(db).max()), fro


def save_checkpoint(model, path):
    with open(path, "wb") as fh:
        fh.write(_HEADER.pack(CHECKPOINT_MAGIC, CHECKPOINT_VERSION, model.m, model.d))
        fh.write(model.W.astype("<f8").tobytes())
        fh.write(model.b.astype("<f8").tobytes())
        fh.write(model.a.astype(np.int8).tobytes())


def load_checkpoint(path):
    with open(path, "rb") as fh:
        buf = fh.read()
    if len(buf) < _HEADER.size:
        raise FormatError("checkpoint truncated inside header", offset=len(buf))
    magic, version, m, d = _HEADER.unpack_from(buf)
    if magic != CHECKPOINT_MAGIC:
        raise FormatError(f"bad checkpoint magic {magic!r}", offset=0)
    if version != CHECKPOINT_VERSION:
        raise FormatError(f"unsupported checkpoint version {version}", offset=4)
    need = _HEADER.size + 8 * m * d + 8 * m + m
    if len(buf) != need:
        raise FormatError(f"checkpoint has {len(buf)} bytes, expected {need}", offset=min(len(buf), need))
    off = _HEADER.size
    W = np.frombuffer(buf, dtype="<f8", count=m * d, offset=off).reshape(m, d)
    off += 8 * m * d
    b = np.frombuffer(buf, dtype="<f8", count=m, offset=off)
    off += 8 * m
    a = np.frombuffer(buf, dtype=np.int8, count=m, offset=off).astype(np.float64)
    try:
        return ModelState(W, b, a)
    except InvalidInputError as exc:
        raise FormatError(f"checkpoint payload invalid: {exc}") from None
