"""Full-batch gradient descent with a dense and an active-set execution path.

A neuron that is inactive on every training example receives an exactly
zero gradient, so it never moves again and stays inactive. The sparse path
therefore only has to visit the neurons active on at least one example and
can drop neurons from the active list for good once their count reaches
zero. A full rescan every ``audit_every`` steps guards that invariant.
"""

import csv
from dataclasses import dataclass, field
import logging

import numpy as np

from . import kernels
from .errors import DivergenceError, InvalidInputError, MissingDataError, StaleIndexError
from .model import ModelState, gradients, param_distance, preactivations
from .ntk import empirical_ntk

log = logging.getLogger(__name__)

DIVERGENCE_FACTOR = 1e6
TRACE_COLUMNS = ("step", "loss", "min_active", "max_active", "mean_active", "rw_max", "rb_max", "fro")


@dataclass
class TrainConfig:
    eta: float
    steps: int
    path: str = "dense"
    track_flips: bool = True
    track_masks: bool = False
    track_residuals: bool = True
    ntk_snapshot_every: int = 0
    audit_every: int = 50
    backend: str = None

    def __post_init__(self):
        if not self.eta > 0:
            raise InvalidInputError("eta must be > 0")
        if self.steps < 0:
            raise InvalidInputError("steps must be >= 0")
        if self.path not in ("dense", "sparse"):
            raise InvalidInputError(f"path must be 'dense' or 'sparse', got {self.path!r}")


@dataclass
class TrainTrace:
    loss_history: list = field(default_factory=list)
    active_counts: list = field(default_factory=list)
    movement: list = field(default_factory=list)
    residuals: list = None
    flipped: np.ndarray = None
    masks: list = None
    snapshots: list = None
    eta: float = None

    @property
    def steps(self):
        return len(self.loss_history) - 1

    @property
    def flipped_sets(self):
        """Per-example arrays of neuron indices that flipped at least once."""
        if self.flipped is None:
            raise MissingDataError("trace was recorded without flip tracking")
        return [np.flatnonzero(self.flipped[:, i]) for i in range(self.flipped.shape[1])]

    def active_matrix(self):
        return np.asarray(self.active_counts, dtype=np.int64)

    def movement_matrix(self):
        return np.asarray(self.movement, dtype=np.float64).reshape(-1, 3)

    def residual_matrix(self):
        if self.residuals is None:
            raise MissingDataError("trace was recorded without residuals")
        return np.asarray(self.residuals)

    def sq_residual_norms(self):
        return 2.0 * np.asarray(self.loss_history)

    def to_csv(self, path):
        counts = self.active_matrix()
        mv = self.movement_matrix()
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(TRACE_COLUMNS)
            for t, L in enumerate(self.loss_history):
                c = counts[t]
                w.writerow([t, repr(float(L)), int(c.min()), int(c.max()), repr(float(c.mean())),
                            repr(float(mv[t, 0])), repr(float(mv[t, 1])), repr(float(mv[t, 2]))])


class ActiveSetIndex:
    """Per-neuron activation counts and the list of neurons active somewhere.

    An index is bound to the exact ModelState it was computed for; using it
    with any other state raises StaleIndexError.
    """

    __slots__ = ("counts", "active", "_model")

    def __init__(self, counts, model):
        self.counts = np.asarray(counts, dtype=np.int64)
        self.active = np.flatnonzero(self.counts >= 1).astype(np.int64)
        self._model = model

    @classmethod
    def build(cls, model, data, backend=None):
        counts = kernels.active_counts(model.W, model.b, data.Xt, backend=backend)
        return cls(counts, model)

    def bound_to(self, model):
        return self._model is model

    def verify(self, model, data, backend=None):
        fresh = kernels.active_counts(model.W, model.b, data.Xt, backend=backend)
        if not np.array_equal(fresh, self.counts):
            bad = np.flatnonzero(fresh != self.counts)
            raise StaleIndexError(f"active-set counts disagree with a full rescan at neurons {bad[:8].tolist()}")

    def __len__(self):
        return int(self.active.size)


def _check_finite(loss_value, step):
    if not np.isfinite(loss_value):
        raise DivergenceError(f"loss became non-finite at step {step}", step)


def gd_step_dense(model, data, eta):
    gW, gb = gradients(model, data)
    if not (np.all(np.isfinite(gW)) and np.all(np.isfinite(gb))):
        raise DivergenceError("non-finite gradient", step=0)
    return model.replace(W=model.W - eta * gW, b=model.b - eta * gb)


def gd_step_sparse(model, data, eta, index, backend=None):
    if not index.bound_to(model):
        raise StaleIndexError("active-set index was built for a different model state")
    if index.active.size == 0:
        return model, index
    W = model.W.copy()
    b = model.b.copy()
    _, _, counts = kernels.sparse_step(W, b, model.a, data.Xt, data.y, index.active,
                                       eta, model.scale, backend=backend)
    if not (np.all(np.isfinite(W[index.active])) and np.all(np.isfinite(b[index.active]))):
        raise DivergenceError("non-finite parameters after sparse step", step=0)
    new_counts = index.counts.copy()
    new_counts[index.active] = counts
    new_model = ModelState(W, b, model.a)
    return new_model, ActiveSetIndex(new_counts, new_model)


class _Recorder:
    def __init__(self, origin, data, cfg):
        self.origin = origin
        self.data = data
        self.cfg = cfg
        self.trace = TrainTrace(eta=cfg.eta)
        if cfg.track_residuals:
            self.trace.residuals = []
        if cfg.track_masks:
            self.trace.masks = []
        if cfg.ntk_snapshot_every:
            self.trace.snapshots = []
        self.mask0 = preactivations(origin, data.X) >= 0.0
        if cfg.track_flips:
            self.trace.flipped = np.zeros_like(self.mask0)
        self.loss0 = None

    def observe_params(self, t, W, b):
        tr = self.trace
        state = ModelState(W, b, self.origin.a)
        tr.movement.append(param_distance(state, self.origin))
        every = self.cfg.ntk_snapshot_every
        if every and t % every == 0:
            tr.snapshots.append((t, empirical_ntk(state, self.data.X)))

    def observe_outputs(self, t, f, rows, P_rows):
        """Record outputs of state ``t``; ``P_rows`` are the preactivations of ``rows``.

        Neurons outside ``rows`` are inactive on every example.
        """
        tr = self.trace
        r = f - self.data.y
        L = 0.5 * float(r @ r)
        _check_finite(L, t)
        if self.loss0 is None:
            self.loss0 = L
        elif L > DIVERGENCE_FACTOR * max(self.loss0, 1e-300):
            raise DivergenceError(f"loss {L:.3g} exceeded {DIVERGENCE_FACTOR:g} x initial at step {t}", t)
        tr.loss_history.append(L)
        M_rows = P_rows >= 0.0
        tr.active_counts.append(np.count_nonzero(M_rows, axis=0).astype(np.int64))
        if tr.residuals is not None:
            tr.residuals.append(r)
        if tr.flipped is not None or tr.masks is not None:
            M = np.zeros_like(self.mask0)
            M[rows] = M_rows
            if tr.flipped is not None:
                tr.flipped |= M != self.mask0
            if tr.masks is not None:
                tr.masks.append(M)


def train(model, data, cfg):
    """Run ``cfg.steps`` full-batch GD steps, returning the final state and trace."""
    if data.d != model.d:
        raise InvalidInputError(f"data dimension {data.d} does not match model d={model.d}")
    rec = _Recorder(model, data, cfg)
    W = model.W.copy()
    b = model.b.copy()
    a = model.a
    scale = model.scale
    Xt = data.Xt
    eta = cfg.eta
    all_rows = np.arange(model.m)

    if cfg.path == "dense":
        for t in range(cfg.steps + 1):
            P = W @ data.X - b[:, None]
            M = P >= 0.0
            f = scale * (a @ np.where(M, P, 0.0))
            rec.observe_params(t, W, b)
            rec.observe_outputs(t, f, all_rows, P)
            if t == cfg.steps:
                break
            G = np.where(M, (f - data.y)[None, :], 0.0)
            coef = eta * scale * a
            W -= coef[:, None] * (G @ Xt)
            b += coef * G.sum(axis=1)
    else:
        counts = kernels.active_counts(W, b, Xt, backend=cfg.backend)
        active = np.flatnonzero(counts >= 1).astype(np.int64)
        for t in range(cfg.steps + 1):
            if t == cfg.steps:
                P = W[active] @ data.X - b[active][:, None]
                f = scale * (a[active] @ np.maximum(P, 0.0))
                rec.observe_params(t, W, b)
                rec.observe_outputs(t, f, active, P)
                break
            rec.observe_params(t, W, b)
            f, P, c_active = kernels.sparse_step(W, b, a, Xt, data.y, active, eta, scale,
                                                 backend=cfg.backend)
            rec.observe_outputs(t, f, active, P)
            counts[active] = c_active
            active = active[c_active >= 1]
            if cfg.audit_every and (t + 1) % cfg.audit_every == 0:
                fresh = kernels.active_counts(W, b, Xt, backend=cfg.backend)
                if not np.array_equal(np.flatnonzero(fresh >= 1), active):
                    raise StaleIndexError(f"active list diverged from a full rescan after step {t + 1}")
                counts = fresh
    final = ModelState(W, b, a)
    return final, rec.trace


def gradient_flow_euler(model, data, dt, T, path="dense", backend=None):
    """Explicit Euler integration of d[W, b]/dt = -grad L up to time ``T``.

    One Euler step of size ``dt`` is a GD step with ``eta = dt``; the trace
    records the state at every node ``k * dt``.
    """
    if not dt > 0:
        raise InvalidInputError("dt must be > 0")
    if not T >= dt * (1 - 1e-12):
        raise InvalidInputError("T must be >= dt")
    steps = int(round(T / dt))
    cfg = TrainConfig(eta=dt, steps=steps, path=path, backend=backend)
    _, trace = train(model, data, cfg)
    return trace


def flipped_statistics(trace, m=None):
    """Cardinalities of the per-example flipped sets and their maximum."""
    if trace.flipped is None:
        raise MissingDataError("flip tracking was disabled for this trace")
    if m is not None and trace.flipped.shape[0] != m:
        raise InvalidInputError(f"trace covers {trace.flipped.shape[0]} neurons, not {m}")
    sizes = trace.flipped.sum(axis=0).astype(np.int64)
    return sizes, int(sizes.max()) if sizes.size else 0
