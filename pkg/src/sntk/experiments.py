"""Reusable experiment recipes shared by the CLI and the acceptance suite."""

import time

import numpy as np

from . import data as D
from . import model as M
from . import ntk as K
from . import numerics as nm
from . import theory as TH
from .train import ActiveSetIndex, TrainConfig, gd_step_dense, gd_step_sparse, train


def toy_dataset(seed=0, d=5, n=32):
    """Unit-sphere inputs with a unit linear teacher (the convergence toy problem)."""
    return D.gen_linear_teacher(d, n, nm.RngStream(seed, 0))


def init_model(width, d, B, kind="standard", seed=0):
    """Initialize a network with ``width`` physical neurons.

    For the symmetric scheme ``width`` must be even; ``width / 2`` neurons are
    drawn and mirrored.
    """
    if kind == "symmetric":
        if width % 2:
            raise ValueError("symmetric init needs an even width")
        return M.init(M.InitScheme("symmetric", B, seed), width // 2, d)
    return M.init(M.InitScheme("standard", B, seed), width, d)


def lambda_hat(model, data):
    """Smallest eigenvalue of the empirical NTK at ``model``."""
    return nm.smallest_eigenvalue(K.empirical_ntk(model, data.X))


def theory_eta(lam, n, factor=0.1):
    """Step size factor * lambda / n^2 (the small-step regime of the convergence theorem)."""
    return factor * lam / (n * n)


def terminal_slope(loss_history, frac=0.25):
    """Least-squares slope of log(loss) against step over the last ``frac`` of a run."""
    L = np.asarray(loss_history, dtype=np.float64)
    k = max(2, int(round(frac * (L.size - 1))) + 1)
    t = np.arange(L.size - k, L.size)
    slope, _ = np.polyfit(t, np.log(L[-k:]), 1)
    return float(slope)


def activation_drift(trace):
    """Largest relative change of any example's active-neuron count over the run.

    Examples with no active neuron at t = 0 are skipped (their count can only
    stay at zero under full-batch GD).
    """
    C = trace.active_matrix().astype(np.float64)
    c0 = C[0]
    live = c0 > 0
    if not live.any():
        return 0.0
    return float(np.max(np.abs(C[:, live] - c0[live]) / c0[live]))


def mean_fraction_drift(trace, m):
    frac = trace.active_matrix().mean(axis=1) / m
    if frac[0] == 0:
        return 0.0
    return float(np.max(np.abs(frac - frac[0])) / frac[0])


def stability_identity(trace):
    """Check max_t |S_on(i,t)| <= |S_on(i,0)| + |flipped_i| for every example."""
    C = trace.active_matrix()
    flipped = trace.flipped.sum(axis=0)
    return bool(np.all(C.max(axis=0) <= C[0] + flipped))


def ntk_concentration_trial(X, B, width, seed, delta=0.05, Hinf=None):
    """One draw of ||H(0) - Hinf||_F and the two eigenvalues it is compared against."""
    if Hinf is None:
        Hinf = K.limiting_ntk_quadrature(X, B)
    model = M.init(M.InitScheme("standard", B, seed), width, X.shape[0])
    H0 = K.empirical_ntk(model, X)
    diff = np.asarray(H0) - np.asarray(Hinf)
    n = X.shape[1]
    return {
        "seed": seed,
        "fro_diff": float(np.sqrt(np.sum(diff * diff))),
        "bound": TH.ntk_concentration_bound(n, width, B, delta),
        "lambda_min_empirical": nm.smallest_eigenvalue(H0),
        "lambda_min_limit": nm.smallest_eigenvalue(Hinf),
    }


def time_call(fn, repeats):
    best = []
    for _ in range(repeats):
        t0 = time.perf_counter_ns()
        fn()
        best.append(time.perf_counter_ns() - t0)
    return int(np.median(best))


def bench_steps(model, data, eta, repeats=5, backend=None, tol=1e-12):
    """Time one dense and one sparse GD step from the same state.

    The two resulting states are compared first; a mismatch beyond ``tol``
    is reported through ``equal=False`` and no timing is taken.
    """
    index = ActiveSetIndex.build(model, data, backend=backend)
    dense = gd_step_dense(model, data, eta)
    sparse, _ = gd_step_sparse(model, data, eta, index, backend=backend)
    err = max(float(np.max(np.abs(dense.W - sparse.W))), float(np.max(np.abs(dense.b - sparse.b))))
    result = {"m": model.m, "n": data.n, "active_neurons": len(index),
              "active_fraction": len(index) / model.m,
              "example_active_fraction": float(np.mean(index.counts) / data.n),
              "max_abs_diff": err, "equal": err <= tol}
    if not result["equal"]:
        return result
    result["dense_ns"] = time_call(lambda: gd_step_dense(model, data, eta), repeats)
    result["sparse_ns"] = time_call(lambda: gd_step_sparse(model, data, eta, index, backend=backend), repeats)
    result["speedup"] = result["dense_ns"] / max(result["sparse_ns"], 1)
    return result


def run_toy(width, B, kind="symmetric", seed=0, eta=None, steps=500, eta_factor=0.1,
            data=None, path="dense", snapshot_every=0):
    """Train on the toy problem; ``eta=None`` picks factor * lambda_hat / n^2."""
    data = toy_dataset(seed) if data is None else data
    model = init_model(width, data.d, B, kind, seed)
    lam = lambda_hat(model, data)
    if eta is None:
        eta = theory_eta(lam, data.n, eta_factor)
    final, trace = train(model, data, TrainConfig(eta=eta, steps=steps, path=path,
                                                  ntk_snapshot_every=snapshot_every))
    return {"data": data, "model": model, "final": final, "trace": trace, "eta": eta, "lambda_hat": lam}
