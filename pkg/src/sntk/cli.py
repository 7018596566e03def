"""``sntk`` command line: train, sparsity, ntk, bounds, verify, bench.

Exit codes: 0 success, 1 I/O or file format, 2 configuration, 3 divergence,
4 a verdict failed (the report is still written).
"""

import argparse
import copy
import csv
import json
import logging
import math
import os
import sys
from contextlib import contextmanager

import numpy as np

from . import data as D
from . import experiments as E
from . import model as M
from . import ntk as K
from . import numerics as nm
from . import theory as TH
from ._backend import BACKEND, HAS_NUMBA
from .errors import ConfigError, DivergenceError, FormatError, SntkError
from .plots import line_chart
from .train import TrainConfig, flipped_statistics, train

log = logging.getLogger("sntk")

EXIT_OK, EXIT_IO, EXIT_CONFIG, EXIT_DIVERGED, EXIT_VERDICT = 0, 1, 2, 3, 4

DEFAULT_CONFIG = {
    "seed": 0,
    "dataset": {
        "generator": "linear_teacher",
        "params": {},
        "paths": {"images": None, "labels": None, "csv": None},
    },
    "model": {"m": 2048, "B": 0.0, "init": "symmetric", "checkpoint": None},
    "train": {"eta": "theory", "eta_factor": 0.1, "steps": 500, "path": "dense"},
    "ntk": {"method": "quadrature", "mc_samples": 200000},
    "bounds": {
        "delta": 0.05,
        "region_samples": 10000,
        "constants": {"flip": TH.FLIP_CONSTANT, "initial_error": TH.INITIAL_ERROR_CONSTANT},
    },
    "sparsity": {"max_drift": 0.1},
    "bench": {"repeats": 5, "backends": ["numba", "numpy"]},
    "output": {"dir": "sntk_out", "formats": ["csv", "json"]},
}

GENERATOR_PARAMS = {
    "linear_teacher": {"d": 5, "n": 32},
    "orthonormal": {"d": 16, "n": 8},
    "separated": {"d": 16, "n": 8, "min_sep": 0.5, "max_tries": 10000},
    "mnist": {"limit": 256, "positive_class": 0},
    "csv": {},
}


# --------------------------------------------------------------------------
# Configuration
# --------------------------------------------------------------------------

def _merge_strict(base, override, prefix=""):
    for key, value in override.items():
        path = f"{prefix}{key}"
        if key not in base:
            raise ConfigError(f"unknown config key {path!r}")
        if isinstance(base[key], dict) and key != "params":
            if not isinstance(value, dict):
                raise ConfigError(f"config key {path!r} must be an object")
            _merge_strict(base[key], value, path + ".")
        else:
            base[key] = value


def _parse_value(text):
    try:
        return json.loads(text)
    except json.JSONDecodeError:
        return text


def _set_dotted(cfg, dotted, value):
    parts = dotted.split(".")
    node = cfg
    for i, part in enumerate(parts[:-1]):
        if not isinstance(node, dict) or part not in node:
            raise ConfigError(f"unknown config key {'.'.join(parts[:i + 1])!r}")
        node = node[part]
    last = parts[-1]
    in_params = len(parts) >= 2 and parts[-2] == "params"
    if not isinstance(node, dict) or (last not in node and not in_params):
        raise ConfigError(f"unknown config key {dotted!r}")
    node[last] = value


def load_config(path=None, sets=(), seed=None, out=None):
    cfg = copy.deepcopy(DEFAULT_CONFIG)
    if path is not None:
        try:
            with open(path) as fh:
                user = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{path}: invalid JSON ({exc})") from None
        if not isinstance(user, dict):
            raise ConfigError(f"{path}: top level must be an object")
        _merge_strict(cfg, user)
    for item in sets:
        if "=" not in item:
            raise ConfigError(f"--set expects key=value, got {item!r}")
        key, value = item.split("=", 1)
        _set_dotted(cfg, key.strip(), _parse_value(value))
    if seed is not None:
        cfg["seed"] = int(seed)
    if out is not None:
        cfg["output"]["dir"] = out
    validate_config(cfg)
    return cfg


def validate_config(cfg):
    gen = cfg["dataset"]["generator"]
    if gen not in GENERATOR_PARAMS:
        raise ConfigError(f"unknown dataset generator {gen!r}")
    for key in cfg["dataset"]["params"]:
        if key not in GENERATOR_PARAMS[gen]:
            raise ConfigError(f"unknown config key 'dataset.params.{key}' for generator {gen!r}")
    m = cfg["model"]
    if m["init"] not in ("standard", "symmetric"):
        raise ConfigError(f"model.init must be 'standard' or 'symmetric', got {m['init']!r}")
    if not isinstance(m["m"], int) or m["m"] < 1:
        raise ConfigError("model.m must be a positive integer")
    if m["init"] == "symmetric" and m["m"] % 2:
        raise ConfigError("model.m must be even for symmetric init")
    if not isinstance(m["B"], (int, float)) or m["B"] < 0:
        raise ConfigError("model.B must be a nonnegative number")
    t = cfg["train"]
    if not (t["eta"] == "theory" or (isinstance(t["eta"], (int, float)) and t["eta"] > 0)):
        raise ConfigError("train.eta must be a positive number or 'theory'")
    if not isinstance(t["steps"], int) or t["steps"] < 0:
        raise ConfigError("train.steps must be a nonnegative integer")
    if t["path"] not in ("dense", "sparse"):
        raise ConfigError("train.path must be 'dense' or 'sparse'")
    k = cfg["ntk"]
    if k["method"] not in ("quadrature", "mc"):
        raise ConfigError("ntk.method must be 'quadrature' or 'mc'")
    if k["method"] == "mc" and (not isinstance(k["mc_samples"], int) or k["mc_samples"] < 1):
        raise ConfigError("ntk.mc_samples must be a positive integer")
    if not 0 < cfg["bounds"]["delta"] < 1:
        raise ConfigError("bounds.delta must lie in (0, 1)")
    for be in cfg["bench"]["backends"]:
        if be not in ("numba", "numpy"):
            raise ConfigError(f"unknown backend {be!r} in bench.backends")
    for fmt in cfg["output"]["formats"]:
        if fmt not in ("csv", "json", "svg"):
            raise ConfigError(f"unknown output format {fmt!r}")


# --------------------------------------------------------------------------
# Shared setup
# --------------------------------------------------------------------------

def build_dataset(cfg):
    ds = cfg["dataset"]
    gen = ds["generator"]
    params = dict(GENERATOR_PARAMS[gen])
    params.update(ds["params"])
    stream = nm.RngStream(cfg["seed"], 1)
    if gen == "linear_teacher":
        return D.gen_linear_teacher(params["d"], params["n"], stream)
    if gen == "orthonormal":
        return D.gen_orthonormal(params["d"], params["n"], stream)
    if gen == "separated":
        return D.gen_separated(params["d"], params["n"], params["min_sep"], stream, params["max_tries"])
    if gen == "mnist":
        paths = ds["paths"]
        if not paths["images"] or not paths["labels"]:
            raise ConfigError("mnist generator needs dataset.paths.images and dataset.paths.labels")
        return D.load_mnist_idx(paths["images"], paths["labels"], params["limit"], params["positive_class"])
    if not ds["paths"]["csv"]:
        raise ConfigError("csv generator needs dataset.paths.csv")
    return D.load_csv(ds["paths"]["csv"])


def build_model(cfg, data):
    mc = cfg["model"]
    if mc["checkpoint"]:
        model = M.load_checkpoint(mc["checkpoint"])
        if model.d != data.d:
            raise ConfigError(f"checkpoint has d={model.d} but the dataset has d={data.d}")
        return model
    return E.init_model(mc["m"], data.d, float(mc["B"]), mc["init"], cfg["seed"])


def resolve_eta(cfg, lam, n):
    eta = cfg["train"]["eta"]
    if eta == "theory":
        if not lam > 0:
            raise ConfigError("train.eta='theory' needs a positive lambda_min(H(0))")
        return E.theory_eta(lam, n, cfg["train"]["eta_factor"])
    return float(eta)


@contextmanager
def output_dir(path):
    os.makedirs(path, exist_ok=True)
    lock = os.path.join(path, ".sntk.lock")
    try:
        fd = os.open(lock, os.O_CREAT | os.O_EXCL | os.O_WRONLY)
    except FileExistsError:
        raise OSError(f"output directory {path} is locked by another run ({lock})") from None
    os.close(fd)
    try:
        yield path
    finally:
        os.remove(lock)


def write_json(path, obj):
    with open(path, "w") as fh:
        json.dump(obj, fh, indent=2, sort_keys=True)
        fh.write("\n")


# --------------------------------------------------------------------------
# Commands
# --------------------------------------------------------------------------

def cmd_train(cfg):
    data = build_dataset(cfg)
    model = build_model(cfg, data)
    lam = E.lambda_hat(model, data)
    eta = resolve_eta(cfg, lam, data.n)
    tcfg = TrainConfig(eta=eta, steps=cfg["train"]["steps"], path=cfg["train"]["path"])
    with output_dir(cfg["output"]["dir"]) as out:
        final, trace = train(model, data, tcfg)
        trace.to_csv(os.path.join(out, "trace.csv"))
        M.save_checkpoint(final, os.path.join(out, "model.sntk"))
        L = trace.loss_history
        rate = E.terminal_slope(L) if len(L) >= 3 and min(L) > 0 else None
        summary = {
            "final_loss": L[-1],
            "initial_loss": L[0],
            "fitted_log_rate": rate,
            "lambda_hat": lam,
            "eta": eta,
            "steps": trace.steps,
            "m": model.m,
            "B": float(cfg["model"]["B"]),
        }
        write_json(os.path.join(out, "summary.json"), summary)
        if "svg" in cfg["output"]["formats"]:
            line_chart({"loss": L}, os.path.join(out, "loss.svg"), title="training loss",
                       ylabel="loss", logy=True)
    return EXIT_OK


def cmd_sparsity(cfg):
    data = build_dataset(cfg)
    model = build_model(cfg, data)
    lam = E.lambda_hat(model, data)
    if cfg["train"]["eta"] == "theory" and not lam > 0:
        # no neuron is active anywhere, so no step size can move a parameter
        eta = 1.0
    else:
        eta = resolve_eta(cfg, lam, data.n)
    with output_dir(cfg["output"]["dir"]) as out:
        _, trace = train(model, data, TrainConfig(eta=eta, steps=cfg["train"]["steps"],
                                                  path=cfg["train"]["path"]))
        C = trace.active_matrix() / model.m
        with open(os.path.join(out, "sparsity.csv"), "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["step", "mean_fraction", "min_fraction", "max_fraction"])
            for t, row in enumerate(C):
                w.writerow([t, repr(float(row.mean())), repr(float(row.min())), repr(float(row.max()))])
        drift = E.activation_drift(trace)
        limit = cfg["sparsity"]["max_drift"]
        summary = {
            "initial_fraction": float(C[0].mean()),
            "final_fraction": float(C[-1].mean()),
            "max_relative_drift": drift,
            "mean_fraction_drift": E.mean_fraction_drift(trace, model.m),
            "max_drift_allowed": limit,
            "stability_identity": E.stability_identity(trace),
            "eta": eta,
            "verdict": "pass" if drift <= limit else "fail",
        }
        write_json(os.path.join(out, "summary.json"), summary)
        if "svg" in cfg["output"]["formats"]:
            line_chart({"mean active fraction": C.mean(axis=1).tolist()},
                       os.path.join(out, "sparsity.svg"), title="activation fraction", ylabel="fraction")
    return EXIT_OK if summary["verdict"] == "pass" else EXIT_VERDICT


def _limiting_kernel(cfg, data, B):
    if cfg["ntk"]["method"] == "mc":
        return K.limiting_ntk_mc(data.X, B, cfg["ntk"]["mc_samples"], nm.RngStream(cfg["seed"], 2))
    return K.limiting_ntk_quadrature(data.X, B)


def cmd_ntk(cfg):
    data = build_dataset(cfg)
    model = build_model(cfg, data)
    B = float(cfg["model"]["B"])
    Hinf = _limiting_kernel(cfg, data, B)
    H0 = K.empirical_ntk(model, data.X)
    diff = np.asarray(H0) - np.asarray(Hinf)
    fro = float(np.sqrt(np.sum(diff * diff)))
    bound = TH.ntk_concentration_bound(data.n, model.m, B, cfg["bounds"]["delta"])
    with output_dir(cfg["output"]["dir"]) as out:
        K.kernel_to_csv(Hinf, os.path.join(out, "kernel.csv"))
        K.kernel_to_csv(H0, os.path.join(out, "kernel_empirical.csv"))
        with open(os.path.join(out, "kernel.json"), "w") as fh:
            fh.write(K.kernel_to_json(Hinf, B, cfg["ntk"]["method"]) + "\n")
        summary = {
            "n": data.n,
            "m": model.m,
            "B": B,
            "method": cfg["ntk"]["method"],
            "fro_diff": fro,
            "lambda_min_empirical": nm.smallest_eigenvalue(H0),
            "lambda_min_limit": nm.smallest_eigenvalue(Hinf),
            "concentration_bound": bound,
            "verdict": "pass" if fro <= bound else "fail",
        }
        write_json(os.path.join(out, "summary.json"), summary)
    return EXIT_OK if summary["verdict"] == "pass" else EXIT_VERDICT


def evaluate_bounds(cfg, data, model):
    """Train once and evaluate every bound against its measured counterpart."""
    B = float(cfg["model"]["B"])
    n, m = data.n, model.m
    consts = cfg["bounds"]["constants"]
    delta = cfg["bounds"]["delta"]
    rep = TH.BoundsReport()
    H0 = K.empirical_ntk(model, data.X)
    lam = nm.smallest_eigenvalue(H0)
    f0 = M.forward_batch(model, data.X)
    res0 = float(np.linalg.norm(data.y - f0))
    steps = cfg["train"]["steps"]

    trace = final = None
    eta = None
    try:
        eta = resolve_eta(cfg, lam, n)
        final, trace = train(model, data, TrainConfig(eta=eta, steps=steps, path=cfg["train"]["path"]))
    except DivergenceError as exc:
        rep.add("convergence_rate", "Theorem convergence",
                {"eta": eta, "steps": steps, "lambda_hat": lam, "diverged_at": exc.step},
                bound=(1 - (eta or 0) * lam / 4) ** steps, measured=math.inf, verdict="fail")

    unit = data.is_unit_norm(1e-9)
    if trace is not None:
        L = trace.loss_history
        ratio = L[-1] / L[0] if L[0] > 0 else 0.0
        contraction = (1.0 - eta * lam / 4.0) ** steps
        rep.add("convergence_rate", "Theorem convergence",
                {"eta": eta, "steps": steps, "lambda_hat": lam}, bound=contraction, measured=ratio)
        mv = trace.movement_matrix()
        if lam > 0:
            Dmove = TH.movement_bound(n, res0, m, 0.75 * lam)
            rep.add("movement_dw", "Lemma weight_bias_movement",
                    {"n": n, "m": m, "residual0": res0, "lambda": 0.75 * lam}, Dmove, mv[-1, 0])
            rep.add("movement_db", "Lemma weight_bias_movement",
                    {"n": n, "m": m, "residual0": res0, "lambda": 0.75 * lam}, Dmove, mv[-1, 1])
        Rw, Rb = float(mv[:, 0].max()), float(mv[:, 1].max())
        _, max_flip = flipped_statistics(trace, m)
        rep.add("flipped_neurons", "Corollary num_flipped_neurons",
                {"Rw": Rw, "Rb": Rb, "B": B, "c": consts["flip"]},
                TH.flipped_fraction_bound(Rw, Rb, B, consts["flip"]), max_flip / m)
        if TH.flip_admissible(Rw + Rb, B):
            rep.add("flipping_prob", "Lemma bound_flipping", {"Rw": Rw, "Rb": Rb, "B": B, "c": consts["flip"]},
                    TH.flipping_prob_bound(Rw, Rb, B, consts["flip"]), TH.flipping_prob_exact(Rw, Rb, B))
        else:
            rep.add("flipping_prob", "Lemma bound_flipping", {"Rw": Rw, "Rb": Rb, "B": B},
                    None, TH.flipping_prob_exact(Rw, Rb, B), verdict="n/a")
        rep.add("activation_stability", "Lemma activated neurons", {},
                None, None, verdict="pass" if E.stability_identity(trace) else "fail")
        if unit and model.m % 2 == 0 and np.allclose(model.W[: m // 2], model.W[m // 2:]) \
                and np.all(model.a[: m // 2] == -model.a[m // 2:]):
            Hinf = K.limiting_ntk_quadrature(data.X, B)
            e = TH.error_dynamics_residual(trace, Hinf, eta, data.y)
            rep.add("error_dynamics", "Theorem analysis of radius", {"eta": eta, "steps": steps},
                    0.1, float(e.max() / np.linalg.norm(data.y)))

    rep.add("initial_error", "Claim initial_error",
            {"n": n, "m": m, "B": B, "delta": delta, "C": consts["initial_error"]},
            TH.initial_error_bound(n, m, B, delta, consts["initial_error"]), res0 ** 2)
    act = np.count_nonzero(M.activation_mask(model, data.X), axis=0)
    rep.add("activated_count", "Lemma number_activated_neuron_init", {"m": m, "B": B},
            TH.activated_count_bound(m, B), float(act.max()))
    Z = K.feature_matrix_Z(model, data.X)
    rep.add("z_frobenius", "Lemma number_activated_neuron_init", {"n": n, "B": B},
            8.0 * n * math.exp(-B * B / 2.0), float(np.sum(Z * Z)))

    if unit:
        Hinf = K.limiting_ntk_quadrature(data.X, B)
        diff = np.asarray(H0) - np.asarray(Hinf)
        rep.add("ntk_concentration", "Lemma fro_diff_discrete_limit_ntk",
                {"n": n, "m": m, "B": B, "delta": delta},
                TH.ntk_concentration_bound(n, m, B, delta), float(np.sqrt(np.sum(diff * diff))))
        lam_inf = nm.smallest_eigenvalue(Hinf)
        rep.add("ntk_min_eig", "Lemma diff_discrete_limit_ntk", {"lambda_inf": lam_inf},
                0.75 * lam_inf, lam, relation=">=")
        if n >= 2:
            sep = TH.data_separation(data.X)
            P = K.pair_prob_matrix(data.X, B)
            region = TH.RegionSpec(P)
            est = TH.restricted_min_eig_estimate(Hinf, region, cfg["bounds"]["region_samples"],
                                                 nm.RngStream(cfg["seed"], 3))
            rep.add("restricted_eig_lower", "Theorem restricted_least_eig", {"B": B, "delta": sep},
                    TH.restricted_eig_lower_bound(B, sep), est, relation=">=")
        try:
            ridge = 0.0 if lam_inf > 1e-10 else 1e-10
            rep.add("generalization", "Theorem generalization", {"B": B, "n": n, "ridge": ridge},
                    TH.generalization_bound(Hinf, data.y, B, n, ridge), None)
            rep.add("rademacher", "Theorem rademacher_gd", {"B": B, "n": n, "ridge": ridge},
                    TH.rademacher_leading_term(Hinf, data.y, B, n, ridge), None)
        except SntkError as exc:
            log.warning("generalization terms skipped: %s", exc)
        rep.add("lambda_stability", "Theorem convergence (lambda = lambda0 exp(-B^2/2))", {"B": B},
                None, float(TH.lambda_stability([lam_inf], [B])[0]))
    return rep


def cmd_bounds(cfg):
    data = build_dataset(cfg)
    model = build_model(cfg, data)
    with output_dir(cfg["output"]["dir"]) as out:
        rep = evaluate_bounds(cfg, data, model)
        with open(os.path.join(out, "report.json"), "w") as fh:
            fh.write(rep.to_json() + "\n")
    return EXIT_OK if rep.all_pass() else EXIT_VERDICT


def verification_checks(cfg, data, model):
    """The oracle cross-checks run by ``sntk verify``; returns (name, passed, detail) rows."""
    from .kernels import jacobi_eigh
    rows = []
    B = float(cfg["model"]["B"])
    seed = cfg["seed"]

    # quadrature vs Monte Carlo
    draws = 400000
    g = nm.RngStream(seed, 10).gaussian(2 * draws).reshape(2, draws)
    worst = 0.0
    for c in (0.1, 0.6, 0.9):
        for Bq in (0.5, 1.0):
            q = K.pair_activation_probability(c, Bq)
            hit = (g[0] >= Bq) & (c * g[0] + math.sqrt(1 - c * c) * g[1] >= Bq)
            p = hit.mean()
            se = math.sqrt(max(p * (1 - p), 1e-12) / draws)
            worst = max(worst, abs(p - q) / se)
    rows.append(("pair_prob_quadrature_vs_mc", worst <= 4.0, f"max |z| = {worst:.2f}"))

    # sparse vs dense training
    sub = D.Dataset(data.X[:, :min(data.n, 16)], data.y[:min(data.n, 16)])
    small = E.init_model(512, data.d, B, "standard", seed)
    fd, _ = train(small, sub, TrainConfig(eta=0.05, steps=20, path="dense"))
    fs, _ = train(small, sub, TrainConfig(eta=0.05, steps=20, path="sparse"))
    err = max(np.abs(fd.W - fs.W).max(), np.abs(fd.b - fs.b).max())
    rows.append(("sparse_vs_dense", err <= 1e-12, f"max |diff| = {err:.2e}"))

    # gradients vs central differences, away from kinks
    gW, gb = M.gradients(model, data)
    P = M.preactivations(model, data.X)
    safe = np.flatnonzero(np.all(np.abs(P) > 1e-3, axis=1))[:8]
    h = 1e-5
    worst = 0.0
    for r in safe:
        for c in range(min(model.d, 4)):
            Wp = model.W.copy()
            Wp[r, c] += h
            Wm = model.W.copy()
            Wm[r, c] -= h
            num = (M.loss(model.replace(W=Wp), data) - M.loss(model.replace(W=Wm), data)) / (2 * h)
            worst = max(worst, abs(num - gW[r, c]) / max(abs(gW[r, c]), 1e-8))
        bp = model.b.copy()
        bp[r] += h
        bm = model.b.copy()
        bm[r] -= h
        num = (M.loss(model.replace(b=bp), data) - M.loss(model.replace(b=bm), data)) / (2 * h)
        worst = max(worst, abs(num - gb[r]) / max(abs(gb[r]), 1e-8))
    rows.append(("gradient_finite_difference", worst <= 1e-5, f"max rel err = {worst:.2e}"))

    # H = Z^T Z
    Z = K.feature_matrix_Z(model, data.X)
    H = np.asarray(K.empirical_ntk(model, data.X))
    err = float(np.abs(Z.T @ Z - H).max())
    rows.append(("ntk_factorization", err <= 1e-10, f"max |diff| = {err:.2e}"))

    # Jacobi vs LAPACK
    w, _, _ = jacobi_eigh(H, tol=1e-12)
    err = float(np.abs(np.sort(w) - np.linalg.eigvalsh(H)).max())
    rows.append(("jacobi_vs_lapack", err <= 1e-9, f"max |diff| = {err:.2e}"))

    # numba vs numpy kernels
    if HAS_NUMBA:
        fn, _ = train(small, sub, TrainConfig(eta=0.05, steps=10, path="sparse", backend="numba"))
        fp, _ = train(small, sub, TrainConfig(eta=0.05, steps=10, path="sparse", backend="numpy"))
        err = max(np.abs(fn.W - fp.W).max(), np.abs(fn.b - fp.b).max())
        rows.append(("numba_vs_numpy", err <= 1e-12, f"max |diff| = {err:.2e}"))
    return rows


def cmd_verify(cfg):
    data = build_dataset(cfg)
    model = build_model(cfg, data)
    rows = verification_checks(cfg, data, model)
    with output_dir(cfg["output"]["dir"]) as out:
        with open(os.path.join(out, "verify.csv"), "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["check", "verdict", "detail"])
            for name, ok, detail in rows:
                w.writerow([name, "pass" if ok else "fail", detail])
        write_json(os.path.join(out, "report.json"),
                   {name: {"verdict": "pass" if ok else "fail", "detail": detail} for name, ok, detail in rows})
    for name, ok, detail in rows:
        print(f"{'PASS' if ok else 'FAIL'}  {name}: {detail}")
    return EXIT_OK if all(ok for _, ok, _ in rows) else EXIT_VERDICT


def cmd_bench(cfg):
    data = build_dataset(cfg)
    model = build_model(cfg, data)
    eta = cfg["train"]["eta"]
    eta = 1e-3 if eta == "theory" else float(eta)
    results = {}
    status = EXIT_OK
    for be in cfg["bench"]["backends"]:
        if be == "numba" and not HAS_NUMBA:
            continue
        E.bench_steps(model, data, eta, repeats=1, backend=be)  # warm-up / compile
        res = E.bench_steps(model, data, eta, repeats=cfg["bench"]["repeats"], backend=be)
        res["B"] = float(cfg["model"]["B"])
        results[be] = res
        if not res["equal"]:
            status = EXIT_VERDICT
    with output_dir(cfg["output"]["dir"]) as out:
        write_json(os.path.join(out, "bench.json"), {"default_backend": BACKEND, "results": results})
    for be, res in results.items():
        if res["equal"]:
            print(f"{be}: m={res['m']} active={res['active_fraction']:.4f} dense={res['dense_ns']}ns "
                  f"sparse={res['sparse_ns']}ns speedup={res['speedup']:.2f}x")
        else:
            print(f"{be}: equality precheck failed (max diff {res['max_abs_diff']:.3g})")
    return status


COMMANDS = {
    "train": cmd_train,
    "sparsity": cmd_sparsity,
    "ntk": cmd_ntk,
    "bounds": cmd_bounds,
    "verify": cmd_verify,
    "bench": cmd_bench,
}


def main(argv=None):
    parser = argparse.ArgumentParser(prog="sntk", description=__doc__.splitlines()[0])
    parser.add_argument("command", choices=sorted(COMMANDS))
    parser.add_argument("--config", help="JSON experiment config")
    parser.add_argument("--set", action="append", default=[], metavar="KEY=VALUE",
                        help="override a config key (dotted path); repeatable")
    parser.add_argument("--out", help="output directory")
    parser.add_argument("--seed", type=int, help="master seed")
    parser.add_argument("-v", "--verbose", action="store_true")
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = load_config(args.config, args.set, args.seed, args.out)
        return COMMANDS[args.command](cfg)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except DivergenceError as exc:
        print(f"diverged at step {exc.step}: {exc}", file=sys.stderr)
        return EXIT_DIVERGED
    except (FormatError, OSError) as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return EXIT_IO
    except SntkError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
