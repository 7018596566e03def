import json
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.special import erf
from scipy.stats import multivariate_normal

from sntk import data as D
from sntk import model as M
from sntk import ntk as K
from sntk import numerics as nm
from sntk import theory as TH
from sntk.errors import InvalidInputError

from conftest import random_model, unit_columns


def orthonormal(d, n, seed=0):
    return D.gen_orthonormal(d, n, nm.RngStream(seed)).X


def mc_pair_prob(c, B, samples, seed):
    s = nm.RngStream(seed, 99)
    g1 = s.child(1).gaussian(samples)
    g2 = s.child(2).gaussian(samples)
    hit = (g1 >= B) & (c * g1 + math.sqrt(1 - c * c) * g2 >= B)
    p = hit.mean()
    return p, math.sqrt(p * (1 - p) / samples)


# --- empirical kernel and Z --------------------------------------------------

def test_empirical_single_neuron():
    m = M.ModelState([[1.0, 0.0]], [-5.0], [1.0])
    H = K.empirical_ntk(m, np.array([[1.0], [0.0]]))
    assert H.entries[0, 0] == 2.0


def test_empirical_no_active_is_zero(rng):
    m = M.init(M.InitScheme("standard", 1e6, 0), 64, 5)
    X = unit_columns(rng, 5, 6)
    assert not np.asarray(K.empirical_ntk(m, X)).any()
    Z = K.feature_matrix_Z(m, X)
    assert Z.shape == (64 * 6, 6) and np.linalg.norm(Z) == 0.0


@settings(max_examples=25, deadline=None)
@given(st.integers(1, 200), st.integers(1, 12), st.integers(1, 10), st.floats(0, 2), st.integers(0, 2**31))
def test_h_equals_zt_z(m, d, n, B, seed):
    r = np.random.default_rng(seed)
    mod = random_model(r, m, d, B=B, spread=0.3)
    X = unit_columns(r, d, n)
    Z = K.feature_matrix_Z(mod, X)
    H = np.asarray(K.empirical_ntk(mod, X))
    assert np.max(np.abs(Z.T @ Z - H)) <= 1e-10


def test_z_block_layout(rng):
    mod = random_model(rng, 5, 3, spread=0.5)
    X = unit_columns(rng, 3, 4)
    Z = K.feature_matrix_Z(mod, X)
    mask = M.activation_mask(mod, X)
    r, i = 3, 2
    block = Z[r * 4:(r + 1) * 4, i]
    expect = mask[r, i] * mod.a[r] * np.append(X[:, i], -1.0) / math.sqrt(5)
    assert np.array_equal(block, expect)


def test_z_frobenius_identity(rng):
    mod = random_model(rng, 300, 6, B=0.5)
    X = unit_columns(rng, 6, 9)
    Z = K.feature_matrix_Z(mod, X)
    mask = M.activation_mask(mod, X)
    expect = (mask * (np.sum(X * X, axis=0) + 1)[None, :]).sum() / mod.m
    assert np.sum(Z * Z) == pytest.approx(expect, rel=1e-12)


def test_z_frobenius_at_init_bound(rng):
    mod = M.init(M.InitScheme("standard", 1.0, 0), 8192, 16)
    X = unit_columns(rng, 16, 16)
    Z = K.feature_matrix_Z(mod, X)
    assert np.sum(Z * Z) <= 8 * 16 * math.exp(-0.5)


def test_empirical_psd_and_diag_bound(rng):
    mod = random_model(rng, 400, 6, B=0.3)
    X = unit_columns(rng, 6, 12)
    H = K.empirical_ntk(mod, X)
    assert nm.smallest_eigenvalue(H) >= -1e-10
    frac = M.activation_mask(mod, X).mean(axis=0)
    assert np.all(np.diag(H.entries) <= 2 * frac + 1e-14)


# --- pair probability --------------------------------------------------------

def test_pair_prob_independent():
    assert K.pair_activation_probability(0.0, 0.0) == pytest.approx(0.25, abs=1e-12)


def test_pair_prob_half_correlation():
    assert K.pair_activation_probability(0.5, 0.0) == pytest.approx(1 / 3, abs=1e-12)


def test_pair_prob_vs_mc():
    p = K.pair_activation_probability(0.3, 1.0)
    mc, se = mc_pair_prob(0.3, 1.0, 10**6, 1)
    assert abs(p - mc) <= 3 * se


@pytest.mark.parametrize("c", [-0.99, -0.7, -0.2, 0.0, 0.3, 0.8, 0.999, 0.9999999])
@pytest.mark.parametrize("B", [0.0, 0.4, 1.0, 2.5, 4.0])
def test_pair_prob_vs_bivariate_normal(c, B):
    cov = [[1.0, c], [c, 1.0]]
    oracle = multivariate_normal(mean=[0, 0], cov=cov).cdf([-B, -B])
    assert abs(K.pair_activation_probability(c, B) - oracle) <= 1e-8


def test_pair_prob_degenerate():
    q = float(K.gaussian_tail(1.3))
    assert K.pair_activation_probability(1.0, 1.3) == q
    assert K.pair_activation_probability(-1.0, 1.3) == 0.0
    assert K.pair_activation_probability(-1.0, 0.0) == 0.0


@pytest.mark.parametrize("bad", [(1.01, 0.0), (-1.5, 0.0), (0.2, -0.1)])
def test_pair_prob_domain(bad):
    with pytest.raises(InvalidInputError):
        K.pair_activation_probability(*bad)


def test_pair_prob_monotone():
    cs = np.linspace(-0.99, 0.99, 45)
    Bs = np.linspace(0, 3, 13)
    P = np.array([[K.pair_activation_probability(c, B) for c in cs] for B in Bs])
    assert np.all(np.diff(P, axis=1) >= -1e-14)
    assert np.all(np.diff(P, axis=0) <= 1e-14)


def test_pair_prob_upper_bound_grid():
    for c in np.linspace(0.05, 0.95, 19):
        for B in np.linspace(0, 3, 13):
            assert K.pair_activation_probability(c, B) <= TH.pair_prob_corr_upper_bound(c, B) + 1e-15


# --- limiting kernel ---------------------------------------------------------

def test_limit_orthonormal_b0():
    H = np.asarray(K.limiting_ntk_quadrature(orthonormal(10, 5), 0.0))
    off = H[~np.eye(5, dtype=bool)]
    assert np.allclose(np.diag(H), 1.0, atol=1e-12)
    assert np.allclose(off, 0.25, atol=1e-9)


def test_limit_single_point():
    x = np.array([[0.6], [0.8]])
    assert np.asarray(K.limiting_ntk_quadrature(x, 0.0))[0, 0] == pytest.approx(1.0, abs=1e-15)


def test_limit_quadrature_vs_closed_form(rng):
    X = unit_columns(rng, 4, 12)
    q = np.asarray(K.limiting_ntk_quadrature(X, 0.0))
    c = np.asarray(K.limiting_ntk_closed_form_b0(X))
    assert np.max(np.abs(q - c)) <= 1e-6


def test_limit_requires_unit_columns(rng):
    X = unit_columns(rng, 3, 4) * 0.5
    with pytest.raises(InvalidInputError):
        K.limiting_ntk_quadrature(X, 0.5)


def test_limit_is_psd(rng):
    X = unit_columns(rng, 6, 10)
    for B in (0.0, 1.0, 2.0):
        assert nm.smallest_eigenvalue(K.limiting_ntk_quadrature(X, B)) >= -1e-8


def test_limit_permutation_equivariant(rng):
    X = unit_columns(rng, 5, 7)
    perm = rng.permutation(7)
    H = np.asarray(K.limiting_ntk_quadrature(X, 0.7))
    Hp = np.asarray(K.limiting_ntk_quadrature(X[:, perm], 0.7))
    assert np.array_equal(Hp, H[np.ix_(perm, perm)])


def test_mc_huge_bias_is_zero(rng):
    X = unit_columns(rng, 4, 5)
    assert not np.asarray(K.limiting_ntk_mc(X, 50.0, 1000, nm.RngStream(0))).any()


def test_mc_vs_quadrature(rng):
    X = unit_columns(rng, 6, 8)
    H, se = K.limiting_ntk_mc(X, 0.5, 10**6, nm.RngStream(3), return_stderr=True)
    Q = np.asarray(K.limiting_ntk_quadrature(X, 0.5))
    assert np.all(np.abs(np.asarray(H) - Q) <= 5 * se + 1e-15)
    assert nm.smallest_eigenvalue(H) >= -1e-10


def test_mc_deterministic_and_chunk_independent(rng):
    X = unit_columns(rng, 3, 4)
    a = np.asarray(K.limiting_ntk_mc(X, 0.2, 5000, nm.RngStream(7)))
    b = np.asarray(K.limiting_ntk_mc(X, 0.2, 5000, nm.RngStream(7)))
    assert np.array_equal(a, b)


def test_mc_rejects_zero_samples(rng):
    with pytest.raises(InvalidInputError):
        K.limiting_ntk_mc(unit_columns(rng, 3, 2), 0.0, 0, nm.RngStream(0))


# --- pair probability matrix -------------------------------------------------

def test_pair_prob_matrix_diagonals(rng):
    X = unit_columns(rng, 5, 6)
    assert np.allclose(np.diag(K.pair_prob_matrix(X, 0.0).entries), 0.5)
    oracle = 0.5 * (1 - erf(1 / math.sqrt(2)))
    assert np.all(np.abs(np.diag(K.pair_prob_matrix(X, 1.0).entries) - oracle) <= 1e-6)


def test_pair_prob_matrix_orthonormal():
    P = K.pair_prob_matrix(orthonormal(8, 6), 0.0)
    assert np.allclose(P.offdiag(), 0.25, atol=1e-9)
    assert P.p0 == 0.5


def test_pair_prob_matrix_bounds(rng):
    X = unit_columns(rng, 3, 9)
    P = K.pair_prob_matrix(X, 0.8).entries
    assert np.all(P >= 0)
    assert np.all(P <= np.diag(P)[:, None] + 1e-15)
    assert np.array_equal(P, P.T)


# --- export ------------------------------------------------------------------

def test_kernel_csv_round_trip(tmp_path, rng):
    H = K.limiting_ntk_quadrature(unit_columns(rng, 4, 5), 0.3)
    p = tmp_path / "k.csv"
    K.kernel_to_csv(H, p)
    assert p.read_text().splitlines()[0] == "5"
    assert np.array_equal(np.asarray(K.kernel_from_csv(p)), np.asarray(H))


def test_kernel_csv_malformed(tmp_path):
    p = tmp_path / "k.csv"
    p.write_text("2\n1,0\n")
    with pytest.raises(InvalidInputError):
        K.kernel_from_csv(p)


def test_kernel_json():
    doc = json.loads(K.kernel_to_json(np.eye(2), 0.5, "quadrature"))
    assert doc == {"n": 2, "B": 0.5, "method": "quadrature", "entries": [[1.0, 0.0], [0.0, 1.0]]}


# --- concentration -----------------------------------------------------------

@pytest.mark.slow
def test_concentration_19_of_20(rng):
    X = unit_columns(rng, 16, 16)
    Hinf = K.limiting_ntk_quadrature(X, 0.5)
    lam_inf = nm.smallest_eigenvalue(Hinf)
    fro_ok = eig_ok = 0
    for seed in range(20):
        mod = M.init(M.InitScheme("standard", 0.5, seed), 16384, 16)
        H0 = K.empirical_ntk(mod, X)
        fro_ok += nm.frobenius_norm(np.asarray(H0) - np.asarray(Hinf)) <= TH.ntk_concentration_bound(16, 16384, 0.5, 0.05)
        eig_ok += nm.smallest_eigenvalue(H0) >= 0.75 * lam_inf
    assert fro_ok >= 19 and eig_ok >= 19
