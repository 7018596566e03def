import numpy as np
import pytest

from sntk import data as D
from sntk import model as M
from sntk.numerics import RngStream


@pytest.fixture
def rng():
    return np.random.default_rng(20240601)


@pytest.fixture
def toy():
    return D.gen_linear_teacher(5, 32, RngStream(0, 0))


def unit_columns(rng, d, n):
    X = rng.standard_normal((d, n))
    return X / np.linalg.norm(X, axis=0)


def random_model(rng, m, d, B=0.0, spread=0.0):
    """Standard-init network with optional per-neuron bias jitter."""
    W = rng.standard_normal((m, d))
    a = rng.choice([-1.0, 1.0], size=m)
    b = B + spread * rng.standard_normal(m)
    return M.ModelState(W, b, a)


def random_dataset(rng, d, n):
    X = unit_columns(rng, d, n)
    return D.Dataset(X, rng.uniform(-1, 1, n))


# acceptance criteria append (number, title, passed, detail) here
ACCEPTANCE = []


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for num, title, ok, detail in sorted(ACCEPTANCE):
        terminalreporter.write_line(f"{'PASS' if ok else 'FAIL'}  [{num:2d}] {title}: {detail}")
