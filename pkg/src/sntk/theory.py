"""Closed-form bound expressions and the data-dependent eigenvalue region.

Every bound is a plain function of measurable inputs. Order-only statements
take an explicit constant (default 1) so that an experiment can test
dominance with a stated value.
"""

from dataclasses import dataclass, field
import json
import math

import numpy as np

from .data import separation
from .errors import DomainError, InvalidInputError, MissingDataError
from .ntk import PairProbMatrix, gaussian_cdf
from .numerics import as_sym, eigh, quadratic_form_inverse

# 2 e^{1/2} / sqrt(2 pi), rounded up
FLIP_CONSTANT = 1.32
INITIAL_ERROR_CONSTANT = 8.0

_SQRT_2PI = math.sqrt(2.0 * math.pi)


# --------------------------------------------------------------------------
# Flipping, movement, initialization
# --------------------------------------------------------------------------

def flipping_prob_exact(Rw, Rb, B):
    """Pr[|g - B| < Rw + Rb] for g ~ N(0, 1): chance a neuron can flip within the radii."""
    if Rw < 0 or Rb < 0:
        raise DomainError("radii must be nonnegative")
    R = Rw + Rb
    return float(gaussian_cdf(B + R) - gaussian_cdf(B - R))


def flipping_prob_bound(Rw, Rb, B, c=FLIP_CONSTANT):
    if Rw < 0 or Rb < 0:
        raise DomainError("radii must be nonnegative")
    if not c > 0:
        raise DomainError("constant c must be positive")
    R = Rw + Rb
    cap = 1.0 if B <= 0 else min(1.0 / B, 1.0)
    if R > cap * (1 + 1e-12):
        raise DomainError(f"Rw + Rb = {R:g} exceeds min(1/B, 1) = {cap:g}")
    return c * R * math.exp(-B * B / 2.0)


def flip_admissible(R, B):
    return R <= (1.0 if B <= 0 else min(1.0 / B, 1.0))


def movement_bound(n, initial_residual_norm, m, lam):
    """8 sqrt(n) ||y - f(0)|| / (sqrt(m) lam); caps both weight and bias movement."""
    if not lam > 0:
        raise DomainError("lambda must be positive")
    if m < 1:
        raise DomainError("m must be >= 1")
    return 8.0 * math.sqrt(n) * initial_residual_norm / (math.sqrt(m) * lam)


def initial_error_bound(n, m, B, delta, C=1.0):
    if not 0 < delta < 1:
        raise DomainError("delta must lie in (0, 1)")
    return C * (n + n * (math.exp(-B * B / 2.0) + 1.0 / m) * math.log(2.0 * m * n / delta) ** 3)


def ntk_concentration_bound(n, m, B, delta):
    if not 0 < delta < 1:
        raise DomainError("delta must lie in (0, 1)")
    return 4.0 * n * math.exp(-B * B / 4.0) * math.sqrt(math.log(n * n / delta) / m)


def activated_count_bound(m, B):
    if m < 1:
        raise DomainError("m must be >= 1")
    return 2.0 * m * math.exp(-B * B / 2.0)


def flipped_fraction_bound(Rw, Rb, B, c=FLIP_CONSTANT):
    """Upper bound on |flipped set| / m: 2 c (Rw + Rb) exp(-B^2 / 2)."""
    return 2.0 * c * (Rw + Rb) * math.exp(-B * B / 2.0)


# --------------------------------------------------------------------------
# Restricted least eigenvalue
# --------------------------------------------------------------------------

def data_separation(X):
    X = X.X if hasattr(X, "X") else np.asarray(X, dtype=np.float64)
    if X.shape[1] < 2:
        raise DomainError("separation needs at least two points")
    return separation(X)


def p0_lower_bound(B):
    """max(1/2 - B/sqrt(2 pi), (1/B - 1/B^3) phi(B)); the tail branch only for B > 1."""
    first = 0.5 - B / _SQRT_2PI
    if B > 1.0:
        second = (1.0 / B - 1.0 / B ** 3) * math.exp(-B * B / 2.0) / _SQRT_2PI
        return max(first, second)
    return first


def pair_prob_upper_bound(B, delta_sep):
    """exp(-B^2/(2 - delta^2/2)) (pi - arctan(delta sqrt(1 - delta^2/4) / (1 - delta^2/2))) / (2 pi)."""
    den = 1.0 - delta_sep * delta_sep / 2.0
    num = delta_sep * math.sqrt(max(0.0, 1.0 - delta_sep * delta_sep / 4.0))
    if den <= 0.0:
        angle = math.pi / 2.0
    else:
        angle = math.atan(num / den)
    return math.exp(-B * B / (2.0 - delta_sep * delta_sep / 2.0)) * (math.pi - angle) / (2.0 * math.pi)


def pair_prob_corr_upper_bound(c, B):
    """exp(-B^2/(1+c)) (pi - arctan(sqrt(1-c^2)/c)) / (2 pi) for 0 < c < 1."""
    if not 0.0 < c < 1.0:
        raise DomainError("correlation must lie in (0, 1)")
    return math.exp(-B * B / (1.0 + c)) * (math.pi - math.atan(math.sqrt(1 - c * c) / c)) / (2.0 * math.pi)


def restricted_eig_lower_bound(B, delta_sep):
    if B < 0:
        raise DomainError("B must be >= 0")
    if not 0.0 <= delta_sep <= math.sqrt(2.0) + 1e-12:
        raise DomainError(f"separation {delta_sep} outside [0, sqrt(2)]")
    delta_sep = min(delta_sep, math.sqrt(2.0))
    lam = p0_lower_bound(B) - pair_prob_upper_bound(B, delta_sep)
    return max(0.0, lam)


@dataclass(frozen=True)
class RegionSpec:
    """Coefficient vectors a with sum_{i!=j} a_i a_j p_ij >= min p_offdiag * sum_{i!=j} a_i a_j."""

    P: PairProbMatrix

    def __post_init__(self):
        if not isinstance(self.P, PairProbMatrix):
            object.__setattr__(self, "P", PairProbMatrix(self.P))
        floor = self.P.min_offdiag()
        if not (np.isfinite(floor) and floor >= 0):
            raise InvalidInputError("pair probabilities must be finite and nonnegative")

    @property
    def n(self):
        return self.P.n

    @property
    def p_min(self):
        return self.P.min_offdiag()

    def margins(self, A):
        """lhs - rhs of the region inequality for each row of ``A``."""
        A = np.atleast_2d(np.asarray(A, dtype=np.float64))
        Poff = self.P.entries - np.diag(np.diag(self.P.entries))
        sq = np.einsum("ki,ki->k", A, A)
        lhs = np.einsum("ki,ij,kj->k", A, Poff, A)
        cross = A.sum(axis=1) ** 2 - sq
        return lhs - self.p_min * cross


def region_membership(a, region, tol=1e-12):
    a = np.asarray(a, dtype=np.float64)
    if a.shape != (region.n,):
        raise InvalidInputError(f"vector length {a.shape} does not match region size {region.n}")
    scale = max(1.0, float(a @ a))
    return bool(region.margins(a)[0] >= -tol * scale)


def restricted_min_eig_estimate(H, region, samples, stream, include_eigvecs=True):
    """Smallest sampled a^T H a over unit vectors a in the region.

    Candidates per draw g ~ N(0, I): |g|/||g|| (always in the region since
    the nonnegative orthant is) and g/||g|| (kept if it passes the membership
    test). The eigenvectors of H that fall in the region are added too. The
    result is an upper estimate of the true restricted minimum.
    """
    H = as_sym(H)
    if samples < 1:
        raise InvalidInputError("samples must be >= 1")
    n = H.n
    if region.n != n:
        raise InvalidInputError("region and kernel sizes differ")
    G = stream.gaussian(samples * n).reshape(samples, n)
    G /= np.linalg.norm(G, axis=1, keepdims=True)
    cands = [np.abs(G)]
    cands.append(G[region.margins(G) >= -1e-12])
    if include_eigvecs:
        _, V = eigh(H)
        E = np.vstack([V.T, -V.T])
        cands.append(E[region.margins(E) >= -1e-12])
    A = np.vstack(cands)
    if A.shape[0] == 0:
        raise RuntimeError("no sampled vector fell inside the region")
    vals = np.einsum("ki,ij,kj->k", A, H.entries, A)
    return float(vals.min())


# --------------------------------------------------------------------------
# Generalization
# --------------------------------------------------------------------------

def generalization_bound(Hinf, y, B, n, ridge=0.0):
    """Leading term sqrt(32 y^T Hinf^{-1} y exp(-B^2/2) / n).

    The lower-order remainder is reported separately by
    :func:`generalization_remainder`.
    """
    q = quadratic_form_inverse(Hinf, y, ridge=ridge)
    return math.sqrt(q * 32.0 * math.exp(-B * B / 2.0) / n)


def generalization_remainder(n, C=1.0):
    return C / math.sqrt(n)


def rademacher_leading_term(Hinf, y, B, n, ridge=0.0):
    q = quadratic_form_inverse(Hinf, y, ridge=ridge)
    return math.sqrt(q * 8.0 * math.exp(-B * B / 2.0) / n)


def error_dynamics_residual(trace, Hinf, eta, y):
    """||e(k)|| with e(k) = (f(k) - y) + (I - eta Hinf)^k y for every recorded step."""
    if trace.residuals is None:
        raise MissingDataError("trace was recorded without residuals")
    H = np.asarray(as_sym(Hinf))
    y = np.asarray(y, dtype=np.float64)
    step = np.eye(H.shape[0]) - eta * H
    v = y.copy()
    out = []
    for r in trace.residuals:
        out.append(float(np.linalg.norm(r + v)))
        v = step @ v
    return np.asarray(out)


def lambda_stability(lams, Bs):
    """lambda(B) exp(B^2/2) for each B; constant if lambda = lambda0 exp(-B^2/2)."""
    return np.asarray(lams) * np.exp(np.asarray(Bs) ** 2 / 2.0)


# --------------------------------------------------------------------------
# Report
# --------------------------------------------------------------------------

@dataclass
class BoundsReport:
    entries: dict = field(default_factory=dict)

    def add(self, key, lemma, inputs, bound, measured=None, verdict=None, relation="<="):
        """Record a bound. Without an explicit verdict, compare ``measured`` against ``bound``.

        ``relation`` is ``"<="`` when the measurement must stay below the
        bound and ``">="`` when it must stay above it.
        """
        if verdict is None:
            if measured is None or bound is None:
                verdict = "n/a"
            elif relation == "<=":
                verdict = "pass" if measured <= bound else "fail"
            else:
                verdict = "pass" if measured >= bound else "fail"
        self.entries[key] = {
            "lemma": lemma,
            "inputs": inputs,
            "bound": None if bound is None else float(bound),
            "measured": None if measured is None else float(measured),
            "verdict": verdict,
        }
        return self.entries[key]

    def all_pass(self):
        return all(e["verdict"] != "fail" for e in self.entries.values())

    def failures(self):
        return [k for k, e in self.entries.items() if e["verdict"] == "fail"]

    def to_json(self):
        return json.dumps(self.entries, indent=2, sort_keys=True)
