"""Distance functions over correlation matrices.

Five families: plain Lp on the upper-triangle vectors, Lp with a reference
vector, Lp on orientation-augmented vectors, the regularised Foerstner
metric, and the regularised Log Frobenius distance. All are nonnegative
dissimilarities; Foerstner's stabilised form uses ln^2(lambda + 1), which
makes its self-distance nonzero by design.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
import scipy.linalg

from .model import CorrelationMatrix

DEFAULT_EPSILON = 1e-10

# the 15 evaluated configurations, by CLI/config key
DISTANCE_KEYS = (
    "l1", "l2", "l3", "l5", "linf",
    "l1_ref", "l2_ref", "l3_ref", "l5_ref", "linf_ref",
    "l1_dot", "l2_dot", "linf_dot",
    "foerstner", "log_frobenius",
)


class NumericalDistanceError(RuntimeError):
    """Eigen-solver failure; carries both operands for diagnosis."""

    def __init__(self, message, a, b):
        super().__init__(message)
        self.a = a
        self.b = b


def _coeffs(a):
    return a.coefficients if isinstance(a, CorrelationMatrix) else np.asarray(a, dtype=np.float64)


def _check_same_dimension(a, b):
    ca, cb = _coeffs(a), _coeffs(b)
    if ca.shape != cb.shape:
        raise ValueError(f"dimension mismatch: {ca.shape} vs {cb.shape}")
    return ca, cb


def _minkowski(x, y, p):
    diff = np.abs(x - y)
    if p == math.inf:
        return float(diff.max()) if diff.size else 0.0
    return float((diff**p).sum() ** (1.0 / p))


def reference_vector(n_pairs):
    """Unit-norm all-ones direction in coefficient space."""
    return np.ones(n_pairs) / math.sqrt(n_pairs)


def lp_distance(a, b, p):
    """Minkowski distance between upper-triangle coefficient vectors."""
    ca, cb = _check_same_dimension(a, b)
    return _minkowski(ca, cb, p)


def lp_ref_distance(a, b, p):
    """Lp distance scaled by the summed Lp distances to the reference vector."""
    ca, cb = _check_same_dimension(a, b)
    v_ref = reference_vector(ca.shape[0])
    return _minkowski(ca, cb, p) * (_minkowski(ca, v_ref, p) + _minkowski(cb, v_ref, p))


def orientation_scalar(a):
    """s = (a . v_ref + 1) / 2; can exceed 1 for strongly aligned vectors.

    Not clamped: the affine map is applied verbatim even though it leaves
    [0, 1] when a . v_ref > 1 (e.g. the all-ones pattern at V = 3).
    """
    ca = _coeffs(a)
    return float((ca @ reference_vector(ca.shape[0]) + 1.0) / 2.0)


def lp_dot_distance(a, b, p):
    """Lp distance between vectors augmented with the orientation scalar."""
    ca, cb = _check_same_dimension(a, b)
    aug_a = np.append(ca, orientation_scalar(ca))
    aug_b = np.append(cb, orientation_scalar(cb))
    return _minkowski(aug_a, aug_b, p)


def generalized_eigenvalues(a, b, epsilon=DEFAULT_EPSILON, regularize=True):
    """Generalised eigenvalues of (A + eI) x = lambda (B + eI) x.

    With regularize=True the pair is reduced to a standard symmetric
    problem via Cholesky of the (now positive definite) right-hand matrix.
    The unregularised path uses the general nonsymmetric solver and is
    retained only to demonstrate its instability on singular inputs.
    """
    ma = a.to_matrix() if isinstance(a, CorrelationMatrix) else np.asarray(a, dtype=np.float64)
    mb = b.to_matrix() if isinstance(b, CorrelationMatrix) else np.asarray(b, dtype=np.float64)
    if ma.shape != mb.shape:
        raise ValueError("dimension mismatch")
    if not regularize:
        return np.sort(np.real(scipy.linalg.eigvals(ma, mb)))
    if epsilon <= 0:
        raise ValueError("epsilon must be positive")
    eye = np.eye(ma.shape[0])
    try:
        return np.sort(scipy.linalg.eigh(ma + epsilon * eye, mb + epsilon * eye, eigvals_only=True))
    except scipy.linalg.LinAlgError as exc:
        raise NumericalDistanceError(f"generalised eigenvalue failure: {exc}", ma, mb) from exc


def foerstner_distance(a, b, epsilon=DEFAULT_EPSILON):
    """Stabilised Foerstner metric: sqrt(sum ln^2(lambda_i + 1)).

    lambda_i are the generalised eigenvalues of the epsilon-regularised
    pair. Identical inputs give sqrt(V * ln^2(2)), not zero; the +1 inside
    the log is part of the stabilised definition.
    """
    lam = generalized_eigenvalues(a, b, epsilon=epsilon, regularize=True)
    if np.any(~np.isfinite(lam)) or np.any(lam <= -1):
        raise NumericalDistanceError("non-finite or out-of-domain generalised eigenvalues", a, b)
    return float(np.sqrt((np.log(lam + 1.0) ** 2).sum()))


def _matrix_log(m, epsilon):
    w, u = np.linalg.eigh(m + epsilon * np.eye(m.shape[0]))
    if np.any(w <= 0) or np.any(~np.isfinite(w)):
        raise NumericalDistanceError("matrix log undefined after regularisation", m, m)
    return (u * np.log(w)) @ u.T


def log_frobenius_distance(a, b, epsilon=DEFAULT_EPSILON):
    """Frobenius norm of log(A + eI) - log(B + eI) via eigendecomposition."""
    ma = a.to_matrix() if isinstance(a, CorrelationMatrix) else np.asarray(a, dtype=np.float64)
    mb = b.to_matrix() if isinstance(b, CorrelationMatrix) else np.asarray(b, dtype=np.float64)
    if ma.shape != mb.shape:
        raise ValueError("dimension mismatch")
    if epsilon <= 0:
        raise ValueError("epsilon must be positive")
    return float(np.linalg.norm(_matrix_log(ma, epsilon) - _matrix_log(mb, epsilon), ord="fro"))


@dataclass(frozen=True)
class DistanceFunction:
    """A configured distance, selectable by string key."""

    family: str  # lp | lp_ref | lp_dot | foerstner | log_frobenius
    p: float = 2.0
    epsilon: float = DEFAULT_EPSILON

    def __call__(self, a, b):
        if self.family == "lp":
            return lp_distance(a, b, self.p)
        if self.family == "lp_ref":
            return lp_ref_distance(a, b, self.p)
        if self.family == "lp_dot":
            return lp_dot_distance(a, b, self.p)
        if self.family == "foerstner":
            return foerstner_distance(a, b, self.epsilon)
        if self.family == "log_frobenius":
            return log_frobenius_distance(a, b, self.epsilon)
        raise ValueError(f"unknown family {self.family!r}")

    @property
    def key(self):
        if self.family in ("foerstner", "log_frobenius"):
            return self.family
        p = "inf" if self.p == math.inf else f"{self.p:g}"
        suffix = {"lp": "", "lp_ref": "_ref", "lp_dot": "_dot"}[self.family]
        return f"l{p}{suffix}"


def get_distance(key, epsilon=DEFAULT_EPSILON):
    """Resolve a distance function by its string key (see DISTANCE_KEYS)."""
    key = key.lower()
    if key == "foerstner":
        return DistanceFunction(family="foerstner", epsilon=epsilon)
    if key == "log_frobenius":
        return DistanceFunction(family="log_frobenius", epsilon=epsilon)
    family = "lp"
    base = key
    if key.endswith("_ref"):
        family, base = "lp_ref", key[:-4]
    elif key.endswith("_dot"):
        family, base = "lp_dot", key[:-4]
    if not base.startswith("l"):
        raise ValueError(f"unknown distance key {key!r}")
    order = base[1:]
    p = math.inf if order == "inf" else float(order)
    return DistanceFunction(family=family, p=p)


def _lp_cross(x, y, p):
    """All-pairs Minkowski distances between the rows of x and y."""
    diff = np.abs(x[:, None, :] - y[None, :, :])
    if p == math.inf:
        return diff.max(axis=2)
    return (diff**p).sum(axis=2) ** (1.0 / p)


def cross_distances(matrices_a, matrices_b, d):
    """Distance matrix between two lists of correlation matrices.

    Vector-family distances are evaluated with broadcasting; the matrix
    families fall back to the scalar implementations.
    """
    if d.family in ("lp", "lp_ref", "lp_dot"):
        xa = np.array([_coeffs(m) for m in matrices_a])
        xb = np.array([_coeffs(m) for m in matrices_b])
        if d.family == "lp_dot":
            ref = reference_vector(xa.shape[1])
            xa = np.column_stack([xa, (xa @ ref + 1.0) / 2.0])
            xb = np.column_stack([xb, (xb @ ref + 1.0) / 2.0])
        out = _lp_cross(xa, xb, d.p)
        if d.family == "lp_ref":
            ref = reference_vector(xa.shape[1])
            to_ref_a = _lp_cross(xa, ref[None, :], d.p)[:, 0]
            to_ref_b = _lp_cross(xb, ref[None, :], d.p)[:, 0]
            out = out * (to_ref_a[:, None] + to_ref_b[None, :])
        return out
    na, nb = len(matrices_a), len(matrices_b)
    out = np.empty((na, nb))
    for i in range(na):
        for j in range(nb):
            out[i, j] = d(matrices_a[i], matrices_b[j])
    return out


def pairwise_distances(matrices, d):
    """Symmetric full distance matrix over a list of correlation matrices.

    Foerstner's nonzero self-distance is kept on the diagonal verbatim.
    """
    if d.family in ("lp", "lp_ref", "lp_dot"):
        return cross_distances(matrices, matrices, d)
    n = len(matrices)
    out = np.zeros((n, n))
    for i in range(n):
        out[i, i] = d(matrices[i], matrices[i])
        for j in range(i + 1, n):
            out[i, j] = out[j, i] = d(matrices[i], matrices[j])
    return out
