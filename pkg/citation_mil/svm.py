"""
Soft-margin kernel classifier with a radial-basis kernel, trained by
sequential minimal optimization on the dual.

The solver works on the maximal violating pair of the current gradient
(first-order working set selection) and visits candidates in index order,
so training is deterministic.
"""

import logging
from dataclasses import dataclass

import numpy as np

from .bags import NEGATIVE, POSITIVE
from .errors import ContractError

logger = logging.getLogger(__name__)

# curvature floor for pairs of identical rows
TAU = 1e-12


def rbf_kernel(u, v, gamma):
    """exp(-gamma * ||u_i - v_j||^2) for every row pair."""
    u = np.atleast_2d(np.asarray(u, dtype=np.float64))
    v = np.atleast_2d(np.asarray(v, dtype=np.float64))
    diff = u[:, None, :] - v[None, :, :]
    return np.exp(-gamma * np.einsum("ijk,ijk->ij", diff, diff))


@dataclass(frozen=True, eq=False)
class KernelMachine:
    """Kernel expansion sum_t alpha_t y_t K(x_t, x) + bias over the support vectors."""

    gamma: float
    c: float
    support_vectors: np.ndarray
    support_labels: np.ndarray
    alphas: np.ndarray
    bias: float
    support_indices: tuple = ()

    def decision_function(self, x):
        kernel = rbf_kernel(x, self.support_vectors, self.gamma)
        return kernel @ (self.alphas * self.support_labels) + self.bias

    def decision_from_kernel(self, kernel_rows):
        """Decision values from kernel rows against the full training set."""
        kernel_rows = np.atleast_2d(kernel_rows)[:, list(self.support_indices)]
        return kernel_rows @ (self.alphas * self.support_labels) + self.bias

    def predict(self, x):
        return np.where(self.decision_function(x) >= 0.0, POSITIVE, NEGATIVE)

    def to_dict(self):
        return {
            "gamma": self.gamma,
            "c": self.c,
            "alphas": self.alphas.tolist(),
            "bias": self.bias,
            "support_vectors": self.support_vectors.tolist(),
            "support_labels": [int(y) for y in self.support_labels],
        }

    @classmethod
    def from_dict(cls, raw):
        vectors = np.asarray(raw["support_vectors"], dtype=np.float64)
        return cls(
            gamma=float(raw["gamma"]),
            c=float(raw["c"]),
            support_vectors=vectors.reshape(len(raw["alphas"]), -1),
            support_labels=np.asarray(raw["support_labels"], dtype=np.float64),
            alphas=np.asarray(raw["alphas"], dtype=np.float64),
            bias=float(raw["bias"]),
        )


def _bias(y, alpha, grad, c):
    """Intercept from the KKT conditions: mean over free coefficients, else midpoint of the bounds."""
    y_grad = y * grad
    upper = alpha >= c
    lower = alpha <= 0.0
    free = ~(upper | lower)
    if np.any(free):
        rho = float(np.mean(y_grad[free]))
    else:
        ub_mask = (upper & (y == NEGATIVE)) | (lower & (y == POSITIVE))
        lb_mask = (upper & (y == POSITIVE)) | (lower & (y == NEGATIVE))
        ub = float(np.min(y_grad[ub_mask])) if np.any(ub_mask) else np.inf
        lb = float(np.max(y_grad[lb_mask])) if np.any(lb_mask) else -np.inf
        rho = (ub + lb) / 2.0 if np.isfinite(ub) and np.isfinite(lb) else (ub if np.isfinite(ub) else lb)
    return -rho


def fit_kernel_machine(x, y, gamma, c, tol=1e-3, max_iter=100_000, kernel=None):
    """
    Train the soft-margin classifier.

    Args:
        x: (n, J) training rows.
        y: n labels in {-1, +1}, both classes present.
        gamma: RBF kernel coefficient, > 0.
        c: box constraint, > 0.
        tol: stopping tolerance on the maximal KKT violation.
        max_iter: bound on pair updates.
        kernel: precomputed (n, n) kernel matrix, computed when None.

    Returns:
        KernelMachine whose support coefficients lie in [0, c] with
        sum(alpha * y) == 0 up to rounding.
    """
    x = np.atleast_2d(np.asarray(x, dtype=np.float64))
    y = np.asarray(y, dtype=np.float64)
    if gamma <= 0 or c <= 0:
        raise ContractError(f"gamma and c must be positive, got {gamma}, {c}")
    if x.shape[0] != y.shape[0]:
        raise ContractError(f"{x.shape[0]} rows but {y.shape[0]} labels")
    if not (np.any(y == POSITIVE) and np.any(y == NEGATIVE)):
        raise ContractError("training labels must contain both classes")

    K = rbf_kernel(x, x, gamma) if kernel is None else np.asarray(kernel, dtype=np.float64)
    n = y.shape[0]
    alpha = np.zeros(n)
    # gradient of 0.5 a'Qa - e'a with Q = yy'K
    grad = -np.ones(n)
    diag = np.diag(K)

    iterations = 0
    while iterations < max_iter:
        violation = -y * grad
        up = ((y == POSITIVE) & (alpha < c)) | ((y == NEGATIVE) & (alpha > 0.0))
        low = ((y == POSITIVE) & (alpha > 0.0)) | ((y == NEGATIVE) & (alpha < c))
        if not (np.any(up) and np.any(low)):
            break
        up_idx = np.flatnonzero(up)
        low_idx = np.flatnonzero(low)
        i = int(up_idx[np.argmax(violation[up_idx])])
        j = int(low_idx[np.argmin(violation[low_idx])])
        gap = violation[i] - violation[j]
        if gap <= tol:
            break

        curvature = max(diag[i] + diag[j] - 2.0 * K[i, j], TAU)
        room_i = c - alpha[i] if y[i] == POSITIVE else alpha[i]
        room_j = alpha[j] if y[j] == POSITIVE else c - alpha[j]
        step = min(gap / curvature, room_i, room_j)

        alpha[i] = min(max(alpha[i] + y[i] * step, 0.0), c)
        alpha[j] = min(max(alpha[j] - y[j] * step, 0.0), c)
        grad += step * y * (K[:, i] - K[:, j])
        iterations += 1
    else:
        logger.warning(f"SMO stopped after {max_iter} updates without reaching tolerance {tol}")

    bias = _bias(y, alpha, grad, c)
    support = np.flatnonzero(alpha > 0.0)
    logger.debug(f"SMO converged in {iterations} updates, {support.shape[0]} support vectors")
    return KernelMachine(
        gamma=float(gamma),
        c=float(c),
        support_vectors=x[support].copy(),
        support_labels=y[support].copy(),
        alphas=alpha[support].copy(),
        bias=float(bias),
        support_indices=tuple(int(t) for t in support),
    )
