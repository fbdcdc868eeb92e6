"""Gaussian-process regression with incremental Cholesky updates.

Zero-mean prior, unit-variance stationary kernels (squared-exponential or
half-integer Matern), homoscedastic observation noise. Posteriors are
immutable values: conditioning on one more observation returns a new
posterior whose Cholesky factor extends the old one by a single row, so a
sequential optimization loop pays O(n^2) per step instead of O(n^3).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Union

import numpy as np
from scipy.linalg import solve_triangular

__all__ = [
    "GaussianKernel",
    "MaternKernel",
    "Kernel",
    "GpPosterior",
    "GpNumericsError",
    "kernel_eval",
    "posterior_update",
    "predict",
    "information_gain",
    "max_variance_clip_seen",
    "reset_variance_clip_watermark",
]

# Jitter added (scaled by mean diagonal) when a factorization fails once.
JITTER = 1e-10
# Predicted variances this far below zero are treated as rounding and
# clipped; anything lower indicates a broken factorization and raises.
VARIANCE_CLIP = 1e-10

_clip_watermark = 0.0


def max_variance_clip_seen() -> float:
    """Largest negative-variance magnitude clipped to zero so far."""
    return _clip_watermark


def reset_variance_clip_watermark() -> None:
    global _clip_watermark
    _clip_watermark = 0.0


class GpNumericsError(RuntimeError):
    """Covariance factorization failed beyond the documented jitter."""


@dataclass(frozen=True)
class GaussianKernel:
    """Squared-exponential kernel exp(-|x1-x2|^2 / (2 l^2))."""

    lengthscale: float

    def __post_init__(self):
        if not self.lengthscale > 0:
            raise ValueError(f"lengthscale must be positive, got {self.lengthscale}")

    def of_distance(self, d: np.ndarray) -> np.ndarray:
        z = np.asarray(d, dtype=float) / self.lengthscale
        return np.exp(-0.5 * z * z)


@dataclass(frozen=True)
class MaternKernel:
    """Matern kernel, restricted to the half-integer orders 0.5, 1.5, 2.5.

    These admit closed forms (exponential times a low-order polynomial in
    sqrt(2 nu) d / l), so no Bessel evaluations are needed.
    """

    lengthscale: float
    nu: float = 2.5

    def __post_init__(self):
        if not self.lengthscale > 0:
            raise ValueError(f"lengthscale must be positive, got {self.lengthscale}")
        if self.nu not in (0.5, 1.5, 2.5):
            raise ValueError(f"nu must be one of 0.5/1.5/2.5, got {self.nu}")

    def of_distance(self, d: np.ndarray) -> np.ndarray:
        z = np.sqrt(2.0 * self.nu) * np.asarray(d, dtype=float) / self.lengthscale
        if self.nu == 0.5:
            return np.exp(-z)
        if self.nu == 1.5:
            return (1.0 + z) * np.exp(-z)
        return (1.0 + z + z * z / 3.0) * np.exp(-z)


Kernel = Union[GaussianKernel, MaternKernel]


def _pairwise_distance(X1: np.ndarray, X2: np.ndarray) -> np.ndarray:
    diff = X1[:, None, :] - X2[None, :, :]
    return np.sqrt(np.maximum(np.einsum("ijk,ijk->ij", diff, diff), 0.0))


def kernel_matrix(kernel: Kernel, X1: np.ndarray, X2: np.ndarray) -> np.ndarray:
    return kernel.of_distance(_pairwise_distance(X1, X2))


def kernel_eval(kernel: Kernel, x1, x2) -> float:
    """k(x1, x2) for two points of equal dimension."""
    a = np.atleast_1d(np.asarray(x1, dtype=float))
    b = np.atleast_1d(np.asarray(x2, dtype=float))
    if a.shape != b.shape or a.ndim != 1:
        raise ValueError(f"dimension mismatch: {a.shape} vs {b.shape}")
    return float(kernel.of_distance(np.linalg.norm(a - b)))


def _record_clip(magnitude: float):
    global _clip_watermark
    if magnitude > _clip_watermark:
        _clip_watermark = magnitude


def _clip_variances(var: np.ndarray) -> np.ndarray:
    worst = float(var.min(initial=0.0))
    if worst < -VARIANCE_CLIP:
        raise GpNumericsError(
            f"predicted variance {worst} below -{VARIANCE_CLIP}; factorization is off"
        )
    if worst < 0.0:
        _record_clip(-worst)
    return np.maximum(var, 0.0)


class GpPosterior:
    """Immutable GP posterior over observations (X, y).

    Internally stores the lower Cholesky factor L of K(X, X) + noise_var*I.
    ``update`` returns a new posterior; the receiver is never mutated, so
    concurrent predictions against one posterior are safe.
    """

    __slots__ = ("kernel", "noise_var", "X", "y", "L", "_alpha")

    def __init__(self, kernel: Kernel, noise_var: float, X=None, y=None, L=None):
        if not noise_var > 0:
            raise ValueError(f"noise_var must be positive, got {noise_var}")
        self.kernel = kernel
        self.noise_var = float(noise_var)
        if X is None:
            self.X = None
            self.y = np.empty(0)
            self.L = np.empty((0, 0))
            self._alpha = np.empty(0)
        else:
            self.X = X
            self.y = y
            self.L = L
            # alpha = (K + s2 I)^-1 y via two triangular solves
            tmp = solve_triangular(L, y, lower=True, check_finite=False)
            self._alpha = solve_triangular(L.T, tmp, lower=False, check_finite=False)

    @classmethod
    def empty(cls, kernel: Kernel, noise_var: float) -> "GpPosterior":
        return cls(kernel, noise_var)

    @property
    def n(self) -> int:
        return 0 if self.X is None else self.X.shape[0]

    def _check_dim(self, X: np.ndarray):
        if self.X is not None and X.shape[1] != self.X.shape[1]:
            raise ValueError(
                f"query dimension {X.shape[1]} != training dimension {self.X.shape[1]}"
            )

    def update(self, x, y: float) -> "GpPosterior":
        """Posterior conditioned on one more observation (x, y).

        Equivalent to refitting from scratch on the extended data; the
        Cholesky factor is extended by one row. If the new diagonal entry
        is not positive, the full matrix is refactorized once with
        JITTER-scaled regularization, then the failure is raised.
        """
        x = np.atleast_1d(np.asarray(x, dtype=float))[None, :]
        self._check_dim(x)
        if self.X is None:
            X_new = x
            y_new = np.array([float(y)])
            c = float(self.kernel.of_distance(0.0)) + self.noise_var
            L_new = np.array([[math.sqrt(c)]])
            return GpPosterior(self.kernel, self.noise_var, X_new, y_new, L_new)
        k_vec = kernel_matrix(self.kernel, self.X, x)[:, 0]
        c = float(self.kernel.of_distance(0.0)) + self.noise_var
        w = solve_triangular(self.L, k_vec, lower=True, check_finite=False)
        d2 = c - float(w @ w)
        X_new = np.vstack([self.X, x])
        y_new = np.append(self.y, float(y))
        if d2 > 0.0:
            n = self.n
            L_new = np.zeros((n + 1, n + 1))
            L_new[:n, :n] = self.L
            L_new[n, :n] = w
            L_new[n, n] = math.sqrt(d2)
        else:
            L_new = _factorize(self.kernel, self.noise_var, X_new)
        return GpPosterior(self.kernel, self.noise_var, X_new, y_new, L_new)

    def predict(self, x) -> tuple[float, float]:
        """Posterior mean and variance at a single point."""
        mean, var = self.predict_many(np.atleast_2d(np.asarray(x, dtype=float)))
        return float(mean[0]), float(var[0])

    def predict_many(self, X: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        """Vectorized posterior mean and variance at each row of X."""
        X = np.asarray(X, dtype=float)
        if X.ndim != 2:
            raise ValueError(f"expected a 2-D query array, got shape {X.shape}")
        prior_var = float(self.kernel.of_distance(0.0))
        if self.X is None:
            return np.zeros(X.shape[0]), np.full(X.shape[0], prior_var)
        self._check_dim(X)
        k_cross = kernel_matrix(self.kernel, self.X, X)  # n x m
        mean = k_cross.T @ self._alpha
        v = solve_triangular(self.L, k_cross, lower=True, check_finite=False)
        var = prior_var - np.einsum("ij,ij->j", v, v)
        return mean, _clip_variances(var)


def _factorize(kernel: Kernel, noise_var: float, X: np.ndarray) -> np.ndarray:
    """Cholesky of K + noise_var*I, with one jittered retry."""
    K = kernel_matrix(kernel, X, X)
    A = K + noise_var * np.eye(X.shape[0])
    try:
        return np.linalg.cholesky(A)
    except np.linalg.LinAlgError:
        pass
    jitter = JITTER * float(np.trace(A)) / X.shape[0]
    try:
        return np.linalg.cholesky(A + jitter * np.eye(X.shape[0]))
    except np.linalg.LinAlgError as exc:
        raise GpNumericsError(
            f"covariance factorization failed even with jitter {jitter:g}"
        ) from exc


def fit_posterior(kernel: Kernel, noise_var: float, X, y) -> GpPosterior:
    """Batch-fit a posterior on (X, y); equivalent to chained updates."""
    X = np.atleast_2d(np.asarray(X, dtype=float))
    y = np.asarray(y, dtype=float)
    if X.shape[0] != y.shape[0]:
        raise ValueError(f"{X.shape[0]} inputs vs {y.shape[0]} outputs")
    if X.shape[0] == 0:
        return GpPosterior.empty(kernel, noise_var)
    return GpPosterior(kernel, noise_var, X, y, _factorize(kernel, noise_var, X))


# Functional aliases mirroring the object API.

def posterior_update(gp: GpPosterior, x, y: float) -> GpPosterior:
    return gp.update(x, y)


def predict(gp: GpPosterior, x) -> tuple[float, float]:
    return gp.predict(x)


def information_gain(variance_history, noise_var: float) -> float:
    """Sequential information gain 0.5 * sum log(1 + var_t / noise_var).

    ``variance_history`` holds the predictive variances of the points a
    sequential strategy selected, each taken just before its observation
    was incorporated. This sequential sum lower-bounds the max-over-
    subsets information gain of the same budget.
    """
    if not noise_var > 0:
        raise ValueError(f"noise_var must be positive, got {noise_var}")
    hist = np.asarray(list(variance_history), dtype=float)
    if hist.size == 0:
        return 0.0
    if np.any(hist < 0):
        raise ValueError("variance history must be non-negative")
    return 0.5 * float(np.sum(np.log1p(hist / noise_var)))
