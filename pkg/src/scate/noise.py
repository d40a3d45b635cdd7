"""Gaussian noise models with cached whitening transforms."""

from __future__ import annotations

import numpy as np
from scipy.linalg import cholesky, solve_triangular


class NoiseModel:
    """SPD covariance Sigma with whitening W such that W^T W = Sigma^-1.

    Whitened residuals satisfy ||W r||^2 = r^T Sigma^-1 r, so factor errors
    accumulate as plain squared norms.
    """

    def __init__(self, covariance) -> None:
        sigma = np.atleast_2d(np.asarray(covariance, dtype=float))
        if sigma.shape[0] != sigma.shape[1]:
            raise ValueError("covariance must be square")
        if not np.allclose(sigma, sigma.T):
            raise ValueError("covariance must be symmetric")
        try:
            lower = cholesky(sigma, lower=True)
        except np.linalg.LinAlgError as exc:  # pragma: no cover - scipy raises its own
            raise ValueError("covariance must be positive definite") from exc
        self.covariance = sigma
        # Sigma = L L^T  =>  W = L^-1 gives W^T W = Sigma^-1
        self.whitener = solve_triangular(lower, np.eye(sigma.shape[0]), lower=True)

    @property
    def dim(self) -> int:
        return self.covariance.shape[0]

    @classmethod
    def isotropic(cls, dim: int, sigma: float) -> "NoiseModel":
        return cls(np.eye(dim) * float(sigma) ** 2)

    @classmethod
    def diagonal(cls, sigmas) -> "NoiseModel":
        s = np.asarray(sigmas, dtype=float)
        return cls(np.diag(s**2))

    def whiten(self, r: np.ndarray) -> np.ndarray:
        return self.whitener @ r

    def whiten_jacobian(self, jac: np.ndarray) -> np.ndarray:
        return self.whitener @ jac
