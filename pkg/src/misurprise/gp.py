"""Exact Gaussian-process regression with fixed hyperparameters.

No marginal-likelihood optimisation: the kernel is given, targets are centred
by their training mean, and the observation noise variance is fixed.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Literal

import numpy as np
from scipy.linalg import cho_solve, cholesky, solve_triangular
from scipy.spatial.distance import cdist

from .surprise import PredictiveGaussian

Family = Literal["matern_2_5", "matern_1_5", "squared_exponential"]

JITTERS = (0.0, 1e-10, 1e-9, 1e-8, 1e-7, 1e-6)
SQRT3 = math.sqrt(3.0)
SQRT5 = math.sqrt(5.0)


@dataclass(frozen=True)
class KernelSpec:
    family: Family = "matern_2_5"
    length_scale: float = 0.1
    signal_variance: float = 1.0

    def __post_init__(self):
        if self.family not in ("matern_2_5", "matern_1_5", "squared_exponential"):
            raise ValueError(f"unknown kernel family {self.family!r}")
        if not (self.length_scale > 0 and self.signal_variance > 0):
            raise ValueError("kernel hyperparameters must be positive")

    def from_distance(self, r: np.ndarray) -> np.ndarray:
        s = np.asarray(r, dtype=float) / self.length_scale
        if self.family == "matern_2_5":
            k = (1.0 + SQRT5 * s + (5.0 / 3.0) * s * s) * np.exp(-SQRT5 * s)
        elif self.family == "matern_1_5":
            k = (1.0 + SQRT3 * s) * np.exp(-SQRT3 * s)
        else:
            k = np.exp(-0.5 * s * s)
        return self.signal_variance * k

    def __call__(self, a, b) -> np.ndarray:
        return self.from_distance(cdist(as_points(a), as_points(b)))

    def with_signal_variance(self, v: float) -> "KernelSpec":
        return KernelSpec(self.family, self.length_scale, v)


def as_points(X) -> np.ndarray:
    X = np.asarray(X, dtype=float)
    if X.ndim == 0:
        return X.reshape(1, 1)
    if X.ndim == 1:
        return X.reshape(-1, 1)
    return X


def default_kernel(X, y, family: Family = "matern_2_5", diameter: float | None = None) -> KernelSpec:
    """Length scale = a tenth of the domain diameter, signal variance = target variance."""
    X = as_points(X)
    if diameter is None:
        span = X.max(axis=0) - X.min(axis=0)
        diameter = float(np.linalg.norm(span)) or 1.0
    v = float(np.var(y)) if len(y) > 1 else 0.0
    return KernelSpec(family, 0.1 * diameter, v if v > 1e-12 else 1.0)


@dataclass(frozen=True, eq=False)
class GpModel:
    X: np.ndarray
    y: np.ndarray
    kernel: KernelSpec
    noise_variance: float
    y_mean: float
    chol: np.ndarray = field(repr=False)
    alpha: np.ndarray = field(repr=False)
    jitter: float = 0.0

    @property
    def n(self) -> int:
        return self.X.shape[0]

    def latent(self, Xq, K_qX: np.ndarray | None = None) -> tuple[np.ndarray, np.ndarray]:
        """Posterior mean and latent (noise-free) variance at query points."""
        Xq = as_points(Xq)
        if K_qX is None:
            K_qX = self.kernel(Xq, self.X)
        mean = self.y_mean + K_qX @ self.alpha
        v = solve_triangular(self.chol, K_qX.T, lower=True, check_finite=False)
        var = self.kernel.signal_variance - np.einsum("ij,ij->j", v, v)
        return mean, np.maximum(var, 1e-15)

    def mean(self, Xq, K_qX: np.ndarray | None = None) -> np.ndarray:
        if K_qX is None:
            K_qX = self.kernel(as_points(Xq), self.X)
        return self.y_mean + K_qX @ self.alpha

    def predict_many(self, Xq) -> tuple[np.ndarray, np.ndarray]:
        """Predictive mean and variance (latent + noise) at query points."""
        m, v = self.latent(Xq)
        return m, v + self.noise_variance


def fit(X, y, kernel: KernelSpec, noise_variance: float, center: bool = True,
        gram: np.ndarray | None = None) -> GpModel:
    """Factor ``k(X, X) + noise * I``. ``gram`` may supply a precomputed ``k(X, X)``."""
    X = as_points(X)
    y = np.asarray(y, dtype=float).ravel()
    if X.shape[0] != y.size or y.size < 1:
        raise ValueError("need as many targets as points, and at least one")
    if not noise_variance > 0:
        raise ValueError("noise_variance must be positive")
    y_mean = float(y.mean()) if center else 0.0
    K = kernel(X, X) if gram is None else np.array(gram, dtype=float)
    if K.shape != (X.shape[0], X.shape[0]):
        raise ValueError("gram matrix shape does not match the inputs")
    K[np.diag_indices_from(K)] += noise_variance
    last = None
    for jitter in JITTERS:
        try:
            Kj = K if jitter == 0.0 else K + jitter * np.eye(len(K))
            L = cholesky(Kj, lower=True, check_finite=False)
            break
        except np.linalg.LinAlgError as e:
            last = e
    else:
        raise np.linalg.LinAlgError(
            f"Gram matrix of {len(K)} points not positive definite even with jitter "
            f"{JITTERS[-1]:g}: {last}")
    alpha = cho_solve((L, True), y - y_mean, check_finite=False)
    return GpModel(X, y, kernel, float(noise_variance), y_mean, L, alpha, jitter)


def predict(model: GpModel, x) -> PredictiveGaussian:
    m, v = model.predict_many(np.atleast_2d(np.asarray(x, dtype=float)))
    return PredictiveGaussian(float(m[0]), float(v[0]))


def predictive_entropy(pred: PredictiveGaussian) -> float:
    """Differential entropy of a Gaussian predictive, in nats."""
    return 0.5 * math.log(2.0 * math.pi * math.e * pred.variance)


def posterior_after_observation(pred_latent_mean: float, pred_latent_var: float,
                                noise_variance: float, y: float) -> tuple[float, float]:
    """Latent posterior at x after also observing ``y`` at x itself (rank-one update)."""
    gain = pred_latent_var / (pred_latent_var + noise_variance)
    return (pred_latent_mean + gain * (y - pred_latent_mean),
            pred_latent_var * noise_variance / (pred_latent_var + noise_variance))


class VarianceTracker:
    """Posterior latent variance over fixed candidates as extra inputs are conditioned on.

    The variance of a GP does not depend on the observed targets, so greedy
    within-batch selection can add points one at a time with rank-one updates
    instead of refitting.
    """

    def __init__(self, model: GpModel, candidates: np.ndarray, K_cX: np.ndarray | None = None,
                 kernel_column=None):
        self.model = model
        # optional j -> k(candidates, candidate j), to skip kernel evaluation
        self._kernel_column = kernel_column
        self.candidates = as_points(candidates)
        if K_cX is None:
            K_cX = model.kernel(self.candidates, model.X)
        # V[:, j] = L^-1 k(X, c_j)
        self._V = solve_triangular(model.chol, K_cX.T, lower=True, check_finite=False)
        self.variance = np.maximum(model.kernel.signal_variance - np.einsum("ij,ij->j", self._V, self._V), 1e-15)
        self._cols: list[np.ndarray] = []
        self._scale: list[float] = []

    def covariance_with(self, j: int) -> np.ndarray:
        """Current posterior covariance between every candidate and candidate j."""
        if self._kernel_column is not None:
            k = self._kernel_column(j)
        else:
            k = self.model.kernel(self.candidates, self.candidates[j:j + 1])[:, 0]
        c = k - self._V.T @ self._V[:, j]
        for col, s in zip(self._cols, self._scale):
            c = c - col * (col[j] * s)
        return c

    def condition_on(self, j: int) -> None:
        c = self.covariance_with(j)
        s = 1.0 / (c[j] + self.model.noise_variance)
        self._cols.append(c)
        self._scale.append(s)
        self.variance = np.maximum(self.variance - c * c * s, 1e-15)


class GridGp:
    """GP fitting restricted to a fixed candidate set.

    The unit-variance Gram matrix over all candidates is computed once, so a
    fit on any subset of candidate indices only needs index lookups plus a
    Cholesky factorisation. Signal variance is the target variance at each fit.
    """

    def __init__(self, points, family: Family, length_scale: float, noise_variance: float):
        self.points = as_points(points)
        self.unit = KernelSpec(family, length_scale, 1.0)
        self.noise_variance = float(noise_variance)
        self.K = self.unit(self.points, self.points)

    def fit(self, idx, y) -> GpModel:
        idx = np.asarray(idx, dtype=np.int64)
        y = np.asarray(y, dtype=float)
        v = float(np.var(y)) if y.size > 1 else 0.0
        sv = v if v > 1e-12 else 1.0
        gram = sv * self.K[np.ix_(idx, idx)]
        return fit(self.points[idx], y, self.unit.with_signal_variance(sv),
                   self.noise_variance, gram=gram)

    def cross(self, model: GpModel, idx) -> np.ndarray:
        """k(all candidates, training inputs) for a model fitted on ``idx``."""
        # K is symmetric, and slicing rows is much cheaper than slicing columns
        return (model.kernel.signal_variance * self.K[np.asarray(idx, dtype=np.int64)]).T

    def mean(self, model: GpModel, idx) -> np.ndarray:
        rows = self.K[np.asarray(idx, dtype=np.int64)]
        return model.y_mean + model.kernel.signal_variance * (model.alpha @ rows)

    def column(self, model: GpModel, j: int) -> np.ndarray:
        return model.kernel.signal_variance * self.K[:, j]
