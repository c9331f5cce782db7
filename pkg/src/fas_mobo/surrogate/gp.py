"""Exact Gaussian-process regression with a shared kernel across outputs.

Targets are standardized per output, so one Cholesky factor of
K + noise * I serves every output dimension. An optional exponential
temporal factor turns the kernel spatio-temporal.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.linalg import cho_solve, solve_triangular

from ..config_space import SpaceSpec
from ..errors import KernelIllConditionedError
from .data import embed, embedding_ranges, standardize

MAX_JITTER = 1e-4


@dataclass(frozen=True, eq=False)
class KernelSpec:
    lengthscales: np.ndarray
    family: str = "rbf"  # or "matern52"
    signal_var: float = 1.0
    noise_var: float = 1e-6
    tau: float | None = None  # temporal timescale in slots; None = static

    def __post_init__(self):
        if self.family not in ("rbf", "matern52"):
            raise ValueError(f"unknown kernel family {self.family!r}")
        if self.noise_var <= 0 or self.signal_var <= 0:
            raise ValueError("signal and noise variances must be positive")
        if self.tau is not None and self.tau <= 0:
            raise ValueError("tau must be positive")
        object.__setattr__(self, "lengthscales", np.asarray(self.lengthscales, dtype=float))


def default_kernel(space: SpaceSpec, embedding: str = "ordinal", family: str = "rbf", tau: float | None = None) -> KernelSpec:
    """Lengthscales at half the coordinate range, unit signal variance (standardized targets)."""
    return KernelSpec(lengthscales=embedding_ranges(space, embedding) / 2.0, family=family, tau=tau)


def kernel_matrix(spec: KernelSpec, x1, x2, t1=None, t2=None) -> np.ndarray:
    x1 = np.atleast_2d(np.asarray(x1, dtype=float)) / spec.lengthscales
    x2 = np.atleast_2d(np.asarray(x2, dtype=float)) / spec.lengthscales
    sq = np.sum(x1**2, 1)[:, None] + np.sum(x2**2, 1)[None, :] - 2.0 * x1 @ x2.T
    sq = np.maximum(sq, 0.0)
    if spec.family == "rbf":
        k = np.exp(-0.5 * sq)
    else:
        r = np.sqrt(5.0 * sq)
        k = (1.0 + r + r * r / 3.0) * np.exp(-r)
    k = spec.signal_var * k
    if spec.tau is not None and t1 is not None and t2 is not None:
        dt = np.abs(np.asarray(t1, dtype=float).reshape(-1, 1) - np.asarray(t2, dtype=float).reshape(1, -1))
        k = k * np.exp(-dt / spec.tau)
    return k


def kernel_eval(spec: KernelSpec, x, x2, t=None, t2=None) -> float:
    return float(kernel_matrix(spec, np.reshape(x, (1, -1)), np.reshape(x2, (1, -1)), t, t2)[0, 0])


def _jittered_cholesky(k: np.ndarray) -> tuple[np.ndarray, float]:
    jitter = 0.0
    scale = float(np.mean(np.diag(k)))
    while True:
        try:
            return np.linalg.cholesky(k + jitter * scale * np.eye(len(k))), jitter
        except np.linalg.LinAlgError:
            jitter = 1e-10 if jitter == 0.0 else jitter * 10
            if jitter > MAX_JITTER:
                raise KernelIllConditionedError("Cholesky failed even with maximal jitter", jitter=jitter) from None


@dataclass(frozen=True, eq=False)
class GpModel:
    spec: KernelSpec
    x_train: np.ndarray  # embedded inputs
    t_train: np.ndarray | None
    chol: np.ndarray
    alpha: np.ndarray  # (n, n_out) = K^{-1} y_std
    y_mean: np.ndarray
    y_std: np.ndarray
    jitter: float
    query_time: float | None = None

    def predict_std_units(self, x, t=None):
        t = self._times(len(np.atleast_2d(x)), t)
        k_star = kernel_matrix(self.spec, x, self.x_train, t, self.t_train)
        mean = k_star @ self.alpha
        v = solve_triangular(self.chol, k_star.T, lower=True)
        var = self.spec.signal_var - np.sum(v * v, axis=0)
        return mean, np.maximum(var, 0.0)

    def _times(self, n, t):
        if self.spec.tau is None:
            return None
        if t is None:
            t = self.query_time
        return np.broadcast_to(np.asarray(t, dtype=float), (n,))


def gp_fit(x, y, spec: KernelSpec, times=None, query_time=None) -> GpModel:
    """Posterior cache for standardized targets; deterministic in (x, y, spec)."""
    x = np.atleast_2d(np.asarray(x, dtype=float))
    y = np.asarray(y, dtype=float).reshape(len(x), -1)
    if len(x) < 1:
        raise ValueError("need at least one training sample")
    t = None if times is None else np.asarray(times, dtype=float)
    y_s, mean, std = standardize(y)
    k = kernel_matrix(spec, x, x, t, t) + spec.noise_var * np.eye(len(x))
    chol, jitter = _jittered_cholesky(k)
    alpha = cho_solve((chol, True), y_s)
    if query_time is None and t is not None:
        query_time = float(t.max())
    return GpModel(spec, x, t, chol, alpha, mean, std, jitter, query_time)


def gp_predict(model: GpModel, x, t=None) -> tuple[np.ndarray, np.ndarray]:
    """Per-output posterior mean and variance in target units."""
    mean, var = model.predict_std_units(x, t)
    return model.y_mean + mean * model.y_std, var[:, None] * model.y_std**2


class GpSurrogate:
    """GP posterior over encoded configurations with the sampling interface used by EHVI."""

    def __init__(self, space: SpaceSpec, embedding: str = "ordinal", family: str = "rbf", tau: float | None = None):
        self.space = space
        self.embedding = embedding
        self.spec = default_kernel(space, embedding, family, tau)
        self.model: GpModel | None = None

    def fit(self, coords, y, times=None, query_time=None) -> "GpSurrogate":
        self.model = gp_fit(embed(coords, self.space, self.embedding), y, self.spec, times, query_time)
        return self

    def predict(self, coords, t=None):
        return gp_predict(self.model, embed(coords, self.space, self.embedding), t)

    @property
    def n_outputs(self) -> int:
        return self.model.alpha.shape[1]

    def draw_eps(self, n_mc: int, rng: np.random.Generator) -> np.ndarray:
        return rng.standard_normal((n_mc, self.n_outputs))

    def sample(self, coords, eps) -> np.ndarray:
        """mu + sd * eps per output, clipped at zero; shape (n_mc, n, n_out)."""
        mean, var = self.predict(coords)
        eps = np.asarray(eps, dtype=float).reshape(-1, 1, self.n_outputs)
        return np.clip(mean[None] + np.sqrt(var)[None] * eps, 0.0, None)


def posterior_sample_gp(model: GpModel, x, eps, t=None) -> np.ndarray:
    mean, var = gp_predict(model, x, t)
    return np.clip(mean + np.sqrt(var) * np.asarray(eps, dtype=float), 0.0, None)

