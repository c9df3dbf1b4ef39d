"""Gaussian-process surrogate with an ARD squared-exponential kernel.

Inputs are expected in the unit box; targets are standardized per model.
Each fidelity gets its own independent GP.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import cho_solve, solve_triangular
from scipy.optimize import minimize

FORMAT_VERSION = 1
JITTER_START = 1e-10
JITTER_CAP = 1e-4

# box for hyperparameter search, in natural units
LENGTHSCALE_BOUNDS = (1e-2, 2e1)
VARIANCE_BOUNDS = (1e-4, 1e2)
NOISE_BOUNDS = (1e-4, 1.0)


class IllConditioned(np.linalg.LinAlgError):
    """Cholesky failed even at the jitter cap."""


@dataclass(frozen=True)
class KernelParams:
    lengthscale: np.ndarray
    variance: float = 1.0
    noise: float = 0.0

    def __post_init__(self):
        ell = np.atleast_1d(np.asarray(self.lengthscale, dtype=float))
        if np.any(ell <= 0) or not np.all(np.isfinite(ell)):
            raise ValueError("length scales must be positive")
        if not self.variance > 0:
            raise ValueError("output variance must be positive")
        if not self.noise >= 0:
            raise ValueError("noise must be nonnegative")
        object.__setattr__(self, "lengthscale", ell)

    @classmethod
    def default(cls, dim: int) -> KernelParams:
        return cls(np.full(dim, 0.3), 1.0, 1e-3)

    def to_log(self) -> np.ndarray:
        return np.concatenate([np.log(self.lengthscale), [math.log(self.variance), math.log(max(self.noise, 1e-300))]])

    @classmethod
    def from_log(cls, theta) -> KernelParams:
        theta = np.asarray(theta, dtype=float)
        return cls(np.exp(theta[:-2]), float(np.exp(theta[-2])), float(np.exp(theta[-1])))


def se_kernel(X1, X2, params: KernelParams) -> np.ndarray:
    """sigma^2 exp(-0.5 sum_d ((x_d - x'_d) / l_d)^2); vectors give a scalar."""
    a, b = np.asarray(X1, dtype=float), np.asarray(X2, dtype=float)
    scalar = a.ndim == 1 and b.ndim == 1
    A = np.atleast_2d(a) / params.lengthscale
    B = np.atleast_2d(b) / params.lengthscale
    d2 = np.sum(A**2, 1)[:, None] + np.sum(B**2, 1)[None, :] - 2 * A @ B.T
    K = params.variance * np.exp(-0.5 * np.clip(d2, 0.0, None))
    return float(K[0, 0]) if scalar else K


def cholesky_jitter(K: np.ndarray, scale: float) -> tuple[np.ndarray, float]:
    """Lower Cholesky factor, adding diagonal jitter only if needed."""
    try:
        return np.linalg.cholesky(K), 0.0
    except np.linalg.LinAlgError:
        pass
    jitter = JITTER_START * scale
    eye = np.eye(K.shape[0])
    while jitter <= JITTER_CAP * scale * (1 + 1e-12):
        try:
            return np.linalg.cholesky(K + jitter * eye), jitter
        except np.linalg.LinAlgError:
            jitter *= 2.0
    raise IllConditioned(f"Cholesky failed with jitter up to {JITTER_CAP * scale:.3g}")


@dataclass
class GaussianProcess:
    """Exact GP regression for one fidelity."""

    params: KernelParams
    X: np.ndarray = None
    y: np.ndarray = None
    variance_scale: float = 1.0
    _cache: dict = field(default=None, repr=False)

    def __post_init__(self):
        dim = self.params.lengthscale.size
        self.X = np.zeros((0, dim)) if self.X is None else np.atleast_2d(np.asarray(self.X, dtype=float))
        self.y = np.zeros(0) if self.y is None else np.asarray(self.y, dtype=float).ravel()
        if self.X.shape[0] != self.y.size:
            raise ValueError("X and y lengths differ")

    @property
    def dim(self) -> int:
        return self.params.lengthscale.size

    @property
    def n(self) -> int:
        return self.y.size

    def add(self, x, y) -> None:
        self.X = np.vstack([self.X, np.atleast_2d(np.asarray(x, dtype=float))])
        self.y = np.append(self.y, np.asarray(y, dtype=float).ravel())
        self._cache = None

    def set_params(self, params: KernelParams) -> None:
        self.params = params
        self._cache = None

    def standardization(self) -> tuple[float, float]:
        if self.n == 0:
            return 0.0, 1.0
        mean = float(self.y.mean())
        std = float(self.y.std()) if self.n > 1 else 0.0
        return mean, std if std > 0 else 1.0

    def _factor(self) -> dict:
        if self._cache is None:
            mean, std = self.standardization()
            z = (self.y - mean) / std
            K = se_kernel(self.X, self.X, self.params) + self.params.noise**2 * np.eye(self.n)
            L, jitter = cholesky_jitter(K, self.params.variance)
            alpha = cho_solve((L, True), z)
            self._cache = dict(L=L, alpha=alpha, z=z, mean=mean, std=std, jitter=jitter)
        return self._cache

    def posterior(self, Xq) -> tuple[np.ndarray, np.ndarray]:
        """Posterior mean and standard deviation in target units."""
        Xq = np.asarray(Xq, dtype=float)
        single = Xq.ndim == 1
        Xq = np.atleast_2d(Xq)
        prior_var = np.full(Xq.shape[0], self.params.variance)
        if self.n == 0:
            mu, var = np.zeros(Xq.shape[0]), prior_var
        else:
            c = self._factor()
            k = se_kernel(self.X, Xq, self.params)
            v = solve_triangular(c["L"], k, lower=True)
            mu = c["mean"] + c["std"] * (k.T @ c["alpha"])
            var = c["std"] ** 2 * (prior_var - np.sum(v**2, 0))
        sd = np.sqrt(np.clip(var, 0.0, None) * self.variance_scale)
        if single:
            return float(mu[0]), float(sd[0])
        return mu, sd

    def log_marginal_likelihood(self, params: KernelParams | None = None) -> tuple[float, np.ndarray]:
        """Evidence of the standardized targets and its gradient in log-parameters.

        Gradient order: log lengthscales, log variance, log noise.
        """
        p = self.params if params is None else params
        if self.n == 0:
            raise ValueError("need at least one observation")
        mean, std = self.standardization()
        z = (self.y - mean) / std
        Kse = se_kernel(self.X, self.X, p)
        K = Kse + p.noise**2 * np.eye(self.n)
        L, _ = cholesky_jitter(K, p.variance)
        alpha = cho_solve((L, True), z)
        value = -0.5 * z @ alpha - np.log(np.diag(L)).sum() - 0.5 * self.n * math.log(2 * math.pi)
        W = np.outer(alpha, alpha) - cho_solve((L, True), np.eye(self.n))
        grad = np.empty(self.dim + 2)
        for d in range(self.dim):
            D = (self.X[:, d, None] - self.X[None, :, d]) ** 2 / p.lengthscale[d] ** 2
            grad[d] = 0.5 * np.sum(W * Kse * D)
        grad[-2] = 0.5 * np.sum(W * Kse)
        grad[-1] = p.noise**2 * np.trace(W)
        return float(value), grad

    def loo_standardized_residuals(self) -> np.ndarray:
        """Leave-one-out residuals divided by their predictive std (closed form)."""
        c = self._factor()
        Kinv = cho_solve((c["L"], True), np.eye(self.n))
        return c["alpha"] / np.sqrt(np.diag(Kinv))

    def to_dict(self) -> dict:
        return {
            "version": FORMAT_VERSION,
            "lengthscale": self.params.lengthscale.tolist(),
            "variance": self.params.variance,
            "noise": self.params.noise,
            "variance_scale": self.variance_scale,
            "X": self.X.tolist(),
            "y": self.y.tolist(),
        }

    @classmethod
    def from_dict(cls, d: dict) -> GaussianProcess:
        if d.get("version") != FORMAT_VERSION:
            raise ValueError(f"unsupported model format version {d.get('version')!r}")
        params = KernelParams(np.array(d["lengthscale"]), d["variance"], d["noise"])
        X = np.array(d["X"], dtype=float).reshape(-1, params.lengthscale.size)
        return cls(params, X, np.array(d["y"], dtype=float), d["variance_scale"])


def _log_bounds(dim: int) -> list:
    lb = [tuple(np.log(LENGTHSCALE_BOUNDS))] * dim
    return lb + [tuple(np.log(VARIANCE_BOUNDS)), tuple(np.log(NOISE_BOUNDS))]


def fit_hyperparams(gp: GaussianProcess, restarts: int = 3, rng: np.random.Generator | None = None) -> KernelParams:
    """Multi-start L-BFGS-B on the evidence; never returns worse than the incumbent."""
    if gp.n < 2:
        raise ValueError("need at least two observations")
    rng = np.random.default_rng(0) if rng is None else rng
    bounds = _log_bounds(gp.dim)
    lo, hi = np.array(bounds).T

    def neg(theta):
        try:
            v, g = gp.log_marginal_likelihood(KernelParams.from_log(theta))
        except IllConditioned:
            return 1e25, np.zeros_like(theta)
        return -v, -g

    best = gp.params
    try:
        best_value = gp.log_marginal_likelihood(best)[0]
    except IllConditioned:
        best_value = -math.inf
    starts = [np.clip(best.to_log(), lo, hi)] + [rng.uniform(lo, hi) for _ in range(restarts)]
    for theta0 in starts:
        try:
            res = minimize(neg, theta0, jac=True, method="L-BFGS-B", bounds=bounds)
        except (ValueError, FloatingPointError):
            continue
        if np.all(np.isfinite(res.x)) and -res.fun > best_value and res.fun < 1e25:
            best, best_value = KernelParams.from_log(res.x), -res.fun
    gp.set_params(best)
    return best


def calibration_scale(z) -> float:
    """Variance multiplier c* = mean of squared standardized residuals."""
    z = np.asarray(z, dtype=float)
    if z.size == 0:
        raise ValueError("need held-out residuals")
    return float(np.mean(z**2))


def recalibrate(gp: GaussianProcess, X_held, y_held) -> float:
    """Set the model's variance scale from held-out data; returns c*."""
    gp.variance_scale = 1.0
    mu, sd = gp.posterior(np.atleast_2d(X_held))
    z = (np.asarray(y_held, dtype=float) - mu) / np.maximum(sd, 1e-300)
    c = calibration_scale(z)
    gp.variance_scale = c
    return c


class SurrogateModel:
    """One independent GP per fidelity level."""

    def __init__(self, dim: int, n_fidelities: int, params: KernelParams | None = None):
        p = KernelParams.default(dim) if params is None else params
        self.models = [GaussianProcess(p) for _ in range(n_fidelities)]

    def __getitem__(self, m: int) -> GaussianProcess:
        """Model for fidelity m (1-based)."""
        return self.models[m - 1]

    def __len__(self) -> int:
        return len(self.models)

    def posterior(self, Xq, m: int):
        return self[m].posterior(Xq)

    def add(self, x, y, m: int) -> None:
        self[m].add(x, y)

    def dumps(self) -> str:
        return json.dumps({"version": FORMAT_VERSION, "models": [g.to_dict() for g in self.models]}, sort_keys=True)

    @classmethod
    def loads(cls, text: str) -> SurrogateModel:
        d = json.loads(text)
        if d.get("version") != FORMAT_VERSION:
            raise ValueError(f"unsupported model format version {d.get('version')!r}")
        gps = [GaussianProcess.from_dict(g) for g in d["models"]]
        obj = cls(gps[0].dim, len(gps))
        obj.models = gps
        return obj
