"""Maximum-entropy subset sampling.

A size-s subset of a candidate pool is drawn with probability proportional
to the product of relaxation weights, where the weights solve a concave
relaxation of the log-determinant subset problem. Used to pick
space-filling seed designs for the optimizer.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.stats import qmc

from .space import SearchSpace


class Degenerate(ValueError):
    """The covariance matrix has rank below the subset size."""


class NumericalUnderflow(ArithmeticError):
    """Every size-s subset product vanished, even in log domain."""


@dataclass(frozen=True)
class MesaProblem:
    """Covariance C = V V^T over n candidates, subset size s."""

    C: np.ndarray
    V: np.ndarray
    s: int

    @classmethod
    def from_covariance(cls, C, s: int, rank_tol: float = 1e-10) -> MesaProblem:
        C = np.asarray(C, dtype=float)
        if C.ndim != 2 or C.shape[0] != C.shape[1]:
            raise ValueError("C must be square")
        scale = max(np.abs(C).max(), 1.0)
        if np.abs(C - C.T).max() > 1e-10 * scale:
            raise ValueError("C must be symmetric")
        C = 0.5 * (C + C.T)
        lam, U = np.linalg.eigh(C)
        if lam[0] < -1e-10 * scale:
            raise ValueError("C must be positive semidefinite")
        keep = lam > rank_tol * max(lam[-1], 0.0)
        if keep.sum() < s:
            raise Degenerate(f"rank {int(keep.sum())} < subset size {s}")
        V = U[:, keep] * np.sqrt(lam[keep])
        if not 1 <= s <= C.shape[0]:
            raise ValueError("need 1 <= s <= n")
        return cls(C, V, int(s))

    @property
    def n(self) -> int:
        return self.C.shape[0]

    @property
    def d(self) -> int:
        return self.V.shape[1]


@dataclass(frozen=True)
class RelaxationSolution:
    xhat: np.ndarray
    objective: float
    kkt_residual: float
    iterations: int
    converged: bool


@dataclass(frozen=True)
class SampledSubset:
    selected: tuple
    rejected: tuple


def gamma_s(M, s: int) -> float:
    """Product of the s largest eigenvalues of a symmetric matrix."""
    lam = np.clip(np.linalg.eigvalsh(np.asarray(M, dtype=float)), 0.0, None)
    return float(np.prod(np.sort(lam)[::-1][:s]))


def _split_index(lam: np.ndarray, s: int) -> int:
    # first k < s with lam[k-1] > sum(lam[k:]) / (s - k) >= lam[k], lam descending
    for k in range(s):
        tail = lam[k:].sum() / (s - k)
        upper = math.inf if k == 0 else lam[k - 1]
        if upper > tail >= lam[k]:
            return k
    return s - 1


def log_gamma_concave(lam, s: int) -> float:
    """Log of the concave extension of the top-s eigenvalue product.

    The leading k eigenvalues are kept and the remaining s - k factors are
    replaced by the mean of the tail. At rank-s matrices this equals the
    plain product of the s largest eigenvalues.
    """
    lam = np.sort(np.clip(np.asarray(lam, dtype=float), 0.0, None))[::-1]
    k = _split_index(lam, s)
    tail = lam[k:].sum() / (s - k)
    with np.errstate(divide="ignore"):
        return float(np.log(lam[:k]).sum() + (s - k) * np.log(tail))


def relaxation_objective(problem: MesaProblem, x) -> tuple[float, np.ndarray]:
    """Value and gradient of the relaxed log-entropy at weights x."""
    V, s = problem.V, problem.s
    x = np.asarray(x, dtype=float)
    X = V.T @ (x[:, None] * V)
    lam, U = np.linalg.eigh(0.5 * (X + X.T))
    order = np.argsort(lam)[::-1]
    lam, U = np.clip(lam[order], 0.0, None), U[:, order]
    k = _split_index(lam, s)
    tail = lam[k:].sum() / (s - k)
    if tail <= 0.0 or (k > 0 and lam[k - 1] <= 0.0):
        return -math.inf, np.zeros_like(x)
    value = float(np.log(lam[:k]).sum() + (s - k) * np.log(tail))
    w = np.full(lam.size, 1.0 / tail)
    w[:k] = 1.0 / lam[:k]
    proj = V @ U
    return value, (proj**2) @ w


def project_capped_simplex(y, s: float, tol: float = 1e-13) -> np.ndarray:
    """Euclidean projection onto {x in [0,1]^n : sum x = s} by bisection."""
    y = np.asarray(y, dtype=float)
    lo, hi = y.min() - 1.0, y.max()
    for _ in range(200):
        tau = 0.5 * (lo + hi)
        total = np.clip(y - tau, 0.0, 1.0).sum()
        if abs(total - s) < tol:
            break
        if total > s:
            lo = tau
        else:
            hi = tau
    return np.clip(y - tau, 0.0, 1.0)


def solve_relaxation(
    problem: MesaProblem, max_iter: int = 2000, tol: float = 1e-6, x0=None
) -> RelaxationSolution:
    """Projected gradient ascent with backtracking on the capped simplex."""
    n, s = problem.n, problem.s
    x = np.full(n, s / n) if x0 is None else project_capped_simplex(x0, s)
    f, g = relaxation_objective(problem, x)
    if not np.isfinite(f):
        raise Degenerate("relaxation objective is -inf at the start point")
    step = 1.0 / max(np.abs(g).max(), 1e-12)
    residual = math.inf
    it = 0
    for it in range(1, max_iter + 1):
        residual = float(np.abs(x - project_capped_simplex(x + g, s)).max())
        if residual < tol:
            break
        while True:
            x_new = project_capped_simplex(x + step * g, s)
            f_new, g_new = relaxation_objective(problem, x_new)
            # Armijo condition along the projection arc
            if f_new >= f + 1e-4 * g @ (x_new - x) and np.isfinite(f_new):
                break
            step *= 0.5
            if step < 1e-16:
                break
        if step < 1e-16:
            break
        x, f, g = x_new, f_new, g_new
        step *= 2.0
    sol = np.clip(x, 0.0, 1.0)
    return RelaxationSolution(sol, float(f), residual, it, residual < tol)


def elementary_symmetric(values, k: int) -> float:
    """e_k(values) by the triangle recurrence E[l] += v * E[l-1]."""
    v = np.asarray(values, dtype=float)
    if k < 0 or k > v.size:
        raise ValueError("need 0 <= k <= len(values)")
    E = np.zeros(k + 1)
    E[0] = 1.0
    for vi in v:
        E[1:] = E[1:] + vi * E[:-1]
    return float(E[k])


def _log_suffix_table(values, k: int) -> np.ndarray:
    """L[j, l] = log e_l(values[j:]) for l <= k."""
    with np.errstate(divide="ignore"):
        logv = np.log(np.asarray(values, dtype=float))
    n = logv.size
    L = np.full((n + 1, k + 1), -np.inf)
    L[:, 0] = 0.0
    for j in range(n - 1, -1, -1):
        L[j, 1:] = np.logaddexp(L[j + 1, 1:], logv[j] + L[j + 1, :-1])
    return L


def log_elementary_symmetric(values, k: int) -> float:
    v = np.asarray(values, dtype=float)
    if k < 0 or k > v.size:
        raise ValueError("need 0 <= k <= len(values)")
    return float(_log_suffix_table(v, k)[0, k])


def sample_subset(xhat, s: int, rng: np.random.Generator) -> SampledSubset:
    """Draw S with P[S] proportional to prod_{i in S} xhat_i, |S| = s.

    Indices are visited in order; index j is kept with probability
    xhat_j e_{r-1}(suffix after j) / e_r(suffix from j), where r is the
    number still needed.
    """
    x = np.asarray(xhat, dtype=float)
    if np.any(x < 0) or np.any(x > 1 + 1e-12):
        raise ValueError("weights must lie in [0, 1]")
    if abs(x.sum() - s) > 1e-6:
        raise ValueError(f"weights sum to {x.sum():.9g}, expected {s}")
    x = np.clip(x * (s / x.sum()), 0.0, 1.0)
    n = x.size
    L = _log_suffix_table(x, s)
    if not np.isfinite(L[0, s]):
        raise NumericalUnderflow(f"fewer than {s} positive weights")
    with np.errstate(divide="ignore"):
        logx = np.log(x)
    selected, rejected = [], []
    r = s
    for j in range(n):
        if r == 0:
            break
        if n - j == r:
            p = 1.0
        else:
            p = math.exp(logx[j] + L[j + 1, r - 1] - L[j, r]) if np.isfinite(logx[j]) else 0.0
        if p >= rng.random():
            selected.append(j)
            r -= 1
        else:
            rejected.append(j)
    return SampledSubset(tuple(selected), tuple(rejected))


def subset_probabilities(xhat, s: int) -> dict:
    """Exact P[S] over all size-s subsets (small n only)."""
    from itertools import combinations

    x = np.asarray(xhat, dtype=float)
    weights = {S: float(np.prod(x[list(S)])) for S in combinations(range(x.size), s)}
    z = sum(weights.values())
    return {S: w / z for S, w in weights.items()}


def se_gram(U, lengthscale, variance: float = 1.0) -> np.ndarray:
    Z = np.asarray(U, dtype=float) / lengthscale
    sq = np.sum(Z**2, 1)
    d2 = np.clip(sq[:, None] + sq[None, :] - 2 * Z @ Z.T, 0.0, None)
    return variance * np.exp(-0.5 * d2)


def seed_designs(
    space: SearchSpace,
    pool_size: int,
    seed_count: int,
    rng: np.random.Generator,
    lengthscale: float | None = None,
    variance: float = 1.0,
) -> np.ndarray:
    """Space-filling seed designs (rows, physical units) picked from a Sobol pool."""
    if not pool_size >= seed_count >= 1:
        raise ValueError("need pool_size >= seed_count >= 1")
    sobol = qmc.Sobol(space.dim, scramble=True, seed=rng)
    pool = sobol.random(pool_size)
    if seed_count == pool_size:
        return space.from_unit(pool)
    ell = 0.25 * math.sqrt(space.dim) if lengthscale is None else lengthscale
    problem = MesaProblem.from_covariance(se_gram(pool, ell, variance), seed_count)
    sol = solve_relaxation(problem)
    subset = sample_subset(sol.xhat, seed_count, rng)
    return space.from_unit(pool[list(subset.selected)])
