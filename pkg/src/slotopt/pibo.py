"""Multi-fidelity GP-UCB loop seeded with maximum-entropy samples."""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.stats import qmc

from .gp import SurrogateModel, calibration_scale, fit_hyperparams
from .mesa import seed_designs
from .trace import OptimizationTrace

log = logging.getLogger(__name__)


class AllInfeasible(RuntimeError):
    """Every candidate in the acquisition pool failed the cheap constraint screen."""


@dataclass(frozen=True)
class FidelityConfig:
    """Bias offsets zeta, escalation thresholds gamma and costs per fidelity."""

    zeta: tuple = (0.0, 0.0)
    gamma: tuple = (0.1, 0.0)
    costs: tuple = (1.0, 10.0)

    def __post_init__(self):
        M = len(self.costs)
        if len(self.zeta) != M or len(self.gamma) != M:
            raise ValueError("zeta, gamma and costs need one entry per fidelity")
        if self.zeta[-1] != 0.0 or any(b > a for a, b in zip(self.zeta, self.zeta[1:])):
            raise ValueError("zeta must be non-increasing and end at 0")
        if M > 1 and any(g <= 0 for g in self.gamma[:-1]):
            raise ValueError("thresholds must be positive")
        if any(b <= a for a, b in zip(self.costs, self.costs[1:])):
            raise ValueError("costs must be strictly increasing")

    @property
    def M(self) -> int:
        return len(self.costs)


@dataclass(frozen=True)
class RunConfig:
    budget: float
    fidelity: FidelityConfig = field(default_factory=FidelityConfig)
    seed_count: int = 12
    mesa_pool_size: int = 128
    sobol_points: int = 256
    perturbations: int = 192
    perturbation_scales: tuple = (0.1, 0.03, 0.01)
    beta_mode: str = "log"  # or "constant"
    beta_delta: float = 0.1
    beta_scale: float = 1.0
    beta_constant: float = 4.0
    refit_period: int = 20
    restarts: int = 2
    recalibrate: bool = True
    penalty: float = 1.0
    stop_at: float | None = None  # stop once a feasible top-fidelity reward reaches this
    random_seed: int = 0

    def __post_init__(self):
        if not self.budget > 0:
            raise ValueError("budget must be positive")
        if self.refit_period < 1:
            raise ValueError("refit_period must be >= 1")
        if self.beta_mode not in ("log", "constant"):
            raise ValueError("beta_mode must be 'log' or 'constant'")


def beta_schedule(t: int, dim: int, config: RunConfig) -> float:
    """Exploration weight; log mode is 2 log(dim t^2 pi^2 / (6 delta)), scaled."""
    if t < 1:
        raise ValueError("t starts at 1")
    if config.beta_mode == "constant":
        return config.beta_constant
    return config.beta_scale * 2.0 * math.log(dim * t**2 * math.pi**2 / (6.0 * config.beta_delta))


def _ucb_terms(models: SurrogateModel, U, beta: float, fid: FidelityConfig):
    U = np.atleast_2d(U)
    mus, sds = zip(*(models.posterior(U, m) for m in range(1, len(models) + 1)))
    mu, sd = np.array(mus), np.array(sds)
    ucb = mu + math.sqrt(beta) * sd + np.asarray(fid.zeta)[:, None]
    return ucb, sd


def acquisition(models: SurrogateModel, U, beta: float, fid: FidelityConfig) -> np.ndarray:
    """min over fidelities of mu + sqrt(beta) sigma + zeta, per row of U (unit coords)."""
    ucb, _ = _ucb_terms(models, U, beta, fid)
    return ucb.min(axis=0)


def select_fidelity(models: SurrogateModel, u, beta: float, fid: FidelityConfig) -> int:
    """Smallest m whose scaled posterior std reaches its threshold, else the top one."""
    for m in range(1, fid.M):
        _, sd = models.posterior(np.asarray(u, dtype=float), m)
        if math.sqrt(beta) * sd >= fid.gamma[m - 1]:
            return m
    return fid.M


def maximize_acquisition(models, pool, beta: float, fid: FidelityConfig, feasible=None, check: bool = False):
    """Feasible maximizer of the acquisition over the pool; lowest index wins ties.

    Candidates are screened lazily in decreasing acquisition order, so the
    feasibility test only runs until the first pass.
    """
    pool = np.atleast_2d(pool)
    if pool.shape[0] == 0:
        raise ValueError("empty pool")
    values = acquisition(models, pool, beta, fid)
    order = np.argsort(-values, kind="stable")
    for i in order:
        if feasible is None or feasible(pool[i]):
            if check:
                ok = [j for j in range(len(pool)) if feasible is None or feasible(pool[j])]
                assert values[i] >= values[ok].max()
            return int(i), float(values[i])
    raise AllInfeasible(f"all {pool.shape[0]} candidates violate the cheap constraints")


def _surrogate_target(result, penalty: float, floor: float) -> float:
    if result.feasible:
        return result.reward
    v = getattr(result, "violation", math.inf)
    base = getattr(result, "sff", None)
    if base is not None and math.isfinite(v):
        return base - penalty * v
    return floor


class PiboRun:
    """Holds loop state so tests can step through the algorithm."""

    def __init__(self, config: RunConfig, evaluator, models: SurrogateModel | None = None):
        self.config = config
        self.ev = evaluator
        self.space = evaluator.space
        self.fid = config.fidelity
        if self.fid.M != evaluator.n_fidelities:
            raise ValueError("fidelity config does not match the evaluator")
        self.rng = np.random.default_rng(config.random_seed)
        self.models = models or SurrogateModel(self.space.dim, self.fid.M)
        self.trace = OptimizationTrace(
            "pibo", self.fid.M, config.budget, tuple(self.space.names), getattr(evaluator, "f_op", None), config.random_seed
        )
        self.seeds_unit = np.zeros((0, self.space.dim))
        self.iteration = 0
        self.failures = 0

    def _floor(self, m: int) -> float:
        y = self.models[m].y
        return float(y.min()) if y.size else 0.0

    def _query(self, u, m: int) -> bool:
        """Evaluate unit point u at fidelity m if affordable; False when out of budget."""
        cost = self.fid.costs[m - 1]
        if self.trace.spent + cost > self.config.budget:
            return False
        x = self.space.from_unit(u)
        result = self.ev.evaluate(x, m)
        self.trace.record(x, m, result.reward, cost, result.feasible)
        if self.config.stop_at is not None and m == self.fid.M and result.feasible and result.reward >= self.config.stop_at:
            self.trace.status = "target reached"
        target = _surrogate_target(result, self.config.penalty, self._floor(m))
        self.models.add(u, target, m)
        return True

    def _refit(self) -> None:
        for m in range(1, self.fid.M + 1):
            gp = self.models[m]
            if gp.n < 3:
                continue
            fit_hyperparams(gp, self.config.restarts, self.rng)
            if self.config.recalibrate:
                gp.variance_scale = 1.0
                gp.variance_scale = calibration_scale(gp.loo_standardized_residuals())

    def seed(self) -> None:
        c = self.config
        X = seed_designs(self.space, max(c.mesa_pool_size, c.seed_count), c.seed_count, self.rng)
        self.seeds_unit = self.space.to_unit(X)
        for u in self.seeds_unit:
            if not self._query(u, 1):
                self.trace.status = "budget exhausted during seeding"
                return
        self._refit()

    def pool(self, sobol_points: int | None = None) -> np.ndarray:
        c = self.config
        n = c.sobol_points if sobol_points is None else sobol_points
        fresh = qmc.Sobol(self.space.dim, scramble=True, seed=self.rng).random(n)
        centres = []
        for m in range(self.fid.M, 0, -1):
            gp = self.models[m]
            if gp.n:
                centres.append(gp.X[int(np.argmax(gp.y))])
        parts = [self.seeds_unit, fresh]
        if centres:
            per = max(1, c.perturbations // (len(centres) * len(c.perturbation_scales)))
            for centre in centres:
                for scale in c.perturbation_scales:
                    parts.append(np.clip(centre + scale * self.rng.standard_normal((per, self.space.dim)), 0.0, 1.0))
        return np.vstack(parts)

    def _cheap_feasible(self, u) -> bool:
        return bool(self.ev.cheap_feasible(self.space.from_unit(u)))

    def step(self, check: bool = False) -> bool:
        """One acquisition/evaluation round; False when the run should stop."""
        t = len(self.trace) + 1
        beta = beta_schedule(t, self.space.dim, self.config)
        pool = self.pool()
        try:
            i, _ = maximize_acquisition(self.models, pool, beta, self.fid, self._cheap_feasible, check)
        except AllInfeasible:
            pool = self.pool(4 * self.config.sobol_points)
            try:
                i, _ = maximize_acquisition(self.models, pool, beta, self.fid, self._cheap_feasible, check)
            except AllInfeasible as err:
                self.trace.status = f"aborted: {err}"
                return False
        u = pool[i]
        m = select_fidelity(self.models, u, beta, self.fid)
        try:
            if not self._query(u, m):
                return False
            self.failures = 0
        except (ArithmeticError, RuntimeError, ValueError) as err:
            self.failures += 1
            log.warning("evaluation failed at t=%d: %s", t, err)
            if self.failures >= 3:
                self.trace.status = f"aborted: repeated evaluator failure ({err})"
                return False
            return True
        self.iteration += 1
        if self.iteration % self.config.refit_period == 0:
            self._refit()
        return True

    def run(self, check: bool = False) -> OptimizationTrace:
        self.seed()
        if self.trace.status != "ok":
            return self.trace
        while self.trace.status == "ok" and self.step(check):
            pass
        return self.trace


def run(config: RunConfig, evaluator, models: SurrogateModel | None = None, check: bool = False) -> OptimizationTrace:
    """Run the optimizer until the next query would exceed the budget."""
    return PiboRun(config, evaluator, models).run(check)
