"""Reference optimizers: NSGA-II, particle swarm and random search.

All of them query the evaluator at its top fidelity only and write the same
trace format as the Bayesian loop.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .trace import OptimizationTrace


@dataclass(frozen=True)
class EvolutionConfig:
    population_size: int = 20
    generations: int = 50
    crossover_rate: float = 0.9
    mutation_rate: float = 0.1  # per variable
    mutation_scale: float = 1.0  # fraction of the range
    tournament_size: int = 2
    eta_crossover: float = 15.0
    eta_mutation: float = 20.0
    inertia: float = 0.72
    cognitive: float = 1.49
    social: float = 1.49
    budget: float = math.inf  # optional cost cap on top of the generation count
    stop_at: float | None = None  # stop once a feasible reward reaches this value
    random_seed: int = 0

    def __post_init__(self):
        if self.population_size < 4 or self.population_size % 2:
            raise ValueError("population_size must be even and >= 4")
        for name in ("crossover_rate", "mutation_rate"):
            if not 0.0 <= getattr(self, name) <= 1.0:
                raise ValueError(f"{name} must lie in [0, 1]")
        if self.tournament_size < 1 or self.generations < 0:
            raise ValueError("tournament_size >= 1 and generations >= 0 required")


@dataclass(frozen=True)
class Individual:
    x: np.ndarray
    objective: float  # maximized; -inf when infeasible
    violation: float

    @property
    def feasible(self) -> bool:
        return self.violation == 0.0


def constrained_dominates(a, b) -> bool:
    """Feasible beats infeasible, infeasible compare by violation, feasible by Pareto order.

    ``a`` and ``b`` are (objectives, violation) with objectives maximized.
    """
    (fa, va), (fb, vb) = a, b
    if va == 0.0 and vb > 0.0:
        return True
    if va > 0.0 or vb > 0.0:
        return va < vb
    fa, fb = np.atleast_1d(fa), np.atleast_1d(fb)
    return bool(np.all(fa >= fb) and np.any(fa > fb))


def _key(ind: Individual):
    return (ind.objective, ind.violation)


def non_dominated_fronts(pop: list) -> list:
    """Fast non-dominated sort under constraint-domination; returns index lists."""
    n = len(pop)
    dominated = [[] for _ in range(n)]
    count = np.zeros(n, dtype=int)
    for i in range(n):
        for j in range(i + 1, n):
            if constrained_dominates(_key(pop[i]), _key(pop[j])):
                dominated[i].append(j)
                count[j] += 1
            elif constrained_dominates(_key(pop[j]), _key(pop[i])):
                dominated[j].append(i)
                count[i] += 1
    fronts = [[i for i in range(n) if count[i] == 0]]
    while fronts[-1]:
        nxt = []
        for i in fronts[-1]:
            for j in dominated[i]:
                count[j] -= 1
                if count[j] == 0:
                    nxt.append(j)
        fronts.append(sorted(nxt))
    return fronts[:-1]


def crowding_distance(values: np.ndarray) -> np.ndarray:
    """Crowding distance for rows of an objective matrix (one front)."""
    values = np.atleast_2d(np.asarray(values, dtype=float).T).T
    n = values.shape[0]
    dist = np.zeros(n)
    if n <= 2:
        return np.full(n, np.inf)
    for k in range(values.shape[1]):
        order = np.argsort(values[:, k], kind="stable")
        span = values[order[-1], k] - values[order[0], k]
        dist[order[0]] = dist[order[-1]] = np.inf
        if span > 0 and np.isfinite(span):
            dist[order[1:-1]] += (values[order[2:], k] - values[order[:-2], k]) / span
    return dist


def sbx_crossover(p1, p2, lower, upper, eta: float, rng: np.random.Generator):
    """Simulated binary crossover, children clipped to the box."""
    u = rng.random(p1.shape)
    beta = np.where(u <= 0.5, (2 * u) ** (1 / (eta + 1)), (1 / (2 * (1 - u))) ** (1 / (eta + 1)))
    c1 = 0.5 * ((1 + beta) * p1 + (1 - beta) * p2)
    c2 = 0.5 * ((1 - beta) * p1 + (1 + beta) * p2)
    return np.clip(c1, lower, upper), np.clip(c2, lower, upper)


def polynomial_mutation(x, lower, upper, rate: float, eta: float, scale: float, rng: np.random.Generator):
    """Per-variable polynomial mutation with probability ``rate``."""
    x = x.copy()
    mask = rng.random(x.shape) < rate
    u = rng.random(x.shape)
    delta = np.where(u < 0.5, (2 * u) ** (1 / (eta + 1)) - 1, 1 - (2 * (1 - u)) ** (1 / (eta + 1)))
    x[mask] += delta[mask] * scale * (upper - lower)[mask]
    return np.clip(x, lower, upper)


class _Charged:
    """Evaluator wrapper that logs every call at the top fidelity."""

    def __init__(self, evaluator, method: str, budget: float, seed: int, stop_at: float | None = None):
        self.ev = evaluator
        self.M = evaluator.n_fidelities
        self.cost = evaluator.costs[self.M - 1]
        self.budget = budget
        self.stop_at = stop_at
        self.done = False
        self.trace = OptimizationTrace(
            method, self.M, budget, tuple(evaluator.space.names), getattr(evaluator, "f_op", None), seed
        )

    def affordable(self) -> bool:
        return self.trace.spent + self.cost <= self.budget and not self.done

    def __call__(self, x) -> Individual:
        r = self.ev.evaluate(x, self.M)
        self.trace.record(x, self.M, r.reward, self.cost, r.feasible)
        if self.stop_at is not None and r.feasible and r.reward >= self.stop_at:
            self.done = True
            self.trace.status = "target reached"
        v = 0.0 if r.feasible else max(float(getattr(r, "violation", math.inf)), 1e-300)
        return Individual(np.asarray(x, dtype=float), r.reward if r.feasible else -math.inf, v)


def _better(a: Individual, b: Individual) -> bool:
    return constrained_dominates(_key(a), _key(b))


def _tournament(pop, rank, crowd, k: int, rng):
    idx = rng.choice(len(pop), size=k, replace=False)
    best = idx[0]
    for i in idx[1:]:
        if rank[i] < rank[best] or (rank[i] == rank[best] and crowd[i] > crowd[best]):
            best = i
    return best


def _rank_and_crowd(pop):
    fronts = non_dominated_fronts(pop)
    rank = np.empty(len(pop), dtype=int)
    crowd = np.empty(len(pop))
    for r, front in enumerate(fronts):
        rank[front] = r
        obj = np.array([[pop[i].objective] for i in front])
        crowd[front] = crowding_distance(np.where(np.isfinite(obj), obj, -1e300))
    return fronts, rank, crowd


def nsga2(config: EvolutionConfig, evaluator) -> OptimizationTrace:
    """Single-objective NSGA-II with SBX, polynomial mutation and constraint-domination."""
    rng = np.random.default_rng(config.random_seed)
    space = evaluator.space
    lo, hi = space.lower, space.upper
    f = _Charged(evaluator, "nsga2", config.budget, config.random_seed, config.stop_at)
    N = config.population_size
    pop = []
    for x in space.sample_uniform(rng, N):
        if not f.affordable():
            return f.trace
        pop.append(f(x))
    for _ in range(config.generations):
        _, rank, crowd = _rank_and_crowd(pop)
        children = []
        while len(children) < N:
            a = pop[_tournament(pop, rank, crowd, config.tournament_size, rng)].x
            b = pop[_tournament(pop, rank, crowd, config.tournament_size, rng)].x
            if rng.random() < config.crossover_rate:
                c1, c2 = sbx_crossover(a, b, lo, hi, config.eta_crossover, rng)
            else:
                c1, c2 = a.copy(), b.copy()
            for c in (c1, c2):
                children.append(
                    polynomial_mutation(c, lo, hi, config.mutation_rate, config.eta_mutation, config.mutation_scale, rng)
                )
        offspring = []
        for c in children[:N]:
            if not f.affordable():
                return f.trace
            offspring.append(f(c))
        merged = pop + offspring
        fronts, _, crowd = _rank_and_crowd(merged)
        survivors = []
        for front in fronts:
            if len(survivors) + len(front) <= N:
                survivors.extend(front)
            else:
                rest = sorted(front, key=lambda i: -crowd[i])
                survivors.extend(rest[: N - len(survivors)])
                break
        pop = [merged[i] for i in survivors]
    return f.trace


def pso(config: EvolutionConfig, evaluator) -> OptimizationTrace:
    """Global-best particle swarm; velocities clamped to half the range."""
    rng = np.random.default_rng(config.random_seed)
    space = evaluator.space
    lo, hi = space.lower, space.upper
    vmax = 0.5 * (hi - lo)
    f = _Charged(evaluator, "pso", config.budget, config.random_seed, config.stop_at)
    N = config.population_size
    X = space.sample_uniform(rng, N)
    V = rng.uniform(-vmax, vmax, X.shape)
    best = []
    for x in X:
        if not f.affordable():
            return f.trace
        best.append(f(x))
    g = best[0]
    for b in best[1:]:
        if _better(b, g):
            g = b
    for _ in range(config.generations):
        P = np.array([b.x for b in best])
        r1, r2 = rng.random(X.shape), rng.random(X.shape)
        V = config.inertia * V + config.cognitive * r1 * (P - X) + config.social * r2 * (g.x - X)
        V = np.clip(V, -vmax, vmax)
        X = np.clip(X + V, lo, hi)
        for i in range(N):
            if not f.affordable():
                return f.trace
            ind = f(X[i])
            if _better(ind, best[i]):
                best[i] = ind
                if _better(ind, g):
                    g = ind
    return f.trace


def random_search(budget: float, evaluator, random_seed: int = 0) -> OptimizationTrace:
    """Uniform draws in the box until the next query would exceed the budget."""
    if not 0 < budget < math.inf:
        raise ValueError("budget must be positive and finite")
    rng = np.random.default_rng(random_seed)
    f = _Charged(evaluator, "random", budget, random_seed)
    while f.affordable():
        f(evaluator.space.sample_uniform(rng, 1)[0])
    return f.trace
