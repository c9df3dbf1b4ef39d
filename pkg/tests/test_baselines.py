import math
from dataclasses import dataclass

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from slotopt import baselines as B
from slotopt.space import SearchSpace
from slotopt.synthetic import SyntheticProblem


@dataclass(frozen=True)
class Result:
    reward: float
    feasible: bool = True
    violation: float = 0.0


class Sphere:
    """Maximize -|x|^2 on [-1, 1]^10."""

    space = SearchSpace(np.full(10, -1.0), np.ones(10))
    n_fidelities = 1
    costs = (1.0,)

    def evaluate(self, x, fidelity=1):
        return Result(-float(np.sum(np.asarray(x) ** 2)))


class Constrained(Sphere):
    """Feasible only where x0 >= 0.5; violation is the shortfall."""

    def evaluate(self, x, fidelity=1):
        short = max(0.0, 0.5 - x[0])
        if short > 0:
            return Result(-math.inf, False, short)
        return Result(-float(np.sum(np.asarray(x) ** 2)))


SPHERE = Sphere()


def test_config_invariants():
    with pytest.raises(ValueError):
        B.EvolutionConfig(population_size=5)
    with pytest.raises(ValueError):
        B.EvolutionConfig(population_size=2)
    with pytest.raises(ValueError):
        B.EvolutionConfig(mutation_rate=1.5)


# constraint domination -------------------------------------------------------------


points = st.tuples(st.floats(-10, 10), st.one_of(st.just(0.0), st.floats(1e-6, 10)))


@settings(max_examples=300)
@given(points, points, points)
def test_domination_is_strict_partial_order(a, b, c):
    d = B.constrained_dominates
    assert not d(a, a)
    assert not (d(a, b) and d(b, a))
    if d(a, b) and d(b, c):
        assert d(a, c)


def test_domination_rules():
    d = B.constrained_dominates
    assert d((0.1, 0.0), (5.0, 0.3))
    assert d((-1.0, 0.1), (5.0, 0.3))
    assert d((0.5, 0.0), (0.4, 0.0))
    assert not d((0.4, 0.0), (0.4, 0.0))


def test_fronts_and_crowding():
    pop = [B.Individual(np.zeros(1), y, v) for y, v in [(1.0, 0), (3.0, 0), (2.0, 0), (0.0, 0.5), (0.0, 0.1)]]
    fronts = B.non_dominated_fronts(pop)
    assert fronts == [[1], [2], [0], [4], [3]]
    cd = B.crowding_distance(np.array([[0.0], [1.0], [3.0], [4.0]]))
    assert np.isinf(cd[0]) and np.isinf(cd[3])
    np.testing.assert_allclose(cd[1:3], [0.75, 0.75])


# variation operators ----------------------------------------------------------------


def test_clone_population_offspring_differ_by_mutation_only():
    rng = np.random.default_rng(0)
    lo, hi = SPHERE.space.lower, SPHERE.space.upper
    p = rng.uniform(lo, hi)
    c1, c2 = B.sbx_crossover(p, p, lo, hi, 15, rng)
    np.testing.assert_allclose(c1, p, rtol=0, atol=1e-15)
    np.testing.assert_allclose(c2, p, rtol=0, atol=1e-15)
    m = B.polynomial_mutation(c1, lo, hi, 0.0, 20, 1.0, rng)
    np.testing.assert_array_equal(m, c1)


@settings(max_examples=100)
@given(st.integers(0, 2**31))
def test_operators_respect_box(seed):
    rng = np.random.default_rng(seed)
    lo, hi = SPHERE.space.lower, SPHERE.space.upper
    a, b = rng.uniform(lo, hi), rng.uniform(lo, hi)
    for c in B.sbx_crossover(a, b, lo, hi, 2.0, rng):
        assert np.all((c >= lo) & (c <= hi))
    m = B.polynomial_mutation(a, lo, hi, 1.0, 1.0, 1.0, rng)
    assert np.all((m >= lo) & (m <= hi))


# whole runs --------------------------------------------------------------------------


def test_nsga2_query_count():
    cfg = B.EvolutionConfig(population_size=12, generations=7, random_seed=1)
    tr = B.nsga2(cfg, SPHERE)
    assert len(tr) == 12 * 8
    assert all(SPHERE.space.contains(x) for x in tr.X)


def test_nsga2_beats_random_on_sphere():
    ns, rs = [], []
    for seed in range(20):
        cfg = B.EvolutionConfig(population_size=20, generations=50, random_seed=seed)
        ns.append(B.nsga2(cfg, SPHERE).incumbent().y)
        rs.append(B.random_search(20 * 51, SPHERE, seed).incumbent().y)
    assert np.median(ns) > np.median(rs)


def test_pso_converges_on_sphere():
    err = []
    for seed in range(20):
        tr = B.pso(B.EvolutionConfig(population_size=20, generations=100, random_seed=seed), SPHERE)
        err.append(np.abs(tr.incumbent().x).max() / 2.0)  # per-coordinate gap as a share of the range
    assert np.median(err) < 1e-3


def test_pso_stationary_swarm():
    rng = np.random.default_rng(0)
    X = np.tile(rng.random(10), (5, 1))
    V = np.zeros_like(X)
    # velocity update with zero velocity and coincident personal/global bests
    Vn = 0.72 * V + 1.49 * rng.random(X.shape) * (X - X) + 1.49 * rng.random(X.shape) * (X[0] - X)
    np.testing.assert_array_equal(Vn, 0.0)


def test_incumbent_series_non_worsening():
    for run in (
        B.pso(B.EvolutionConfig(population_size=10, generations=10, random_seed=3), SPHERE),
        B.nsga2(B.EvolutionConfig(population_size=10, generations=10, random_seed=3), SPHERE),
        B.random_search(100, SPHERE, 3),
    ):
        best = np.maximum.accumulate(run.rewards)
        assert np.all(np.diff(best) >= 0)
        r = run.regret(0.0)
        assert np.all(np.diff(r) <= 0)


def test_random_search_exact_count_and_determinism():
    a = B.random_search(37, SPHERE, 9)
    assert len(a) == 37
    assert a.to_csv() == B.random_search(37, SPHERE, 9).to_csv()
    with pytest.raises(ValueError):
        B.random_search(math.inf, SPHERE)


def test_budget_and_stop_at():
    problem = SyntheticProblem()
    tr = B.nsga2(B.EvolutionConfig(population_size=10, generations=100, budget=255.0), problem)
    assert tr.spent <= 255.0 and len(tr) == 25
    assert set(tr.fidelities.tolist()) == {2}
    tr = B.pso(B.EvolutionConfig(population_size=10, generations=500, stop_at=-0.8, random_seed=2), problem)
    assert tr.status == "target reached"
    assert tr.rewards[-1] >= -0.8


def test_constraint_handling_prefers_feasible():
    ev = Constrained()
    for method in (B.nsga2, B.pso):
        tr = method(B.EvolutionConfig(population_size=10, generations=20, random_seed=0), ev)
        inc = tr.incumbent()
        assert inc is not None and inc.x[0] >= 0.5
