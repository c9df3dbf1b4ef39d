import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from slotopt.space import INITIAL, LOWER, UPPER, VARIABLE_NAMES, DesignVector, OutOfBounds, SearchSpace
from slotopt.synthetic import CENTRE, SyntheticProblem

SPACE = SearchSpace.slot_design()


def test_design_vector_round_trip():
    d = DesignVector.initial()
    assert d.b1 == 7.0 and d.opening == 10.0
    np.testing.assert_array_equal(d.as_array(), INITIAL)
    with pytest.raises(ValueError):
        DesignVector.from_array([1.0, 2.0])


def test_initial_inside_box():
    assert SPACE.contains(INITIAL)
    assert len(VARIABLE_NAMES) == SPACE.dim == 10


@given(st.lists(st.floats(0, 1), min_size=10, max_size=10))
def test_unit_map_round_trip(u):
    u = np.array(u)
    x = SPACE.from_unit(u)
    assert SPACE.contains(x)
    np.testing.assert_allclose(SPACE.to_unit(x), u, atol=1e-12)


def test_check_names_offending_variables():
    x = INITIAL.copy()
    x[1] = LOWER[1] - 1
    x[9] = UPPER[9] + 1
    with pytest.raises(OutOfBounds, match="b2, opening"):
        SPACE.check(x)
    with pytest.raises(OutOfBounds):
        SPACE.check(INITIAL[:5])


def test_bad_bounds():
    with pytest.raises(ValueError):
        SearchSpace(np.ones(2), np.zeros(2))


def test_uniform_samples_in_box():
    X = SPACE.sample_uniform(np.random.default_rng(0), 500)
    assert all(SPACE.contains(x) for x in X)


def test_synthetic_problem_optimum():
    p = SyntheticProblem()
    assert p.evaluate(CENTRE, 2).reward == pytest.approx(0.0, abs=1e-15)
    rng = np.random.default_rng(1)
    U = rng.random((2000, 10))
    vals = p.value(U, 2)
    assert np.all(vals <= 0) and np.all(vals >= p.minimum - 1e-9)
    # the cheap level differs from the exact one by at most the bias
    assert np.all(np.abs(p.value(U, 1) - vals) <= p.bias + 1e-12)
    assert p.value_range == pytest.approx(-p.minimum)
    assert p.evaluate(CENTRE, 1).eval_cost < p.evaluate(CENTRE, 2).eval_cost
