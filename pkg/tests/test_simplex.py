import numpy as np
import pytest
from scipy.optimize import linprog

from tpsurv.simplex import INFEASIBLE, OPTIMAL, UNBOUNDED, box_feasibility, simplex
from oracles import box_feasible_bruteforce


def test_textbook_lp():
    # max 3x + 5y st x <= 4, 2y <= 12, 3x + 2y <= 18  ->  (2, 6), value 36
    A = [[1, 0, 1, 0, 0], [0, 2, 0, 1, 0], [3, 2, 0, 0, 1]]
    res = simplex([-3, -5, 0, 0, 0], A, [4, 12, 18])
    assert res.status == OPTIMAL
    np.testing.assert_allclose(res.x[:2], [2, 6], atol=1e-12)
    assert res.fun == pytest.approx(-36)


def test_infeasible_and_unbounded():
    assert simplex([0, 0], [[1, 1]], [-1]).status == INFEASIBLE
    assert simplex([-1, 0], [[1, -1]], [0]).status == UNBOUNDED


def test_degenerate_cycling_example():
    # Beale's example cycles under the textbook largest-coefficient rule
    A = np.array([[0.25, -8, -1, 9, 1, 0, 0], [0.5, -12, -0.5, 3, 0, 1, 0], [0, 0, 1, 0, 0, 0, 1]])
    c = np.array([-0.75, 20, -0.5, 6, 0, 0, 0])
    res = simplex(c, A, [0, 0, 1])
    assert res.status == OPTIMAL
    assert res.fun == pytest.approx(-1.25)


@pytest.mark.parametrize("seed", range(40))
def test_random_lps_against_highs(seed):
    rng = np.random.default_rng(seed)
    m, n = rng.integers(2, 5), rng.integers(5, 9)
    A = rng.normal(size=(m, n))
    b = A @ np.abs(rng.normal(size=n)) if seed % 2 else rng.normal(size=m)
    c = np.abs(rng.normal(size=n))
    ref = linprog(c, A_eq=A, b_eq=b, bounds=[(0, None)] * n, method="highs")
    res = simplex(c, A, b)
    if ref.status == 2:
        assert res.status == INFEASIBLE
    else:
        assert res.status == OPTIMAL
        assert res.fun == pytest.approx(ref.fun, abs=1e-7)
        np.testing.assert_allclose(A @ res.x, b, atol=1e-8)


@pytest.mark.parametrize("seed", range(30))
def test_box_feasibility_against_bruteforce(seed):
    rng = np.random.default_rng(100 + seed)
    n, p = rng.integers(2, 6), rng.integers(1, 3)
    X = rng.normal(size=(n, p))
    lo = rng.normal(size=n)
    hi = lo + rng.uniform(0.1, 2.0, size=n)
    res = box_feasibility(X, lo, hi)
    truth = box_feasible_bruteforce(X, lo, hi)
    assert truth is not None
    assert res.feasible == truth
    if res.feasible:
        z = X @ res.x
        assert np.all(z >= lo - 1e-9) and np.all(z <= hi + 1e-9)
