import numpy as np
import pytest

from bpassoc.bp import initial_state, iterate
from bpassoc.corrdecay import CdQuery, cd_beliefs, phi
from bpassoc.errors import DepthBudget, DomainError
from bpassoc.exact import exact_marginals, max_marginal_error
from bpassoc.model import WeightMatrix

ONES22 = WeightMatrix(np.ones((2, 2)))


def plain_phi(psi, T, M, kind, k, t):
    """Straightforward recursion on Python sets, no memo (0-based indices)."""
    if t == 0:
        return 1.0
    if kind == "track":
        return 1.0 / (1.0 + sum(psi[k, j] * plain_phi(psi, T - {k}, M, "measurement", j, t - 1) for j in M))
    return 1.0 / (1.0 + sum(psi[i, k] * plain_phi(psi, T, M - {k}, "track", i, t - 1) for i in T))


def test_depth_zero_is_one():
    assert phi(ONES22, CdQuery({0, 1}, {0, 1}, "track", 0, 0)) == 1.0
    assert phi(ONES22, CdQuery({0}, {1}, "measurement", 1, 0)) == 1.0


def test_hand_unrolled():
    # inner: track 2 with only measurement 2 left gives 1/2; then 1/(1 + 1/2) = 2/3
    assert phi(ONES22, CdQuery({1}, {1}, "track", 1, 5)) == pytest.approx(0.5)
    for t in (2, 3, 6):
        assert phi(ONES22, CdQuery({1}, {0, 1}, "measurement", 0, t)) == pytest.approx(2 / 3, abs=1e-15)


def test_empty_opposing_set():
    assert phi(ONES22, CdQuery({0, 1}, set(), "track", 0, 4)) == 1.0
    assert phi(ONES22, CdQuery(set(), {0}, "measurement", 0, 4)) == 1.0


def test_query_validation():
    with pytest.raises(DomainError):
        CdQuery({1}, {0}, "track", 0, 2)
    with pytest.raises(DomainError):
        CdQuery({0}, {0}, "track", 0, -1)
    with pytest.raises(DomainError):
        CdQuery({0}, {0}, "edge", 0, 1)


def test_two_by_two_exact():
    for depth in (3, 4, 8):
        b = cd_beliefs(ONES22, depth)
        assert b.target_marginals[0, 1] == pytest.approx(2 / 7, abs=1e-15)


def test_single_edge():
    b = cd_beliefs(WeightMatrix([[2.0]]), 1)
    assert b.target_marginals[0, 1] == pytest.approx(2 / 3)
    assert b.measurement_marginals[0, 1] == pytest.approx(2 / 3)


def test_depth_must_be_positive():
    with pytest.raises(DomainError):
        cd_beliefs(ONES22, 0)


def test_memo_cap():
    with pytest.raises(DepthBudget):
        cd_beliefs(WeightMatrix(np.ones((4, 4))), 6, memo_cap=10)


@pytest.mark.parametrize("seed", range(15))
def test_against_plain_recursion(seed):
    rng = np.random.default_rng(seed)
    psi = rng.exponential(size=(3, 4)) * (rng.random((3, 4)) < 0.7)
    w = WeightMatrix(psi)
    T, M = {0, 1, 2}, {0, 1, 2, 3}
    for t in range(5):
        for i in T:
            assert phi(w, CdQuery(T, M, "track", i, t)) == pytest.approx(plain_phi(psi, T, M, "track", i, t), rel=1e-14)
        for j in M:
            q = CdQuery(T, M, "measurement", j, t)
            assert phi(w, q) == pytest.approx(plain_phi(psi, T, M, "measurement", j, t), rel=1e-14)


@pytest.mark.parametrize("n, m", [(n, m) for n in range(1, 6) for m in range(0, 6) if n + m <= 6])
def test_full_depth_is_exact(n, m):
    rng = np.random.default_rng(10 * n + m)
    for _ in range(5):
        w = WeightMatrix(rng.exponential(2.0, size=(n, m)))
        cd = cd_beliefs(w, n + m) if m else cd_beliefs(w, 1)
        ex = exact_marginals(w)
        np.testing.assert_allclose(cd.target_marginals, ex.target_marginals, atol=1e-9)
        np.testing.assert_allclose(cd.measurement_marginals, ex.measurement_marginals, atol=1e-9)


def test_error_shrinks_with_depth_small():
    rng = np.random.default_rng(7)
    w = WeightMatrix(rng.exponential(2.0, size=(4, 4)))
    full = cd_beliefs(w, 8)
    errs = [max_marginal_error(cd_beliefs(w, t), full).max() for t in (1, 3, 5, 7)]
    assert errs[-1] < errs[0]


def computation_tree_phi(psi, kind, k, parent, t):
    """The recursion with only the immediate parent excluded, i.e. no self-avoidance."""
    if t == 0:
        return 1.0
    n, m = psi.shape
    if kind == "track":
        s = sum(psi[k, j] * computation_tree_phi(psi, "measurement", j, k, t - 1) for j in range(m) if j != parent)
    else:
        s = sum(psi[i, k] * computation_tree_phi(psi, "track", i, k, t - 1) for i in range(n) if i != parent)
    return 1.0 / (1.0 + s)


def test_without_self_avoidance_it_is_bp():
    rng = np.random.default_rng(8)
    psi = rng.exponential(size=(3, 3))
    w = WeightMatrix(psi)
    for k in (1, 2, 3):
        nu = iterate(w, initial_state(w), k).nu
        for i in range(3):
            for j in range(3):
                assert computation_tree_phi(psi, "measurement", j, i, 2 * k) == pytest.approx(nu[i, j], rel=1e-13)
    golden = computation_tree_phi(np.ones((2, 2)), "measurement", 0, 0, 40)
    assert golden == pytest.approx(0.618034, abs=1e-6)
