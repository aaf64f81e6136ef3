import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from hansgcl.contrastive import (
    ActiveNegatives,
    PairContext,
    cosine_sim_matrix,
    info_nce_loss,
    negatives_full,
)

from gradcheck import central_diff, rel_error


def brute_force_loss(H1, H2, negs, tau, intra=False):
    """Direct summation with Python floats; ``negs[i]`` lists anchor i's negatives."""

    def cos(a, b):
        dot = sum(x * y for x, y in zip(a, b))
        na = max(math.sqrt(sum(x * x for x in a)), 1e-12)
        nb = max(math.sqrt(sum(y * y for y in b)), 1e-12)
        return dot / (na * nb)

    n = len(H1)
    total = 0.0
    for i in range(n):
        pos = math.exp(cos(H1[i], H2[i]) / tau)
        den1 = pos + sum(math.exp(cos(H1[i], H2[j]) / tau) for j in negs[i])
        den2 = pos + sum(math.exp(cos(H2[i], H1[j]) / tau) for j in negs[i])
        if intra:
            den1 += sum(math.exp(cos(H1[i], H1[j]) / tau) for j in negs[i])
            den2 += sum(math.exp(cos(H2[i], H2[j]) / tau) for j in negs[i])
        total += 0.5 * (-math.log(pos / den1) - math.log(pos / den2))
    return total / n


def random_active(rng, n):
    cats = []
    remaining = [list(rng.permutation([j for j in range(n) if j != i])) for i in range(n)]
    for _ in range(3):
        k = int(rng.integers(0, (n - 1) // 3 + 1))
        cats.append(np.array([[remaining[i].pop() for _ in range(k)] for i in range(n)], dtype=int).reshape(n, k))
    return ActiveNegatives(*cats)


def test_cosine_examples():
    H = np.eye(3)
    assert np.allclose(np.diag(cosine_sim_matrix(H, H)), 1.0)
    assert cosine_sim_matrix(H, H)[0, 1] == 0.0
    assert cosine_sim_matrix([[1.0, 0.0]], [[1.0, 1.0]])[0, 0] == pytest.approx(1 / math.sqrt(2))
    assert np.all(np.isfinite(cosine_sim_matrix(np.zeros((2, 2)), H[:, :2])))


def test_negatives_full():
    assert negatives_full(2).tolist() == [[1], [0]]
    full = negatives_full(5)
    assert full.shape == (5, 4)
    for i, row in enumerate(full):
        assert sorted(row) == [j for j in range(5) if j != i]
    with pytest.raises(ValueError):
        negatives_full(1)


def test_zero_negatives_gives_exact_zero():
    rng = np.random.default_rng(0)
    res = info_nce_loss(PairContext(rng.standard_normal((5, 3)), rng.standard_normal((5, 3))),
                        ActiveNegatives.empty(5))
    assert res.loss == 0.0
    assert all(v == 0.0 for v in res.per_category.values())


def test_two_node_hand_value():
    H1 = np.array([[1.0, 0.0], [0.0, 1.0]])
    active = ActiveNegatives(np.array([[1], [0]]), np.zeros((2, 0), int), np.zeros((2, 0), int))
    res = info_nce_loss(PairContext(H1, H1.copy(), tau=0.5), active)
    expected = -math.log(math.e ** 2 / (math.e ** 2 + 1))
    assert expected == pytest.approx(0.126928, abs=1e-6)
    assert res.loss == pytest.approx(expected, abs=1e-14)
    assert res.per_category["hard"] == pytest.approx(expected, abs=1e-14)


@pytest.mark.parametrize("seed", range(8))
def test_matches_brute_force(seed):
    rng = np.random.default_rng(seed)
    n = int(rng.integers(2, 9))
    H1, H2 = rng.standard_normal((n, 3)), rng.standard_normal((n, 3))
    active = random_active(rng, n)
    oracle = brute_force_loss(H1.tolist(), H2.tolist(), active.stacked().tolist(), 0.5)
    assert info_nce_loss(PairContext(H1, H2, 0.5), active).loss == pytest.approx(oracle, abs=1e-12)
    for cat in ("hard", "inter", "easy"):
        only = brute_force_loss(H1.tolist(), H2.tolist(), getattr(active, cat).tolist(), 0.5)
        got = info_nce_loss(PairContext(H1, H2, 0.5), active).per_category[cat]
        assert got == pytest.approx(only, abs=1e-12)


def test_intra_view_matches_brute_force():
    rng = np.random.default_rng(42)
    H1, H2 = rng.standard_normal((7, 3)), rng.standard_normal((7, 3))
    active = random_active(rng, 7)
    oracle = brute_force_loss(H1.tolist(), H2.tolist(), active.stacked().tolist(), 0.4, intra=True)
    got = info_nce_loss(PairContext(H1, H2, 0.4), active, intra_view_negatives=True).loss
    assert got == pytest.approx(oracle, abs=1e-12)


def test_full_activation_equals_unmasked_loss():
    rng = np.random.default_rng(1)
    H1, H2 = rng.standard_normal((8, 4)), rng.standard_normal((8, 4))
    oracle = brute_force_loss(H1.tolist(), H2.tolist(), negatives_full(8).tolist(), 0.5)
    for cat in ("hard", "inter", "easy"):
        got = info_nce_loss(PairContext(H1, H2), ActiveNegatives.full(8, cat)).loss
        assert got == pytest.approx(oracle, abs=1e-12)


def test_row_rescaling_invariance():
    rng = np.random.default_rng(3)
    H1, H2 = rng.standard_normal((6, 4)), rng.standard_normal((6, 4))
    active = random_active(rng, 6)
    base = info_nce_loss(PairContext(H1, H2), active).loss
    H1s = H1.copy()
    H1s[2] *= 3.7
    assert info_nce_loss(PairContext(H1s, H2), active).loss == pytest.approx(base, abs=1e-10)


@pytest.mark.parametrize("flags", [{}, {"intra_view_negatives": True}, {"literal_eq8": True}])
def test_gradients_match_finite_differences(flags):
    rng = np.random.default_rng(11)
    H1, H2 = rng.standard_normal((6, 4)), rng.standard_normal((6, 4))
    active = random_active(rng, 6)
    res = info_nce_loss(PairContext(H1, H2, 0.5), active, **flags)

    def f():
        return info_nce_loss(PairContext(H1, H2, 0.5), active, **flags).loss

    assert rel_error(res.grad_H1, central_diff(f, H1)) < 1e-4
    assert rel_error(res.grad_H2, central_diff(f, H2)) < 1e-4


def test_literal_form_omits_positive():
    H1 = np.array([[1.0, 0.0], [0.0, 1.0]])
    active = ActiveNegatives(np.array([[1], [0]]), np.zeros((2, 0), int), np.zeros((2, 0), int))
    res = info_nce_loss(PairContext(H1, H1.copy(), tau=0.5), active, literal_eq8=True)
    assert res.loss == pytest.approx(-math.log(math.e ** 2 / 1.0))


@settings(max_examples=40, deadline=None)
@given(seed=st.integers(0, 10_000), n=st.integers(3, 8))
def test_category_loss_grows_with_more_negatives(seed, n):
    rng = np.random.default_rng(seed)
    H1, H2 = rng.standard_normal((n, 3)), rng.standard_normal((n, 3))
    cands = negatives_full(n)
    prev = -1.0
    for k in range(n):
        active = ActiveNegatives(cands[:, :k], np.zeros((n, 0), int), np.zeros((n, 0), int))
        value = info_nce_loss(PairContext(H1, H2), active).per_category["hard"]
        assert value >= 0.0
        assert value >= prev - 1e-12
        prev = value


def test_validation_errors():
    with pytest.raises(ValueError):
        PairContext(np.ones((2, 2)), np.ones((2, 2)), tau=0.0)
    with pytest.raises(FloatingPointError):
        PairContext(np.full((2, 2), np.nan), np.ones((2, 2)))
    bad = ActiveNegatives(np.array([[0], [0]]), np.zeros((2, 0), int), np.zeros((2, 0), int))
    with pytest.raises(ValueError):
        bad.validate()
    with pytest.raises(ValueError):
        info_nce_loss(PairContext(np.ones((3, 2)), np.ones((3, 2))), ActiveNegatives.empty(2))
