import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from qcd_markov.chain import (
    relative_entropy_rate,
    sample_step,
    stationary,
    structure,
    validate_matrix,
)
from qcd_markov.errors import (
    DimensionMismatch,
    DimensionTooSmall,
    NegativeEntry,
    NonStochastic,
    NotErgodic,
)

from conftest import A_A_3, A_B_3, random_ergodic, sym2


def test_validate_accepts_identity_and_three_state_matrix():
    assert validate_matrix(np.eye(2)).n == 2
    A = validate_matrix(A_B_3)
    np.testing.assert_array_equal(A.entries, np.array(A_B_3))


def test_validate_rejects_row_stochastic_input():
    with pytest.raises(NonStochastic, match="column 0"):
        validate_matrix([[0.9, 0.1], [0.2, 0.8]])


@pytest.mark.parametrize(
    "raw, exc",
    [
        ([[1.0]], DimensionTooSmall),
        ([[1.2, 0.0], [-0.2, 1.0]], NegativeEntry),
        ([[0.5, 0.5, 0.0], [0.5, 0.5, 1.0]], DimensionMismatch),
    ],
)
def test_validate_errors(raw, exc):
    with pytest.raises(exc):
        validate_matrix(raw)


def test_validated_entries_are_read_only():
    A = validate_matrix(A_B_3)
    with pytest.raises(ValueError):
        A.entries[0, 0] = 0.5


def test_structure():
    assert structure(validate_matrix(A_B_3)).ergodic
    perm = structure(validate_matrix([[0, 1], [1, 0]]))
    assert perm.irreducible and perm.period == 2 and not perm.aperiodic
    assert not structure(validate_matrix(np.eye(2))).irreducible
    # 3-cycle with one self-loop is aperiodic
    cyc = validate_matrix([[0.5, 0, 1], [0.5, 0, 0], [0, 1, 0]])
    assert structure(cyc).ergodic
    # pure 3-cycle
    assert structure(validate_matrix([[0, 0, 1], [1, 0, 0], [0, 1, 0]])).period == 3


def test_stationary_examples():
    np.testing.assert_allclose(stationary(validate_matrix(A_B_3)), [1 / 3] * 3, atol=1e-12)
    np.testing.assert_allclose(stationary(validate_matrix(sym2(0.99))), [0.5, 0.5], atol=1e-12)
    # 0.5 p1 = 0.25 p2 with p1 + p2 = 1
    np.testing.assert_allclose(
        stationary(validate_matrix([[0.5, 0.25], [0.5, 0.75]])), [1 / 3, 2 / 3], atol=1e-12
    )


def test_stationary_rejects_nonergodic():
    with pytest.raises(NotErgodic):
        stationary(validate_matrix([[0, 1], [1, 0]]))
    with pytest.raises(NotErgodic):
        stationary(validate_matrix(np.eye(3)))


@settings(max_examples=40, deadline=None)
@given(n=st.integers(2, 8), seed=st.integers(0, 2**32 - 1))
def test_stationary_is_normalised_fixed_point(n, seed):
    A = validate_matrix(random_ergodic(np.random.default_rng(seed), n))
    p = stationary(A)
    assert np.all(p >= 0)
    assert abs(p.sum() - 1) <= 1e-12
    assert np.max(np.abs(A.entries @ p - p)) <= 1e-10
    # independent route: null space of (A - I) via eigendecomposition
    w, v = np.linalg.eig(A.entries)
    ref = np.real(v[:, np.argmin(np.abs(w - 1))])
    np.testing.assert_allclose(p, ref / ref.sum(), atol=1e-9)


def test_rer_examples():
    A = validate_matrix(A_B_3)
    assert relative_entropy_rate(A, A) == 0.0
    hand = 0.99 * math.log(0.99 / 0.84) + 0.01 * math.log(0.01 / 0.16)
    got = relative_entropy_rate(validate_matrix(sym2(0.99)), validate_matrix(sym2(0.84)))
    assert got == pytest.approx(hand, rel=1e-13)
    assert got == pytest.approx(0.13493, abs=5e-6)
    hand3 = 0.99 * math.log(0.99 / 0.8) + 2 * 0.005 * math.log(0.005 / 0.1)
    got3 = relative_entropy_rate(A, validate_matrix(A_A_3))
    assert got3 == pytest.approx(hand3, rel=1e-13)
    assert got3 == pytest.approx(0.18100, abs=5e-6)


def test_rer_nonuniform_stationary_against_brute_force():
    # oracle: direct double sum with the hand-solved stationary law
    P = validate_matrix([[0.5, 0.25], [0.5, 0.75]])
    Q = validate_matrix([[0.3, 0.4], [0.7, 0.6]])
    pi = np.array([1 / 3, 2 / 3])
    direct = sum(
        pi[j] * P.entries[i, j] * math.log(P.entries[i, j] / Q.entries[i, j])
        for i in range(2)
        for j in range(2)
    )
    assert relative_entropy_rate(P, Q) == pytest.approx(direct, rel=1e-12)


def test_rer_infinite_and_zero_terms():
    P = validate_matrix([[0.5, 0.5], [0.5, 0.5]])
    Q = validate_matrix([[1.0, 0.5], [0.0, 0.5]])
    assert relative_entropy_rate(P, Q) == math.inf
    # zero entries of A_b contribute nothing even if A_a is zero there
    R = validate_matrix([[0.0, 0.5], [1.0, 0.5]])
    S = validate_matrix([[0.0, 0.4], [1.0, 0.6]])
    assert math.isfinite(relative_entropy_rate(R, S))


def test_rer_errors():
    with pytest.raises(DimensionMismatch):
        relative_entropy_rate(validate_matrix(A_B_3), validate_matrix(sym2(0.9)))
    with pytest.raises(NotErgodic):
        relative_entropy_rate(validate_matrix(np.eye(2)), validate_matrix(sym2(0.9)))


@settings(max_examples=60, deadline=None)
@given(n=st.integers(2, 6), seed=st.integers(0, 2**32 - 1))
def test_rer_nonnegative(n, seed):
    rng = np.random.default_rng(seed)
    A = validate_matrix(random_ergodic(rng, n))
    B = validate_matrix(random_ergodic(rng, n))
    assert relative_entropy_rate(A, B) >= 0
    assert relative_entropy_rate(A, A) == 0


def test_sample_step_point_mass():
    A = validate_matrix([[0.0, 0.5], [1.0, 0.5]])
    rng = np.random.default_rng(0)
    assert all(sample_step(A, 0, rng) == 1 for _ in range(1000))


def test_sample_step_frequencies():
    A = validate_matrix(A_B_3)
    rng = np.random.default_rng(11)
    draws = np.array([sample_step(A, 0, rng) for _ in range(100_000)])
    freq = np.bincount(draws, minlength=3) / len(draws)
    assert abs(freq[0] - 0.99) <= 0.005
    np.testing.assert_allclose(freq, A.entries[:, 0], atol=0.01)


def test_sample_step_replay():
    A = validate_matrix(A_A_3)

    def run(seed):
        rng = np.random.default_rng(seed)
        s, out = 0, []
        for _ in range(200):
            s = sample_step(A, s, rng)
            out.append(s)
        return out

    assert run(5) == run(5)
