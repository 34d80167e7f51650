from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from lftnds.errors import InvalidInput
from lftnds.numeric import (DEFAULT_POLICY, EPS, TolerancePolicy, is_fcr, null_space_basis, rank_with_tolerance,
                            smallest_singular_pair)


def exact_rank(M) -> int:
    """Gaussian elimination over the rationals."""
    rows = [[Fraction(float(x)) for x in r] for r in np.asarray(M)]
    rank, ncols = 0, len(rows[0]) if rows else 0
    for c in range(ncols):
        piv = next((r for r in range(rank, len(rows)) if rows[r][c] != 0), None)
        if piv is None:
            continue
        rows[rank], rows[piv] = rows[piv], rows[rank]
        for r in range(len(rows)):
            if r != rank and rows[r][c] != 0:
                f = rows[r][c] / rows[rank][c]
                rows[r] = [a - f * b for a, b in zip(rows[r], rows[rank])]
        rank += 1
    return rank


def test_threshold_formula():
    pol = TolerancePolicy(relative_eps=2.0, safety_factor=3.0, absolute_floor=0.0)
    assert pol.threshold((4, 7), 5.0) == pytest.approx(3.0 * 7 * 5.0 * EPS * 2.0)
    assert TolerancePolicy(absolute_floor=1.0).threshold((2, 2), 1.0) == 1.0
    assert DEFAULT_POLICY.threshold((1, 1), 1e-300) > 0


@pytest.mark.parametrize("kw", [dict(relative_eps=0), dict(safety_factor=-1), dict(absolute_floor=-1e-3)])
def test_policy_rejects_bad_values(kw):
    with pytest.raises(InvalidInput):
        TolerancePolicy(**kw)


def test_rank_identity_and_zero():
    assert rank_with_tolerance(np.eye(3)) == 3
    assert rank_with_tolerance(np.zeros((2, 2))) == 0
    assert rank_with_tolerance(np.zeros((0, 4))) == 0


def test_rank_tiny_diagonal_matches_exact_rank_of_rounded_problem():
    M = np.diag([1.0, 1e-300])
    # exactly rank 2 in rationals, but 1e-300 is far below eps * sigma_max
    assert exact_rank(M) == 2
    assert rank_with_tolerance(M) == 1
    # the default policy agrees with exact arithmetic once the entries are well separated
    for M in (np.array([[1.0, 2.0], [2.0, 4.0]]), np.array([[1.0, 2.0], [3.0, 4.0]]), np.ones((3, 3))):
        assert rank_with_tolerance(M) == exact_rank(M)


def test_non_finite_rejected():
    with pytest.raises(InvalidInput):
        rank_with_tolerance(np.array([[np.nan]]))
    with pytest.raises(InvalidInput):
        null_space_basis(np.array([[1.0, np.inf]]))


def test_null_space_simple():
    B = null_space_basis(np.array([[1.0, 0.0], [0.0, 0.0]]))
    assert B.shape == (2, 1)
    np.testing.assert_allclose(np.abs(B[:, 0]), [0.0, 1.0], atol=1e-15)


def test_null_space_of_rc_output_row():
    # right capacitor output: C_x = [0 1], C_v = [0]
    B = null_space_basis(np.array([[0.0, 1.0, 0.0]]))
    assert B.shape == (3, 2)
    N_cx, N_cv = B[:2], B[2:]
    # kernel is span{e1, e3}: rotate so that N_cx = [[1,0],[0,0]] and N_cv = [0 1]
    target = np.array([[1.0, 0.0], [0.0, 0.0], [0.0, 1.0]])
    R = np.linalg.lstsq(B, target, rcond=None)[0]
    np.testing.assert_allclose(B @ R, target, atol=1e-14)
    np.testing.assert_allclose(N_cx @ R, [[1, 0], [0, 0]], atol=1e-14)
    np.testing.assert_allclose(N_cv @ R, [[0, 1]], atol=1e-14)


def test_null_space_rank3(rng):
    M = rng.standard_normal((4, 3)) @ rng.standard_normal((3, 6))
    B = null_space_basis(M)
    assert B.shape[1] == 6 - np.linalg.matrix_rank(M) == 3
    assert np.linalg.norm(M @ B) <= 1e-10 * np.linalg.norm(M)


def test_null_space_zero_rows_is_whole_space():
    np.testing.assert_array_equal(null_space_basis(np.zeros((0, 3))), np.eye(3))


def test_is_fcr_cases():
    assert is_fcr(np.zeros((3, 0)))
    assert is_fcr(np.array([[1.0], [1.0]]))
    assert not is_fcr(np.ones((2, 2)))


def test_complex_rank():
    M = np.array([[1.0, 1j], [1j, -1.0]])
    assert rank_with_tolerance(M) == 1
    B = null_space_basis(M)
    assert np.linalg.norm(M @ B) < 1e-14


def test_smallest_singular_pair():
    s, w = smallest_singular_pair(np.diag([3.0, 0.5]))
    assert s == pytest.approx(0.5)
    np.testing.assert_allclose(np.abs(w), [0.0, 1.0])
    s, w = smallest_singular_pair(np.ones((1, 2)))
    assert s == 0.0 and np.linalg.norm(np.ones((1, 2)) @ w) < 1e-15


matrices = st.tuples(st.integers(1, 6), st.integers(1, 6), st.integers(0, 6), st.booleans(), st.integers(0, 2**32 - 1))


@settings(max_examples=150, deadline=None)
@given(matrices)
def test_kernel_properties(params):
    m, n, r, cplx, seed = params
    g = np.random.default_rng(seed)
    r = min(r, m, n)
    L, R = g.standard_normal((m, r)), g.standard_normal((r, n))
    if cplx:
        L, R = L + 1j * g.standard_normal((m, r)), R + 1j * g.standard_normal((r, n))
    M = L @ R
    B = null_space_basis(M)
    rank = rank_with_tolerance(M)
    assert rank + B.shape[1] == n
    assert rank == r
    if B.shape[1]:
        assert np.max(np.abs(M @ B)) <= 1e-12 * max(1.0, np.linalg.norm(M, 2))
        np.testing.assert_allclose(B.conj().T @ B, np.eye(B.shape[1]), atol=1e-12)
    assert is_fcr(M) == (B.shape[1] == 0)


@settings(max_examples=100, deadline=None)
@given(arrays(np.float64, st.tuples(st.integers(0, 5), st.integers(0, 5)),
              elements=st.floats(-1e3, 1e3, allow_nan=False)))
def test_rank_nullity_on_arbitrary_entries(M):
    B = null_space_basis(M)
    n = M.shape[1]
    assert rank_with_tolerance(M) + B.shape[1] == n
