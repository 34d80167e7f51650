import itertools
import warnings
from dataclasses import replace

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from lftnds.errors import AssumptionViolated, InvalidInput, RefusedTooLarge
from lftnds.kcf import kcf
from lftnds.model import AugmentedSubsystem, LftSubsystem, augment, rc_network
from lftnds.placement import (canonical_cx, corollary1_check, dual_subsystem, minimal_sensor_search, theorem4_check,
                              theorem4_dual_check)
from lftnds.random_models import random_subsystem
from lftnds.verify import output_kernel, subsystem_reduced_pencil


def zeta_L(a: AugmentedSubsystem) -> int:
    k = output_kernel(a)
    if k.is_output_fcr:
        return 0
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        return kcf(subsystem_reduced_pencil(a, k), structure_only=True).zeta_L


def with_sensors(a: AugmentedSubsystem, positions) -> AugmentedSubsystem:
    return replace(a, C_x=canonical_cx(positions, a.m_x), C_v=np.zeros((len(positions), a.m_vbar)),
                   D=np.zeros((len(positions), a.m_u)))


def rc_subsystem():
    return rc_network(1, 1.5, 0.8, 1.0, 1.0, []).augmented[0]


def test_canonical_cx_examples():
    np.testing.assert_array_equal(canonical_cx([2], 2), [[0, 1]])
    np.testing.assert_array_equal(canonical_cx([1, 2, 3], 3), np.eye(3))
    np.testing.assert_array_equal(canonical_cx([1, 3], 4), np.eye(4)[[0, 2]])


@pytest.mark.parametrize("pos", [[0], [3], [2, 2], [2, 1]])
def test_canonical_cx_rejects_bad_positions(pos):
    with pytest.raises(InvalidInput):
        canonical_cx(pos, 2)


def test_zero_column_in_a_xv_fails():
    a = augment(LftSubsystem.build(np.eye(2), A_xv=np.array([[1.0, 0.0], [0.0, 0.0]]), C_x=[[1.0, 0.0]]))
    d = theorem4_check(a)
    assert not d.a_xv_fcr and not d.verdict
    assert zeta_L(a) > 0


def test_rc_subsystem_passes():
    a = rc_subsystem()
    assert theorem4_check(a).verdict
    assert zeta_L(a) == 0
    assert corollary1_check(a, [2]).verdict
    assert corollary1_check(a, [2]).verdict == theorem4_check(with_sensors(a, [2])).verdict
    assert (2,) in minimal_sensor_search(a, 1).sets


def test_full_state_measurement_is_vacuous():
    a = augment(LftSubsystem.build(np.ones((2, 2)), A_xv=np.array([[1.0], [2.0]]), C_x=np.eye(2)))
    d = theorem4_check(a)
    assert d.verdict and d.theta_fncr
    assert corollary1_check(a, [1, 2]).verdict == d.a_xv_fcr


def test_shift_example_against_kcf():
    a = augment(LftSubsystem.build(np.array([[0.0, 1.0], [0.0, 0.0]]), A_xv=np.array([[1.0], [0.0]]), m_y=0))
    # Theta(lambda) = (I - e1 e1^T)(lambda I - A_xx) e2 = col{0, lambda}: full normal column rank
    d = corollary1_check(a, [1])
    assert d.verdict
    assert zeta_L(with_sensors(a, [1])) == 0
    assert not corollary1_check(a, []).verdict
    assert zeta_L(with_sensors(a, [])) > 0


def test_cv_nonzero_rejected():
    a = augment(LftSubsystem.build(np.eye(1), A_xv=[[1.0]], C_x=[[1.0]], C_v=[[1.0]]))
    with pytest.raises(AssumptionViolated):
        theorem4_check(a)
    with pytest.raises(AssumptionViolated):
        corollary1_check(a, [1])
    with pytest.raises(AssumptionViolated):
        minimal_sensor_search(a, 1)


def test_dual_checks():
    # A_zx of full row rank and full-state actuation: the dual is the vacuous case
    a = augment(LftSubsystem.build(np.ones((2, 2)), A_zx=np.array([[1.0, 2.0]]), B_x=np.eye(2)))
    assert theorem4_dual_check(a).verdict
    bad = augment(LftSubsystem.build(np.eye(2), A_zx=np.array([[1.0, 0.0], [2.0, 0.0]]), B_x=np.eye(2)[:, :1]))
    assert not theorem4_dual_check(bad).verdict
    with pytest.raises(AssumptionViolated):
        theorem4_dual_check(augment(LftSubsystem.build(np.eye(1), A_zx=[[1.0]], B_z=[[1.0]])))


def test_dual_check_matches_dual_kcf(rng):
    checked = 0
    while checked < 60:
        s = random_subsystem(rng, max_x=4)
        a = augment(s)
        if a.B_z.size and np.any(a.B_z != 0):
            continue
        assert theorem4_dual_check(a).verdict == (zeta_L(dual_subsystem(a)) == 0)
        assert theorem4_dual_check(a) == theorem4_check(dual_subsystem(a))
        checked += 1


def test_search_refuses_large_subsystems():
    a = augment(LftSubsystem.build(np.eye(21), A_xv=np.ones((21, 1)), m_y=0))
    with pytest.raises(RefusedTooLarge):
        minimal_sensor_search(a, 1)


def test_search_cases():
    # no internal input: the reduced pencil is regular, so no sensor is needed
    a = augment(LftSubsystem.build(np.diag([1.0, 2.0, 3.0]), A_xv=np.zeros((3, 0)), m_y=0))
    assert minimal_sensor_search(a, 3).sets == [()]
    lone = augment(LftSubsystem.build(np.zeros((2, 2)), A_xv=np.eye(2), m_y=0))
    assert minimal_sensor_search(lone, 2).sets == [(1, 2)]
    bad = augment(LftSubsystem.build(np.eye(2), A_xv=np.zeros((2, 1)), m_y=0))
    res = minimal_sensor_search(bad, 2)
    assert res.sets == [] and res.notes


def test_search_every_singleton_passes():
    # an internal input spanning the whole state space needs the state measured
    a = augment(LftSubsystem.build(np.zeros((1, 1)), A_xv=np.ones((1, 1)), m_y=0))
    assert minimal_sensor_search(a, 1).sets == [(1,)]
    a = augment(LftSubsystem.build(np.array([[1.0, 0.0], [0.0, 2.0]]), A_xv=np.array([[1.0], [1.0]]), m_y=0))
    sets = minimal_sensor_search(a, 2).sets
    assert sets == [(1,), (2,)]
    for p in sets:
        assert corollary1_check(a, p).verdict


def test_search_results_are_minimal(rng):
    for _ in range(20):
        a = augment(random_subsystem(rng, cv_zero=True, max_x=4))
        res = minimal_sensor_search(a, a.m_x)
        for p in res.sets:
            assert corollary1_check(a, p).verdict
            for q in res.sets:
                assert p == q or not set(q) < set(p)


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_placement_invariants(seed):
    g = np.random.default_rng(seed)
    a = augment(random_subsystem(g, cv_zero=True, max_x=4))
    assert theorem4_check(a).verdict == (zeta_L(a) == 0)
    for size in range(a.m_x + 1):
        for pos in itertools.combinations(range(1, a.m_x + 1), size):
            c1 = corollary1_check(a, pos)
            assert c1.verdict == theorem4_check(with_sensors(a, pos)).verdict
            assert c1.verdict == (c1.a_xv_fcr and c1.theta_fncr)
            if c1.verdict:
                for extra in set(range(1, a.m_x + 1)) - set(pos):
                    assert corollary1_check(a, sorted(pos + (extra,))).verdict
