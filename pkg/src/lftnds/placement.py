"""Per-subsystem sensor and actuator placement conditions.

With ``C_v = 0`` a subsystem's reduced pencil has no L-type block exactly
when ``A_xv`` has full column rank and the projected pencil

    Theta(lambda) = Pperp (lambda I - A_xx) C_x_perp

has full normal column rank, where ``Pperp`` projects onto the orthogonal
complement of ``range(A_xv)`` and ``C_x_perp`` spans ``ker C_x``.  Sensor
positions enter only through ``C_x_perp``, so candidate placements can be
screened one subsystem at a time.
"""
from __future__ import annotations

from dataclasses import dataclass, field, replace
from itertools import combinations

import numpy as np

from .errors import AssumptionViolated, InvalidInput, RefusedTooLarge
from .kcf import STAIRCASE_SLACK
from .model import AugmentedSubsystem
from .numeric import DEFAULT_POLICY, TolerancePolicy, is_fcr, null_space_basis, rank_with_tolerance
from .pencil import MatrixPencil, normal_rank, sample_points

SEARCH_LIMIT = 20
NORMAL_RANK_TRIALS = 4


@dataclass(frozen=True)
class PlacementDiagnostics:
    a_xv_fcr: bool
    theta_fncr: bool
    verdict: bool
    failing_lambda_sample: complex | None = None
    notes: tuple[str, ...] = ()


@dataclass(frozen=True)
class SensorSearch:
    """Minimal passing position sets (1-based), smallest first."""

    sets: list[tuple[int, ...]] = field(default_factory=list)
    notes: tuple[str, ...] = ()


def _slack(pol: TolerancePolicy) -> TolerancePolicy:
    # same margin as the Kronecker reduction, so both sides of the cross-check agree
    return replace(pol, safety_factor=pol.safety_factor * STAIRCASE_SLACK)


def _require_cv_zero(C_v: np.ndarray, what: str = "C_v"):
    if C_v.size and np.any(C_v != 0):
        raise AssumptionViolated(f"placement conditions need {what} = 0")


def complement_projector(A_xv: np.ndarray, pol: TolerancePolicy = DEFAULT_POLICY) -> np.ndarray:
    """Orthogonal projector onto ``range(A_xv)`` complement, built from an orthonormal basis."""
    n = A_xv.shape[0]
    if A_xv.shape[1] == 0:
        return np.eye(n)
    u, s, _ = np.linalg.svd(A_xv, full_matrices=False)
    r = rank_with_tolerance(A_xv, pol)
    Q = u[:, :r]
    return np.eye(n) - Q @ Q.T


def theta_pencil(A_xx: np.ndarray, A_xv: np.ndarray, C_perp: np.ndarray,
                 pol: TolerancePolicy = DEFAULT_POLICY) -> MatrixPencil:
    P = complement_projector(A_xv, pol)
    return MatrixPencil(P @ C_perp, -P @ A_xx @ C_perp)


def _decide(A_xx, A_xv, C_perp, pol: TolerancePolicy, seed: int) -> PlacementDiagnostics:
    if not is_fcr(A_xv, _slack(pol)):
        return PlacementDiagnostics(False, False, False, None,
                                    ("A_xv lacks full column rank; no sensor set can help",))
    k = C_perp.shape[1]
    if k == 0:
        return PlacementDiagnostics(True, True, True, None, ("Theta has no columns",))
    p = theta_pencil(A_xx, A_xv, C_perp, _slack(pol))
    unprojected = MatrixPencil(C_perp, -A_xx @ C_perp)
    r = normal_rank(p, _slack(pol), trials=NORMAL_RANK_TRIALS, rng=np.random.default_rng(seed), reference=unprojected)
    if r == k:
        return PlacementDiagnostics(True, True, True)
    lam = complex(sample_points(unprojected, 1, np.random.default_rng(seed))[0])
    return PlacementDiagnostics(True, False, False, lam,
                                (f"Theta has normal rank {r} < {k} columns",))


def theorem4_check(a: AugmentedSubsystem, pol: TolerancePolicy = DEFAULT_POLICY, seed: int = 0) -> PlacementDiagnostics:
    """Placement condition for the subsystem's own sensors ``C_x``."""
    _require_cv_zero(a.C_v)
    C_perp = null_space_basis(a.C_x, pol) if a.m_y else np.eye(a.m_x)
    if C_perp.shape[0] != a.m_x:
        C_perp = np.zeros((a.m_x, 0))
    return _decide(a.A_xx, a.A_xv, C_perp, pol, seed)


def canonical_cx(sensor_positions, m_x: int) -> np.ndarray:
    """Selection matrix with a single 1 per row at each 1-based position."""
    pos = [int(p) for p in sensor_positions]
    if any(p < 1 or p > m_x for p in pos):
        raise InvalidInput(f"sensor positions must lie in 1..{m_x}")
    if any(b <= a for a, b in zip(pos, pos[1:])):
        raise InvalidInput("sensor positions must be strictly increasing")
    C = np.zeros((len(pos), m_x))
    C[np.arange(len(pos)), np.array(pos, dtype=int) - 1] = 1.0
    return C


def corollary1_check(a: AugmentedSubsystem, sensor_positions, pol: TolerancePolicy = DEFAULT_POLICY,
                     seed: int = 0) -> PlacementDiagnostics:
    """Placement condition when the sensors measure the listed states directly."""
    _require_cv_zero(a.C_v)
    canonical_cx(sensor_positions, a.m_x)  # validation only
    chosen = {int(p) - 1 for p in sensor_positions}
    rest = [j for j in range(a.m_x) if j not in chosen]
    return _decide(a.A_xx, a.A_xv, np.eye(a.m_x)[:, rest], pol, seed)


def dual_subsystem(a: AugmentedSubsystem) -> AugmentedSubsystem:
    """The transposed subsystem: actuators become sensors."""
    return AugmentedSubsystem(
        A_xx=a.A_xx.T, A_xv=a.A_zx.T, A_zx=a.A_xv.T, A_zv=a.A_zv.T,
        B_x=a.C_x.T, B_z=a.C_v.T, C_x=a.B_x.T, C_v=a.B_z.T, D=a.D.T,
        E=None if a.E is None else a.E.T,
    )


def theorem4_dual_check(a: AugmentedSubsystem, pol: TolerancePolicy = DEFAULT_POLICY, seed: int = 0) -> PlacementDiagnostics:
    """Actuator counterpart: needs ``B_z = 0``; fails exactly on J-type blocks."""
    _require_cv_zero(a.B_z, "B_z")
    return theorem4_check(dual_subsystem(a), pol, seed)


def minimal_sensor_search(a: AugmentedSubsystem, budget: int, pol: TolerancePolicy = DEFAULT_POLICY,
                          seed: int = 0) -> SensorSearch:
    """All minimal passing position sets with at most ``budget`` sensors.

    Exhaustive, so it refuses subsystems with more than 20 states.  A set
    counts as minimal when no passing set found earlier is contained in it.
    """
    _require_cv_zero(a.C_v)
    if a.m_x > SEARCH_LIMIT:
        raise RefusedTooLarge(f"exhaustive search is limited to {SEARCH_LIMIT} states, got {a.m_x}")
    if not 0 <= budget <= a.m_x:
        raise InvalidInput(f"budget must lie in 0..{a.m_x}")
    if not is_fcr(a.A_xv, _slack(pol)):
        return SensorSearch([], ("A_xv lacks full column rank; no sensor set can help",))
    found: list[tuple[int, ...]] = []
    for size in range(budget + 1):
        for combo in combinations(range(1, a.m_x + 1), size):
            if any(set(f) <= set(combo) for f in found):
                continue
            if corollary1_check(a, combo, pol, seed).verdict:
                found.append(combo)
    return SensorSearch(found)
