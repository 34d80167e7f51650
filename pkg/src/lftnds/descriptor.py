"""Regularity and complete observability of networks with descriptor subsystems."""
from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np
import scipy.linalg as sla
import scipy.sparse as sp

from .errors import NotRegular, NotWellPosed
from .kcf import STAIRCASE_SLACK
from .model import NdsModel, block_diag, dualize, lump, well_posed_nds
from .numeric import DEFAULT_POLICY, TolerancePolicy, is_fcr, null_space_basis, rank_with_tolerance, singular_values
from .pencil import cluster_values
from .verify import PBH_CLUSTER_LEVELS, VerificationReport, _check_well_posed, verify_observability

# the interpolated determinant counts as identically zero below this fraction of its scale
DET_ZERO_TOL = 1e-8


@dataclass(frozen=True, eq=False)
class DescriptorReport:
    regular: bool
    infinity_condition: bool
    finite_condition: bool
    verdict: bool
    evidence: VerificationReport | None = None
    prop: str = "observability"


def _slack(pol: TolerancePolicy) -> TolerancePolicy:
    return replace(pol, safety_factor=pol.safety_factor * STAIRCASE_SLACK)


def regularity_points(m: NdsModel) -> np.ndarray:
    """``M_x + 1`` distinct points: roots of unity scaled past the data norms."""
    st = m.stacked
    r = 1.0 + sum(float(np.linalg.norm(st[k], 2)) if st[k].size else 0.0 for k in ("E", "A_xx", "A_xv"))
    n = st["A_xx"].shape[0] + 1
    return r * np.exp(2j * np.pi * np.arange(n) / n)


def interconnected_pencil_at(m: NdsModel, lam) -> np.ndarray:
    """``[[lam E - A_xx, -A_xv], [-Phibar A_zx, I - Phibar A_zv]]``."""
    st = m.stacked
    Pb = m.scm_bar.toarray()
    lam = complex(lam)
    top_left = (lam.real if lam.imag == 0 else lam) * st["E"] - st["A_xx"]
    Mv = st["A_xv"].shape[1]
    return np.block([[top_left, -st["A_xv"].astype(top_left.dtype)],
                     [-(Pb @ st["A_zx"]).astype(top_left.dtype), np.eye(Mv) - Pb @ st["A_zv"]]])


def regularity_check(m: NdsModel, pol: TolerancePolicy = DEFAULT_POLICY) -> bool:
    """Regular iff the interconnected pencil is nonsingular at one of ``M_x + 1`` distinct points."""
    if not well_posed_nds(m, pol):
        raise NotWellPosed("I - Phibar A_zv is singular")
    if m.M_x == 0:
        return True
    for lam in regularity_points(m):
        if is_fcr(interconnected_pencil_at(m, lam), pol):
            return True
    return False


def infinity_matrix(m: NdsModel) -> np.ndarray:
    """The constant matrix ``[[E, 0], [-C_x, -C_v], [-Phibar A_zx, I - Phibar A_zv]]``."""
    st = m.stacked
    Pb = m.scm_bar.toarray()
    Mv = st["A_xv"].shape[1]
    return np.vstack([
        np.hstack([st["E"], np.zeros((st["E"].shape[0], Mv))]),
        np.hstack([-st["C_x"], -st["C_v"]]),
        np.hstack([-Pb @ st["A_zx"], np.eye(Mv) - Pb @ st["A_zv"]]),
    ])


def infinity_condition(m: NdsModel, pol: TolerancePolicy = DEFAULT_POLICY) -> bool:
    """Full column rank of the infinity matrix, tested on the per-subsystem kernels.

    Each subsystem contributes a basis of ``ker [[E, 0], [C_x, C_v]]``; only
    the connection rows applied to those bases need a rank test.
    """
    Nx, Nv = [], []
    for a in m.augmented:
        K = null_space_basis(np.vstack([np.hstack([a.E_or_identity, np.zeros((a.m_x, a.m_vbar))]),
                                        np.hstack([a.C_x, a.C_v])]), pol)
        if K.shape[0] != a.m_x + a.m_vbar:
            K = np.zeros((a.m_x + a.m_vbar, 0))
        Nx.append(K[:a.m_x])
        Nv.append(K[a.m_x:])
    Nx, Nv = block_diag(Nx), block_diag(Nv)
    if Nx.shape[1] == 0:
        return True
    st = m.stacked
    Z = st["A_zx"] @ Nx + st["A_zv"] @ Nv
    PZ = m.scm_bar @ Z
    T = Nv - PZ
    phi = float(sp.linalg.norm(m.scm_bar)) if m.scm_bar.nnz else 0.0
    zs = float(np.linalg.norm(np.hstack([st["A_zx"], st["A_zv"]]))) if Z.size else 0.0
    return rank_with_tolerance(T, _slack(pol), max(1.0, phi * zs)) == T.shape[1]


def complete_observability(m: NdsModel, pol: TolerancePolicy = DEFAULT_POLICY, threads: int = 1) -> DescriptorReport:
    """Regularity, then the infinity condition, then the finite-point pipeline with ``E``."""
    _check_well_posed(m, pol)
    if not regularity_check(m, pol):
        raise NotRegular("det(lambda E - A) vanishes identically")
    inf_ok = infinity_condition(m, pol)
    rep = verify_observability(m, pol, threads, use_E=True)
    return DescriptorReport(True, inf_ok, rep.verdict, inf_ok and rep.verdict, rep)


def complete_controllability(m: NdsModel, pol: TolerancePolicy = DEFAULT_POLICY, threads: int = 1) -> DescriptorReport:
    out = complete_observability(dualize(m), pol, threads)
    ev = replace(out.evidence, prop="controllability") if out.evidence is not None else None
    return replace(out, evidence=ev, prop="controllability")


# ---------------------------------------------------------------- lumped oracles

def det_coefficients(E: np.ndarray, A: np.ndarray) -> tuple[np.ndarray, float]:
    """Coefficients of ``det(lambda E - A)`` scaled to the sampling circle, and their scale.

    The polynomial has degree at most ``n``, so ``n + 1`` samples on a circle
    determine it and an inverse FFT recovers ``c_k r^k``.
    """
    n = A.shape[0]
    if n == 0:
        return np.ones(1), 1.0
    r = 1.0 + float(np.linalg.norm(E, 2)) + float(np.linalg.norm(A, 2))
    pts = r * np.exp(2j * np.pi * np.arange(n + 1) / (n + 1))
    vals = np.array([np.linalg.det(p * E - A) for p in pts])
    # a singular pencil's computed determinant is roundoff of size
    # eps * sigma_max * (product of the n - 1 largest singular values)
    scale = 0.0
    for p in pts:
        sv = np.linalg.svd(p * E - A, compute_uv=False)
        scale = max(scale, float(sv[0] * np.prod(sv[:-1])))
    return np.fft.ifft(vals), scale


def regularity_oracle(m: NdsModel) -> bool:
    """Regularity of the lumped pair from the interpolated determinant polynomial."""
    E, A, _, _, _ = lump(m)
    c, scale = det_coefficients(E, A)
    return bool(np.max(np.abs(c)) > DET_ZERO_TOL * scale)


def _pencil_pbh(E: np.ndarray, A: np.ndarray, C: np.ndarray, pol: TolerancePolicy) -> bool:
    n = A.shape[0]
    if n == 0:
        return True
    w = sla.eigvals(A, E, homogeneous_eigvals=True)
    alpha, beta = w[0], w[1]
    bound = max(float(np.linalg.norm(E, 2)), 1e-300)
    finite = np.abs(beta) > 1e-10 * np.hypot(np.abs(alpha), np.abs(beta)) * max(1.0, bound)
    eigs = alpha[finite] / beta[finite]
    points = {}
    for level in PBH_CLUSTER_LEVELS:
        for mu, _ in cluster_values(eigs, level):
            points.setdefault((mu.real, mu.imag), mu)
    for mu in points.values():
        M = np.vstack([mu * E - A, C.astype(complex)])
        s = singular_values(M)
        if s[-1] <= pol.threshold(M.shape, s[0]):
            return False
    return True


def descriptor_oracle(m: NdsModel, pol: TolerancePolicy = DEFAULT_POLICY,
                      controllability: bool = False) -> tuple[bool, bool]:
    """(finite condition, infinity condition) of the lumped descriptor pair."""
    E, A, B, C, _ = lump(m)
    if controllability:
        E, A, C = E.T, A.T, B.T
    return _pencil_pbh(E, A, C, pol), is_fcr(np.vstack([E, C]), pol)
