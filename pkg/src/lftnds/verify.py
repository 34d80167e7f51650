"""Observability and controllability of a networked system.

The structured test works subsystem by subsystem: each subsystem's output
kernel reduces its part of the network pencil, the reduced pencil is brought
to Kronecker form, and only at the finitely many points where the canonical
H/K/L part drops rank is a single sparse rank test on the network run.
Subsystems with L blocks make that set the whole plane; then the assembled
network pencil is decided by one whole-pencil Kronecker reduction instead.
"""
from __future__ import annotations

import time
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np
import scipy.linalg as sla
import scipy.sparse as sp
import scipy.sparse.linalg  # noqa: F401 - sp.linalg.norm

from .errors import ConsistencyError, IllConditioned, NotWellPosed, UnsupportedByOracle
from .kcf import ALL_OF_C, STAIRCASE_SLACK, KcfDecomposition, kcf, lambda_singular_set
from .model import AugmentedSubsystem, NdsModel, block_diag, dualize, lump, offsets, well_posed_nds, well_posed_subsystem
from .numeric import DEFAULT_POLICY, TolerancePolicy, null_space_basis, rank_with_tolerance, singular_values
from .pencil import (CLUSTER_TOL, LOOSE_CLUSTER_TOL, MatrixPencil, _same_point, block_null_space, cluster_indices,
                     cluster_values, evaluate)

MODES = ("trivially_observable", "finite_lambda", "fallback_full_pencil")
# a witness replays when ||M(l) a|| stays below this fraction of ||M(l)|| ||a||
WITNESS_TOL = 1e-8


@dataclass(frozen=True, eq=False)
class OutputKernel:
    is_output_fcr: bool
    N_cx: np.ndarray
    N_cv: np.ndarray

    @property
    def dim(self) -> int:
        return self.N_cx.shape[1]


@dataclass(frozen=True, eq=False)
class Failure:
    lam: complex
    rank: int
    required: int
    witness: np.ndarray
    lifted: np.ndarray
    residual: float


@dataclass(frozen=True, eq=False)
class SubsystemSummary:
    index: int
    blocks: tuple[str, ...]
    zeta_L: int
    output_fcr: bool
    warnings: tuple[str, ...] = ()


@dataclass(frozen=True, eq=False)
class VerificationReport:
    verdict: bool
    mode: str
    lambda_set: object  # list of complex, or ALL_OF_C
    failures: tuple[Failure, ...]
    per_subsystem: tuple[SubsystemSummary, ...]
    timings: dict = field(default_factory=dict)
    warnings: tuple[str, ...] = ()
    prop: str = "observability"


@dataclass(frozen=True, eq=False)
class SubsystemStage:
    """Everything the network test needs from one subsystem."""

    index: int
    kernel: OutputKernel
    pencil: MatrixPencil | None = None
    dec: KcfDecomposition | None = None
    Xpre: np.ndarray | None = None
    Ypre: np.ndarray | None = None
    Vinv_s: np.ndarray | None = None
    points: tuple = ()
    scale: float = 0.0

    @property
    def active(self) -> bool:
        return not self.kernel.is_output_fcr


def output_kernel(a: AugmentedSubsystem, pol: TolerancePolicy = DEFAULT_POLICY) -> OutputKernel:
    """Orthonormal basis of ``ker [C_x C_v]`` split into state and internal-input rows."""
    n = a.m_x + a.m_vbar
    if a.m_y == 0:
        B = np.eye(n)
    else:
        B = null_space_basis(np.hstack([a.C_x, a.C_v]), pol)
        if B.shape[0] != n:
            B = np.zeros((n, 0))
    return OutputKernel(B.shape[1] == 0, B[:a.m_x], B[a.m_x:])


def subsystem_reduced_pencil(a: AugmentedSubsystem, k: OutputKernel, use_E: bool = True) -> MatrixPencil:
    """``lambda * E N_cx - (A_xx N_cx + A_xv N_cv)``."""
    G = (a.E_or_identity if use_E else np.eye(a.m_x)) @ k.N_cx
    return MatrixPencil(G, -(a.A_xx @ k.N_cx + a.A_xv @ k.N_cv))


def _pmap(fn, items, threads: int):
    if threads <= 1 or len(items) < 2:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=threads) as ex:
        return list(ex.map(fn, items))


def _stage(i: int, a: AugmentedSubsystem, pol: TolerancePolicy, use_E: bool) -> SubsystemStage:
    k = output_kernel(a, pol)
    if k.is_output_fcr:
        return SubsystemStage(i, k)
    p = subsystem_reduced_pencil(a, k, use_E)
    d = kcf(p, pol)
    Vinv_s = d.V_inv[:, :d.s]
    lam = lambda_singular_set(d)
    Z = a.A_zx @ k.N_cx + a.A_zv @ k.N_cv
    # rounding in the products is relative to their factors, not to the result;
    # the kernel basis is orthonormal, so only the connection rows add scale
    scale = float(np.linalg.norm(Vinv_s)) * max(1.0, float(np.linalg.norm(np.hstack([a.A_zx, a.A_zv]))))
    return SubsystemStage(
        i, k, p, d,
        Xpre=k.N_cv @ Vinv_s,
        Ypre=Z @ Vinv_s,
        Vinv_s=Vinv_s,
        points=lam if lam is ALL_OF_C else tuple(lam),
        scale=scale,
    )


def prepare(m: NdsModel, pol: TolerancePolicy = DEFAULT_POLICY, threads: int = 1, use_E: bool = True):
    """Per-subsystem output kernels, reduced pencils and their decompositions."""
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always", IllConditioned)
        stages = _pmap(lambda ia: _stage(ia[0], ia[1], pol, use_E), list(enumerate(m.augmented)), threads)
    return stages, [str(w.message) for w in caught if issubclass(w.category, IllConditioned)]


def xi_bar_kernel(d: KcfDecomposition, lam, pol: TolerancePolicy = DEFAULT_POLICY) -> np.ndarray:
    """Kernel of the H/K/L part of the canonical pencil at ``lam`` (``s`` rows)."""
    parts = [block_null_space(b, lam, pol) for b in d.blocks if b.kind in "HKL"]
    rows = sum(b.shape[1] for b in d.blocks if b.kind in "HKL")
    cols = sum(p.shape[1] for p in parts)
    dtype = complex if any(np.iscomplexobj(p) for p in parts) else float
    out = np.zeros((rows, cols), dtype=dtype)
    r = c = 0
    for b, p in zip((b for b in d.blocks if b.kind in "HKL"), parts):
        out[r:r + p.shape[0], c:c + p.shape[1]] = p
        r += b.shape[1]
        c += p.shape[1]
    return out


def _network_policy(pol: TolerancePolicy) -> TolerancePolicy:
    # X and Y inherit the rounding of the per-subsystem transforms, so the
    # network rank test uses the staircase slack
    return replace(pol, safety_factor=pol.safety_factor * STAIRCASE_SLACK)


def _owner_point(st: SubsystemStage, lam: complex):
    if st.points is ALL_OF_C:
        return lam
    return next((mu for mu in st.points if _same_point(lam, mu)), None)


def build_xy(m: NdsModel, stages, lam, pol: TolerancePolicy = DEFAULT_POLICY, owners=None):
    """``X(lam)`` and ``Y(lam)`` as sparse matrices, plus the column layout.

    Only subsystems whose canonical part is singular at ``lam`` contribute
    columns.  The layout lists ``(stage, local point, kernel)`` per
    contributing subsystem.
    """
    lam = complex(lam)
    vb = offsets(a.m_vbar for a in m.augmented)
    zb = offsets(a.m_zbar for a in m.augmented)
    if owners is None:
        owners = [(st, _owner_point(st, lam)) for st in stages if st.active]
        owners = [(st, mu) for st, mu in owners if mu is not None]
    layout = []
    xs, ys = [], []
    for st, mu in owners:
        K = xi_bar_kernel(st.dec, mu, pol)
        if K.shape[1] == 0:
            continue
        layout.append((st, mu, K))
        xs.append((vb[st.index], st.Xpre @ K))
        ys.append((zb[st.index], st.Ypre @ K))
    if not layout:
        raise ConsistencyError(f"no subsystem is singular at {lam}; the point is not in the singular set")
    X = _stack_columns(xs, int(vb[-1]))
    Y = _stack_columns(ys, int(zb[-1]))
    return X, Y, layout


def _stack_columns(blocks, nrows: int) -> sp.csc_array:
    rows, cols, vals = [], [], []
    c0 = 0
    dtype = float
    for r0, B in blocks:
        r, c = np.nonzero(B)
        rows.append(r + r0)
        cols.append(c + c0)
        vals.append(B[r, c])
        c0 += B.shape[1]
        if np.iscomplexobj(B):
            dtype = complex
    data = np.concatenate(vals).astype(dtype) if vals else np.zeros(0)
    return sp.coo_array((data, (np.concatenate(rows), np.concatenate(cols))), shape=(nrows, c0)).tocsc()


def _test_matrix(scm_csc: sp.csc_array, X: sp.csc_array, Y: sp.csc_array) -> np.ndarray:
    """Dense ``X - Phibar Y`` restricted to its nonzero rows."""
    T = (X - scm_csc @ Y).tocsr()
    nz = np.flatnonzero(np.diff(T.indptr))
    return T[nz].toarray() if nz.size else np.zeros((0, T.shape[1]), dtype=T.dtype)


def _network_scale(m: NdsModel, stages) -> float:
    """Magnitude of the network test's terms, independent of ``lambda``.

    Rank is judged against the operands, not the difference: exact
    cancellation (or entries that are pure roundoff) must not count as rank.
    """
    pre = max((st.scale for st in stages if st.active), default=0.0)
    phi = float(sp.linalg.norm(m.scm_bar)) if m.scm_bar.nnz else 0.0
    return pre * max(1.0, phi)


def _lift(m: NdsModel, parts) -> np.ndarray:
    """Embed per-subsystem kernel coordinates into the (x, vbar) space of M(lambda)."""
    aug = m.augmented
    xo = offsets(a.m_x for a in aug)
    vo = offsets(a.m_vbar for a in aug)
    Mx = int(xo[-1])
    out = np.zeros(Mx + int(vo[-1]), dtype=complex)
    for st, xi in parts:
        out[xo[st.index]:xo[st.index + 1]] = st.kernel.N_cx @ xi
        out[Mx + vo[st.index]:Mx + vo[st.index + 1]] = st.kernel.N_cv @ xi
    return out.real.copy() if not np.iscomplexobj(out) or np.all(out.imag == 0) else out


def m_pencil(m: NdsModel, use_E: bool = True) -> MatrixPencil:
    """The full network pencil with row blocks (state, output, interconnection)."""
    st = m.stacked
    Pb = m.scm_bar.toarray()
    Mx, Mv = st["A_xx"].shape[0], st["A_xv"].shape[1]
    My = st["C_x"].shape[0]
    E = st["E"] if use_E else np.eye(Mx)
    G = np.zeros((Mx + My + Mv, Mx + Mv))
    G[:Mx, :Mx] = E
    H = np.vstack([
        np.hstack([-st["A_xx"], -st["A_xv"]]),
        np.hstack([-st["C_x"], -st["C_v"]]),
        np.hstack([-Pb @ st["A_zx"], np.eye(Mv) - Pb @ st["A_zv"]]),
    ])
    return MatrixPencil(G, H)


def witness_residual(m: NdsModel, lam, alpha: np.ndarray, use_E: bool = True) -> float:
    """Relative residual ``||M(lam) alpha|| / (||M(lam)|| ||alpha||)``."""
    M = evaluate(m_pencil(m, use_E), lam)
    na = np.linalg.norm(alpha)
    if na == 0:
        return np.inf
    nm = np.linalg.norm(M, 2) if M.size else 1.0
    return float(np.linalg.norm(M @ alpha) / (max(nm, 1e-300) * na))


def _global_kernels(m: NdsModel, stages):
    aug = m.augmented
    Nx = block_diag([st.kernel.N_cx if st.active else np.zeros((a.m_x, 0)) for st, a in zip(stages, aug)])
    Nv = block_diag([st.kernel.N_cv if st.active else np.zeros((a.m_vbar, 0)) for st, a in zip(stages, aug)])
    return Nx, Nv


def psi_pencil(m: NdsModel, stages, use_E: bool = True) -> MatrixPencil:
    """Network pencil restricted to the stacked output kernels."""
    st = m.stacked
    Nx, Nv = _global_kernels(m, stages)
    Pb = m.scm_bar.toarray()
    E = st["E"] if use_E else np.eye(Nx.shape[0])
    G = np.vstack([E @ Nx, np.zeros((Nv.shape[0], Nx.shape[1]))])
    H = np.vstack([-st["A_xx"] @ Nx - st["A_xv"] @ Nv, Nv - Pb @ (st["A_zx"] @ Nx + st["A_zv"] @ Nv)])
    return MatrixPencil(G, H)


def psi_bar_pencil(m: NdsModel, stages) -> MatrixPencil:
    """Canonical H/K/L parts stacked over the connection rows in the reduced coordinates."""
    active = [st for st in stages if st.active]
    top = [st.dec.xi_bar() for st in active]
    rows = sum(p.shape[0] for p in top)
    cols = sum(p.shape[1] for p in top)
    Gt = block_diag([p.G for p in top]) if top else np.zeros((0, 0))
    Ht = block_diag([p.H for p in top]) if top else np.zeros((0, 0))
    vb = offsets(a.m_vbar for a in m.augmented)
    zb = offsets(a.m_zbar for a in m.augmented)
    Xp = np.zeros((int(vb[-1]), cols))
    Yp = np.zeros((int(zb[-1]), cols))
    c = 0
    for st in active:
        s = st.dec.s
        Xp[vb[st.index]:vb[st.index + 1], c:c + s] = st.Xpre
        Yp[zb[st.index]:zb[st.index + 1], c:c + s] = st.Ypre
        c += s
    bottom = Xp - m.scm_bar @ Yp
    G = np.vstack([Gt.reshape(rows, cols), np.zeros_like(bottom)])
    H = np.vstack([Ht.reshape(rows, cols), bottom])
    return MatrixPencil(G, H)


def fcr_everywhere(p: MatrixPencil, pol: TolerancePolicy = DEFAULT_POLICY) -> bool:
    """True iff the pencil has full column rank at every finite point (only N and J blocks)."""
    if p.shape[1] == 0:
        return True
    d = kcf(p, pol, structure_only=True)
    return not any(b.kind in "HKL" for b in d.blocks)


def _check_well_posed(m: NdsModel, pol: TolerancePolicy):
    for i, s in enumerate(m.subsystems):
        if not well_posed_subsystem(s, pol):
            raise NotWellPosed(f"subsystem {i + 1}: I - G P is singular")
    if not well_posed_nds(m, pol):
        raise NotWellPosed("I - Phibar A_zv is singular")


def _summaries(stages, notes_by_stage=None) -> tuple[SubsystemSummary, ...]:
    out = []
    for st in stages:
        if st.active:
            out.append(SubsystemSummary(st.index, tuple(b.label() for b in st.dec.blocks), st.dec.zeta_L, False,
                                        st.dec.warnings))
        else:
            out.append(SubsystemSummary(st.index, (), 0, True))
    return tuple(out)


def _finite_lambda_test(m: NdsModel, stages, pol: TolerancePolicy):
    """Rank test of ``X - Phibar Y`` at every point of the union of singular sets."""
    entries = [(mu, st) for st in stages if st.active for mu in st.points]
    groups = cluster_indices([mu for mu, _ in entries], CLUSTER_TOL)
    points = []
    for g in groups:
        lam0 = entries[g[0]][0]
        owners = {}
        for k in g:
            mu, st = entries[k]
            owners.setdefault(st.index, (st, mu))
        points.append((lam0, sorted(owners.values(), key=lambda t: t[0].index)))
    points.sort(key=lambda t: (abs(t[0]), t[0].real, t[0].imag))
    scm = m.scm_bar.tocsc()
    scale = _network_scale(m, stages)
    failures = []
    for lam0, owners in points:
        X, Y, layout = build_xy(m, stages, lam0, pol, owners=owners)
        T = _test_matrix(scm, X, Y)
        ncols = T.shape[1]
        r = rank_with_tolerance(T, _network_policy(pol), scale) if T.shape[0] else 0
        if r == ncols:
            continue
        if T.shape[0]:
            _, _, vh = np.linalg.svd(T, full_matrices=True)
            w = vh[-1].conj()
        else:
            w = np.zeros(ncols)
            w[0] = 1.0
        res = float(np.linalg.norm(T @ w)) if T.size else 0.0
        parts, c = [], 0
        for st, mu, K in layout:
            k = K.shape[1]
            parts.append((st, st.Vinv_s @ (K @ w[c:c + k])))
            c += k
        failures.append(Failure(lam0, r, ncols, w, _lift(m, parts), res))
    return [p for p, _ in points], failures


def _fallback_test(m: NdsModel, stages, pol: TolerancePolicy):
    P = psi_bar_pencil(m, stages)
    if P.shape[1] == 0:
        return []
    d = kcf(P, pol, structure_only=True)
    bad = [b for b in d.blocks if b.kind in "HKL"]
    if not bad:
        return []
    if any(b.kind == "L" for b in bad):
        lam0 = 1.0 + 0j
    elif any(b.kind == "K" for b in bad):
        lam0 = 0j
    else:
        lam0 = cluster_values(d.h_block.finite_eigenvalues, LOOSE_CLUSTER_TOL)[0][0]
    M0 = evaluate(P, lam0)
    r = rank_with_tolerance(M0, _network_policy(pol), P.norm() * (1 + abs(lam0)))
    _, _, vh = np.linalg.svd(M0, full_matrices=True)
    w = vh[-1].conj()
    parts, c = [], 0
    for st in stages:
        if st.active:
            s = st.dec.s
            parts.append((st, st.Vinv_s @ w[c:c + s]))
            c += s
    return [Failure(lam0, r, P.shape[1], w, _lift(m, parts), float(np.linalg.norm(M0 @ w)))]


def verify_observability(m: NdsModel, pol: TolerancePolicy = DEFAULT_POLICY, threads: int = 1,
                         use_E: bool = True) -> VerificationReport:
    """Decide observability of the network.

    With ``use_E`` (the default) descriptor subsystems contribute ``E``
    in place of the identity, which turns this into the finite-point condition
    of complete observability.
    """
    timings = {}
    t0 = time.perf_counter()
    _check_well_posed(m, pol)
    t1 = time.perf_counter()
    timings["well_posedness"] = t1 - t0
    m.augmented, m.scm_bar  # noqa: B018 - warm the caches inside the timed stage
    stages, notes = prepare(m, pol, threads, use_E)
    t2 = time.perf_counter()
    timings["subsystems"] = t2 - t1
    summaries = _summaries(stages)
    active = [st for st in stages if st.active]
    if not active:
        return VerificationReport(True, "trivially_observable", [], (), summaries, timings, tuple(notes))
    if any(st.points is ALL_OF_C for st in active):
        with warnings.catch_warnings(record=True) as caught:
            warnings.simplefilter("always", IllConditioned)
            failures = _fallback_test(m, stages, pol)
        notes += [str(w.message) for w in caught]
        timings["network_test"] = time.perf_counter() - t2
        return VerificationReport(not failures, "fallback_full_pencil", ALL_OF_C, tuple(failures), summaries,
                                  timings, tuple(dict.fromkeys(notes)))
    lam_set, failures = _finite_lambda_test(m, stages, pol)
    timings["network_test"] = time.perf_counter() - t2
    return VerificationReport(not failures, "finite_lambda", lam_set, tuple(failures), summaries, timings,
                              tuple(dict.fromkeys(notes)))


def verify_controllability(m: NdsModel, pol: TolerancePolicy = DEFAULT_POLICY, threads: int = 1,
                           use_E: bool = True) -> VerificationReport:
    rep = verify_observability(dualize(m), pol, threads, use_E)
    mode = "trivially_controllable" if rep.mode == "trivially_observable" else rep.mode
    return replace(rep, mode=mode, prop="controllability")


def replay_witnesses(m: NdsModel, rep: VerificationReport, use_E: bool = True) -> list[float]:
    """Relative residuals of every failure witness in the network pencil of ``m``.

    For a controllability report the witnesses live in the dual model.
    """
    target = dualize(m) if rep.prop == "controllability" else m
    return [witness_residual(target, f.lam, f.lifted, use_E) for f in rep.failures]


# ---------------------------------------------------------------- lumped oracle

# defective eigenvalues of order k scatter by about eps**(1/k); the oracle
# tests the means of clusters formed at each of these relative tolerances
PBH_CLUSTER_LEVELS = (LOOSE_CLUSTER_TOL, 1e-4, 1e-3)
# a passing smallest singular value below this fraction of the largest is flagged
PBH_GRAY_ZONE = 1e-6


def _pbh(A: np.ndarray, C: np.ndarray, pol: TolerancePolicy) -> tuple[bool, bool]:
    """(observable, ambiguous) for the pair ``(A, C)`` by the eigenvalue rank test.

    Extra test points never produce a false rank drop, so coarse cluster
    means are added to catch scattered defective eigenvalues.
    """
    n = A.shape[0]
    if n == 0:
        return True, False
    eig = sla.eigvals(A)
    points = {}
    for level in PBH_CLUSTER_LEVELS:
        for mu, _ in cluster_values(eig, level):
            points.setdefault((mu.real, mu.imag), mu)
    ambiguous = False
    for mu in points.values():
        M = np.vstack([mu * np.eye(n) - A, C.astype(complex)]) if mu.imag else np.vstack([mu.real * np.eye(n) - A, C])
        s = singular_values(M)
        tol = pol.threshold(M.shape, s[0])
        if s[-1] <= tol:
            return False, ambiguous
        if s[-1] < PBH_GRAY_ZONE * s[0]:
            ambiguous = True
    return True, ambiguous


def _lumped_state_space(m: NdsModel):
    if m.has_descriptor:
        raise UnsupportedByOracle("descriptor subsystems need the descriptor oracle")
    if not well_posed_nds(m):
        raise NotWellPosed("I - Phibar A_zv is singular")
    return lump(m)


def pbh_oracle_detail(m: NdsModel, pol: TolerancePolicy = DEFAULT_POLICY, controllability: bool = False):
    """(verdict, ambiguous) of the lumped rank test.

    ``ambiguous`` marks a smallest singular value that passed the threshold
    but sits below ``PBH_GRAY_ZONE`` of the largest one.
    """
    _, A, B, C, _ = _lumped_state_space(m)
    if controllability:
        return _pbh(A.T, B.T, pol)
    return _pbh(A, C, pol)


def pbh_oracle(m: NdsModel, pol: TolerancePolicy = DEFAULT_POLICY) -> bool:
    """Lumped eigenvalue rank test for observability (state-space models only)."""
    return pbh_oracle_detail(m, pol)[0]


def pbh_controllability_oracle(m: NdsModel, pol: TolerancePolicy = DEFAULT_POLICY) -> bool:
    return pbh_oracle_detail(m, pol, controllability=True)[0]
