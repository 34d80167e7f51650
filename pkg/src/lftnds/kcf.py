"""Numerical Kronecker canonical form.

The pencil is split by four orthogonal column staircases, each isolating
one part of the structure:

1. kernel chase of ``H`` (eigenvalue zero): ``[L + K | rest]``
2. kernel chase of ``G`` on the first part: ``[L | K]``
3. kernel chase of ``G`` on the rest (eigenvalue infinity): ``[N | H + J]``
4. kernel chase of ``G^T`` on the transposed remainder: ``[J | H]``

Every rank decision uses the norm of the whole input pencil as reference.
After each split the off-diagonal coupling is removed by solving a
generalized Sylvester equation, and each homogeneous piece is brought to its
exact canonical form (minimal polynomial bases for L/J, nilpotent Jordan
chains for K/N).  The strictly regular part is left as computed; only its
eigenvalues are exposed.
"""
from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg as sla

from .errors import IllConditioned, StructureMismatch
from .numeric import DEFAULT_POLICY, TolerancePolicy, null_space_of_dim
from .pencil import (CLUSTER_TOL, CanonicalBlock, MatrixPencil, block_diag_pencil, cluster_values,
                     eigen_clusters, evaluate, minimal_index_counts)

COND_LIMIT = 1e8
# staircase rank decisions tolerate this multiple of the policy threshold: transformed
# inputs carry rounding amplified by the conditioning of whatever produced them
STAIRCASE_SLACK = 1e4
_ORDER = {"H": 0, "K": 1, "L": 2, "N": 3, "J": 4}


class AllOfComplexPlane:
    """Marker for a singular set equal to the whole complex plane."""

    def __repr__(self):
        return "AllOfComplexPlane"

    def __eq__(self, other):
        return isinstance(other, AllOfComplexPlane)

    def __hash__(self):
        return hash("AllOfComplexPlane")


ALL_OF_C = AllOfComplexPlane()


@dataclass(frozen=True, eq=False)
class KcfDecomposition:
    """``pencil = U @ Xi(lambda) @ V`` with ``Xi`` the block-diagonal canonical pencil.

    In structure-only mode ``U`` and ``V`` are ``None`` and only the block
    list is meaningful.
    """

    blocks: tuple[CanonicalBlock, ...]
    U: np.ndarray | None
    V: np.ndarray | None
    s: int
    residual: float
    shape: tuple[int, int]
    warnings: tuple[str, ...] = ()
    _vinv: list = field(default_factory=list, repr=False)

    def count(self, kind: str) -> int:
        return sum(1 for b in self.blocks if b.kind == kind)

    def sizes(self, kind: str) -> list[int]:
        return [b.size for b in self.blocks if b.kind == kind]

    @property
    def zeta_L(self) -> int:
        return self.count("L")

    @property
    def zeta_J(self) -> int:
        return self.count("J")

    @property
    def h_block(self) -> CanonicalBlock | None:
        return next((b for b in self.blocks if b.kind == "H"), None)

    @property
    def eigenvalues(self) -> tuple[complex, ...]:
        b = self.h_block
        return () if b is None else b.finite_eigenvalues

    def xi(self) -> MatrixPencil:
        return block_diag_pencil(self.blocks)

    def xi_bar(self) -> MatrixPencil:
        """The H/K/L part of ``Xi``: its first ``s`` columns and matching rows."""
        return block_diag_pencil([b for b in self.blocks if b.kind in "HKL"])

    @property
    def V_inv(self) -> np.ndarray:
        if self.V is None:
            raise StructureMismatch("structure-only decomposition has no transformations")
        if not self._vinv:
            self._vinv.append(np.linalg.inv(self.V))
        return self._vinv[0]

    def summary(self) -> dict:
        return {
            "blocks": [b.label() for b in self.blocks],
            "eigenvalues": [[float(e.real), float(e.imag)] for e in self.eigenvalues],
            "s": self.s,
            "zeta_L": self.zeta_L,
            "zeta_J": self.zeta_J,
        }


@dataclass
class _Ctx:
    pol: TolerancePolicy
    scale: float
    canonical: bool
    notes: list[str]

    def rank(self, s: np.ndarray, shape: tuple[int, int]) -> int:
        """Rank from singular values against the whole-pencil scale; notes close calls."""
        if s.size == 0:
            return 0
        tol = self.pol.threshold(shape, self.scale) * STAIRCASE_SLACK
        r = int(np.sum(s > tol))
        if tol > 0:
            kept_close = r > 0 and s[r - 1] < 10 * tol
            dropped_close = r < s.size and s[r] > tol / 10 and s[r] > 0
            if kept_close or dropped_close:
                self.notes.append(f"rank decision within a decade of the threshold ({tol:.2e})")
        return r


def _staircase(A: np.ndarray, B: np.ndarray, ctx: _Ctx):
    """Column staircase on the kernel of ``A`` with row compression of ``B``.

    Returns ``Q, Z, A', B', r, c, nus, mus`` with ``Q A Z = A'`` and
    ``Q B Z = B'`` block upper triangular; the leading ``r x c`` block holds
    the right singular structure and the eigenvalue at the kernel point.
    """
    A = A.copy()
    B = B.copy()
    m, n = A.shape
    Q = np.eye(m)
    Z = np.eye(n)
    r0 = c0 = 0
    nus: list[int] = []
    mus: list[int] = []
    while c0 < n:
        sub = A[r0:, c0:]
        ncols = n - c0
        if sub.shape[0] == 0:
            rank = 0
            vh = np.eye(ncols)
        else:
            _, s, vh = np.linalg.svd(sub, full_matrices=True)
            rank = ctx.rank(s, sub.shape)
        nu = ncols - rank
        if nu == 0:
            break
        W = np.hstack([vh[rank:].T, vh[:rank].T])
        A[:, c0:] = A[:, c0:] @ W
        B[:, c0:] = B[:, c0:] @ W
        Z[:, c0:] = Z[:, c0:] @ W
        A[r0:, c0:c0 + nu] = 0.0
        blk = B[r0:, c0:c0 + nu]
        if blk.shape[0] == 0:
            mu = 0
        else:
            u, s2, _ = np.linalg.svd(blk, full_matrices=True)
            mu = ctx.rank(s2, blk.shape)
            A[r0:, :] = u.T @ A[r0:, :]
            B[r0:, :] = u.T @ B[r0:, :]
            Q[r0:, :] = u.T @ Q[r0:, :]
            B[r0 + mu:, c0:c0 + nu] = 0.0
        nus.append(nu)
        mus.append(mu)
        r0 += mu
        c0 += nu
        if mu == 0:
            break
    return Q, Z, A, B, r0, c0, nus, mus


def _right_sizes(nus, mus) -> tuple[list[int], list[int]]:
    """(L-block sizes, Jordan block sizes at the staircase point) from staircase dimensions."""
    L, jordan = [], []
    for k in range(len(nus)):
        L += [k] * (nus[k] - mus[k])
        nxt = nus[k + 1] if k + 1 < len(nus) else 0
        jordan += [k + 1] * (mus[k] - nxt)
    return L, jordan


def _sylvester(G: np.ndarray, H: np.ndarray, r: int, c: int, ctx: _Ctx):
    """X, Y with ``A11 Y + X A22 = -A12`` for both parts of the pencil."""
    m, n = G.shape
    m2, n2 = m - r, n - c
    if r == 0 or n2 == 0 or (c == 0 and m2 == 0):
        return np.zeros((r, m2)), np.zeros((c, n2))
    rows = []
    rhs = []
    for M in (G, H):
        A11, A12, A22 = M[:r, :c], M[:r, c:], M[r:, c:]
        rows.append(np.hstack([np.kron(np.eye(n2), A11), np.kron(A22.T, np.eye(r))]))
        rhs.append(-A12.reshape(-1, order="F"))
    K = np.vstack(rows)
    b = np.concatenate(rhs)
    sol = np.linalg.lstsq(K, b, rcond=None)[0]
    res = np.linalg.norm(K @ sol - b)
    if res > 1e-8 * max(1.0, ctx.scale) * max(1.0, np.linalg.norm(sol)):
        ctx.notes.append(f"decoupling equation solved with residual {res:.2e}")
    Y = sol[:c * n2].reshape((c, n2), order="F")
    X = sol[c * n2:].reshape((r, m2), order="F")
    return X, Y


def _split(G: np.ndarray, H: np.ndarray, at_infinity: bool, ctx: _Ctx):
    """Staircase split into leading/trailing pencils plus the transforms relating them.

    Returns ``(P1, P2, Uadd, Vadd, nus, mus)`` with
    ``(G, H) = Uadd diag(P1, P2) Vadd`` (transforms are ``None`` in
    structure-only mode).
    """
    A, B = (G, H) if at_infinity else (H, G)
    Q, Z, A2, B2, r, c, nus, mus = _staircase(A, B, ctx)
    G2, H2 = (A2, B2) if at_infinity else (B2, A2)
    P1 = (G2[:r, :c], H2[:r, :c])
    P2 = (G2[r:, c:], H2[r:, c:])
    if not ctx.canonical:
        return P1, P2, None, None, nus, mus
    m, n = G.shape
    X, Y = _sylvester(G2, H2, r, c, ctx)
    Linv = np.eye(m)
    Linv[:r, r:] = -X
    Rinv = np.eye(n)
    Rinv[:c, c:] = -Y
    return P1, P2, Q.T @ Linv, Rinv @ Z.T, nus, mus


def _complement_directions(Z: np.ndarray, S: np.ndarray, count: int) -> np.ndarray:
    """``count`` orthonormal directions of span(Z) farthest from span(S)."""
    if S.shape[1]:
        q, _ = np.linalg.qr(S)
        Z = Z - q @ (q.T @ Z)
    u, _, _ = np.linalg.svd(Z, full_matrices=False)
    return u[:, :count]


def _canon_L(G: np.ndarray, H: np.ndarray, sizes: list[int]):
    """``U, V`` with ``(G, H) = U diag(L_m) V``, blocks in ascending size order."""
    p, q = G.shape
    sizes = sorted(sizes)
    found: list[tuple[int, np.ndarray]] = []  # (degree, coefficients q x (d+1))
    for d in sorted(set(sizes)):
        cnt = sizes.count(d)
        # block Toeplitz: H x_0 = 0, G x_{j-1} + H x_j = 0, G x_d = 0
        T = np.zeros((p * (d + 2), q * (d + 1)))
        for j in range(d + 1):
            T[p * j:p * (j + 1), q * j:q * (j + 1)] = H
            T[p * (j + 1):p * (j + 2), q * j:q * (j + 1)] = G
        kdim = sum((d - e + 1) for e in sizes if e <= d)
        Zk = null_space_of_dim(T, kdim)
        shifts = []
        for e, x in found:
            for k in range(d - e + 1):
                v = np.zeros(q * (d + 1))
                v[q * k:q * (k + e + 1)] = x.reshape(-1, order="F")
                shifts.append(v)
        S = np.array(shifts).T if shifts else np.zeros((q * (d + 1), 0))
        new = _complement_directions(Zk, S, cnt)
        for i in range(cnt):
            found.append((d, new[:, i].reshape((q, d + 1), order="F")))
    Vinv_cols, U_cols = [], []
    for d, x in found:
        v = x * ((-1.0) ** np.arange(d + 1))
        Vinv_cols.append(v)
        U_cols.append(G @ v[:, :d])
    Vinv = np.hstack(Vinv_cols) if Vinv_cols else np.zeros((q, 0))
    U = np.hstack(U_cols) if U_cols else np.zeros((p, 0))
    return U, np.linalg.inv(Vinv) if q else np.zeros((0, 0)), [d for d, _ in found]


def _nilpotent_chains(T: np.ndarray, sizes: list[int]) -> np.ndarray:
    """``W`` with ``W^{-1} T W = diag(S_m)`` (ones on the superdiagonal), ascending sizes."""
    n = T.shape[0]
    if n == 0:
        return np.zeros((0, 0))
    top = max(sizes)
    powers = [np.eye(n)]
    for _ in range(top):
        powers.append(T @ powers[-1])
    kers = [np.zeros((n, 0))]
    for k in range(1, top + 1):
        kers.append(null_space_of_dim(powers[k], sum(min(m, k) for m in sizes)))
    chains: list[tuple[int, np.ndarray]] = []
    for m in range(top, 0, -1):
        cnt = sizes.count(m)
        if cnt == 0:
            continue
        level = [powers[M - m] @ t for M, t in chains]
        S = np.column_stack([kers[m - 1]] + level) if level else kers[m - 1]
        new = _complement_directions(kers[m], S, cnt)
        for i in range(cnt):
            chains.append((m, new[:, i]))
    cols = []
    for m, t in sorted(chains, key=lambda c: c[0]):
        cols.append(np.column_stack([powers[m - j] @ t for j in range(1, m + 1)]))
    return np.hstack(cols)


def _hreg_block(G: np.ndarray, H: np.ndarray, ctx: _Ctx) -> CanonicalBlock | None:
    n = G.shape[0]
    if n == 0:
        return None
    eig = sla.eigvals(-H, G)
    if not np.all(np.isfinite(eig)):
        ctx.notes.append("regular part has numerically infinite eigenvalues")
        eig = np.where(np.isfinite(eig), eig, 0.0)
    eig = sorted((complex(e) for e in eig), key=lambda e: (abs(e), e.real, e.imag))
    return CanonicalBlock("H", n, tuple(eig), MatrixPencil(G.copy(), H.copy()))


def _recount(sizes: list[int], dim: int, G: np.ndarray, H: np.ndarray, at_infinity: bool, ctx: _Ctx) -> list[int]:
    """Jordan sizes of a square piece, re-derived if the inherited counts do not fit."""
    if sum(sizes) == dim:
        return sizes
    ctx.notes.append("inherited block sizes inconsistent; recounting on the isolated piece")
    A, B = (G, H) if at_infinity else (H, G)
    *_, nus, mus = _staircase(A, B, ctx)
    _, jordan = _right_sizes(nus, mus)
    if sum(jordan) != dim:
        raise StructureMismatch("could not resolve the Jordan structure of a regular piece")
    return jordan


def kcf(p: MatrixPencil, pol: TolerancePolicy = DEFAULT_POLICY, *, structure_only: bool = False) -> KcfDecomposition:
    """Kronecker canonical form of a real pencil.

    Blocks are returned in the order H, K, L, N, J (ascending sizes within a
    kind).  ``structure_only`` skips decoupling and canonicalization, which is
    enough when only the block list or eigenvalues are needed.
    """
    G = np.asarray(p.G, dtype=float)
    H = np.asarray(p.H, dtype=float)
    m, n = G.shape
    ctx = _Ctx(pol, p.norm(), not structure_only, [])

    LK, R, U1, V1, nA, mA = _split(G, H, at_infinity=False, ctx=ctx)
    L_from_zero, K_sizes = _right_sizes(nA, mA)
    Lp, Kp, U2, V2, nB, mB = _split(*LK, at_infinity=True, ctx=ctx)
    L_sizes, stray_inf = _right_sizes(nB, mB)
    Np, HJ, U3, V3, nC, mC = _split(*R, at_infinity=True, ctx=ctx)
    stray_L, N_sizes = _right_sizes(nC, mC)
    Jt, Ht, U4, V4, nD, mD = _split(HJ[0].T, HJ[1].T, at_infinity=True, ctx=ctx)
    J_sizes, stray_inf2 = _right_sizes(nD, mD)

    if sorted(L_from_zero) != sorted(L_sizes) or stray_inf or stray_L or stray_inf2:
        ctx.notes.append("staircase passes disagree on the singular structure")
    K_sizes = _recount(K_sizes, Kp[0].shape[0], *Kp, at_infinity=False, ctx=ctx)
    N_sizes = _recount(N_sizes, Np[0].shape[0], *Np, at_infinity=True, ctx=ctx)
    if Kp[0].shape[0] != Kp[0].shape[1] or Np[0].shape[0] != Np[0].shape[1] or Ht[0].shape[0] != Ht[0].shape[1]:
        raise StructureMismatch("regular pieces came out non-square")
    Hg, Hh = Ht[0].T, Ht[1].T
    hblock = _hreg_block(Hg, Hh, ctx)

    blocks = ([hblock] if hblock else []) + [CanonicalBlock("K", k) for k in sorted(K_sizes)] \
        + [CanonicalBlock("L", k) for k in sorted(L_sizes)] + [CanonicalBlock("N", k) for k in sorted(N_sizes)] \
        + [CanonicalBlock("J", k) for k in sorted(J_sizes)]
    s = sum(b.shape[1] for b in blocks if b.kind in "HKL")

    if structure_only:
        return _finish(blocks, None, None, s, np.nan, (m, n), ctx)

    UL, VL, _ = _canon_L(*Lp, L_sizes)
    UJt, VJt, _ = _canon_L(*Jt, J_sizes)
    UJ, VJ = VJt.T, UJt.T
    Wk = _nilpotent_chains(np.linalg.solve(Kp[0], Kp[1]) if Kp[0].size else Kp[0], sorted(K_sizes))
    UK, VK = Kp[0] @ Wk, np.linalg.inv(Wk) if Wk.size else Wk
    Wn = _nilpotent_chains(np.linalg.solve(Np[1], Np[0]) if Np[0].size else Np[0], sorted(N_sizes))
    UN, VN = Np[1] @ Wn, np.linalg.inv(Wn) if Wn.size else Wn

    bd = sla.block_diag
    nh = Hg.shape[0]
    # order inside the nest: L, K | N, (J, H)
    U_hj = V4.T @ bd(UJ, np.eye(nh))
    V_hj = bd(VJ, np.eye(nh)) @ U4.T
    U = U1 @ bd(U2 @ bd(UL, UK), U3 @ bd(UN, U_hj))
    V = bd(bd(VL, VK) @ V2, bd(VN, V_hj) @ V3) @ V1

    def dims(kind_sizes, kind):
        return [CanonicalBlock(kind, k).shape for k in sorted(kind_sizes)]

    nest = [("L", d) for d in dims(L_sizes, "L")] + [("K", d) for d in dims(K_sizes, "K")] \
        + [("N", d) for d in dims(N_sizes, "N")] + [("J", d) for d in dims(J_sizes, "J")] \
        + ([("H", (nh, nh))] if nh else [])
    rows_of, cols_of = {k: [] for k in _ORDER}, {k: [] for k in _ORDER}
    r = c = 0
    for kind, (a, b) in nest:
        rows_of[kind] += list(range(r, r + a))
        cols_of[kind] += list(range(c, c + b))
        r += a
        c += b
    perm_r = [i for k in "HKLNJ" for i in rows_of[k]]
    perm_c = [j for k in "HKLNJ" for j in cols_of[k]]
    U = U[:, perm_r]
    V = V[perm_c, :]
    Xi = block_diag_pencil(blocks)
    residual = float(max(np.linalg.norm(U @ Xi.G @ V - G), np.linalg.norm(U @ Xi.H @ V - H))) if G.size else 0.0
    for name, M in (("U", U), ("V", V)):
        if M.size and np.linalg.cond(M) > COND_LIMIT:
            ctx.notes.append(f"{name} has condition number above {COND_LIMIT:.0e}")
    return _finish(blocks, U, V, s, residual, (m, n), ctx)


def _finish(blocks, U, V, s, residual, shape, ctx: _Ctx) -> KcfDecomposition:
    notes = tuple(dict.fromkeys(ctx.notes))
    for note in notes:
        warnings.warn(note, IllConditioned, stacklevel=3)
    return KcfDecomposition(tuple(blocks), U, V, s, residual, shape, notes)


def block_dims(blocks) -> tuple[int, int]:
    return sum(b.shape[0] for b in blocks), sum(b.shape[1] for b in blocks)


def verify_kcf(p: MatrixPencil, d: KcfDecomposition, pol: TolerancePolicy = DEFAULT_POLICY,
               rng: np.random.Generator | None = None) -> float:
    """Largest ``||U Xi(l) V - P(l)|| / (1 + |l|)`` over five random points.

    Raises :class:`StructureMismatch` when block dimensions or the L/J block
    counts disagree with the pencil.
    """
    if block_dims(d.blocks) != p.shape:
        raise StructureMismatch(f"blocks span {block_dims(d.blocks)}, pencil is {p.shape}")
    rng = np.random.default_rng(0) if rng is None else rng
    if minimal_index_counts(p, pol, rng=rng) != (d.zeta_L, d.zeta_J):
        raise StructureMismatch("L/J block counts disagree with the pencil's normal rank")
    if d.U is None:
        raise StructureMismatch("structure-only decomposition cannot be replayed")
    Xi = d.xi()
    worst = 0.0
    for lam in rng.standard_normal(5) + 1j * rng.standard_normal(5):
        diff = d.U @ evaluate(Xi, lam) @ d.V - evaluate(p, lam)
        worst = max(worst, float(np.linalg.norm(diff, 2)) / (1 + abs(lam)) if diff.size else 0.0)
    return worst


def lambda_singular_set(d: KcfDecomposition):
    """Points where the H/K/L part loses column rank.

    Returns :data:`ALL_OF_C` if any L block is present, else a sorted list of
    distinct complex points (0 for K blocks plus the regular eigenvalues).
    """
    if d.zeta_L:
        return ALL_OF_C
    pts = [0j] if d.count("K") else []
    h = d.h_block
    if h is not None:
        pts += [mean for mean, _ in eigen_clusters(h)]
    return [mean for mean, _ in cluster_values(pts, CLUSTER_TOL)]
