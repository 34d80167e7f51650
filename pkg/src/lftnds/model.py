"""Networked-system data model.

A subsystem is stored in its raw LFT form (nominal blocks plus the factors
``H, F, G`` and the parameter matrix ``P``).  :func:`augment` rewrites it with
auxiliary internal channels so that all parameters move into the augmented
connection matrix built by :func:`build_augmented_scm`; every verification
routine works on that augmented representation.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property
from typing import Iterable, Sequence

import numpy as np
import scipy.sparse as sp

from .errors import InvalidModel, InvalidParameter, NotWellPosed
from .numeric import DEFAULT_POLICY, TolerancePolicy, singular_values

_NOMINAL = ("A0_xx", "A0_xv", "A0_zx", "A0_zv", "B0_x", "B0_z", "C0_x", "C0_v", "D0")
_LFT = ("H1", "H2", "H3", "F1", "F2", "F3", "G", "P")


def _mat(a, shape: tuple[int, int], name: str) -> np.ndarray:
    if a is None:
        return np.zeros(shape)
    A = np.asarray(a, dtype=float)
    if A.size == 0:
        A = A.reshape(shape) if A.size == 0 and 0 in shape else A
    if A.ndim != 2 or A.shape != shape:
        raise InvalidModel(f"{name}: expected shape {shape}, got {A.shape}")
    if not np.all(np.isfinite(A)):
        raise InvalidModel(f"{name}: non-finite entries")
    return A


def _dim(*candidates) -> int:
    for c in candidates:
        if c is not None:
            return int(c)
    return 0


def _shape_of(a, axis):
    if a is None:
        return None
    A = np.asarray(a)
    if A.ndim != 2:
        raise InvalidModel(f"blocks must be 2-D, got shape {A.shape}")
    return A.shape[axis]


@dataclass(frozen=True, eq=False)
class LftSubsystem:
    """Raw subsystem data.

    The effective system matrices are the nominal blocks plus
    ``col{H1,H2,H3} P (I - G P)^{-1} [F1 F2 F3]``.  Missing blocks are zero,
    missing LFT factors mean an empty parameter part.  ``E0`` (square,
    ``m_x x m_x``) marks a descriptor subsystem; ``None`` means identity.
    """

    A0_xx: np.ndarray
    A0_xv: np.ndarray
    A0_zx: np.ndarray
    A0_zv: np.ndarray
    B0_x: np.ndarray
    B0_z: np.ndarray
    C0_x: np.ndarray
    C0_v: np.ndarray
    D0: np.ndarray
    H1: np.ndarray
    H2: np.ndarray
    H3: np.ndarray
    F1: np.ndarray
    F2: np.ndarray
    F3: np.ndarray
    G: np.ndarray
    P: np.ndarray
    E0: np.ndarray | None = None

    @classmethod
    def build(cls, A_xx, A_xv=None, A_zx=None, A_zv=None, B_x=None, B_z=None,
              C_x=None, C_v=None, D=None, H1=None, H2=None, H3=None, F1=None,
              F2=None, F3=None, G=None, P=None, E=None, *, m_v=None, m_z=None,
              m_u=None, m_y=None, n_pin=None, n_pout=None) -> "LftSubsystem":
        """Build a subsystem, inferring dimensions from whichever blocks are given.

        ``n_pin``/``n_pout`` are the parameter matrix's column/row counts
        (auxiliary internal output/input sizes).
        """
        A_xx = np.atleast_2d(np.asarray(A_xx, dtype=float))
        m_x = A_xx.shape[0] if A_xx.size else _dim(_shape_of(A_xx, 0))
        m_v = _dim(m_v, _shape_of(A_xv, 1), _shape_of(A_zv, 1), _shape_of(C_v, 1), _shape_of(F2, 1))
        m_z = _dim(m_z, _shape_of(A_zx, 0), _shape_of(A_zv, 0), _shape_of(B_z, 0), _shape_of(H2, 0))
        m_u = _dim(m_u, _shape_of(B_x, 1), _shape_of(B_z, 1), _shape_of(D, 1), _shape_of(F3, 1))
        m_y = _dim(m_y, _shape_of(C_x, 0), _shape_of(C_v, 0), _shape_of(D, 0), _shape_of(H3, 0))
        n_pout = _dim(n_pout, _shape_of(P, 0), _shape_of(H1, 1), _shape_of(H2, 1), _shape_of(H3, 1), _shape_of(G, 1))
        n_pin = _dim(n_pin, _shape_of(P, 1), _shape_of(F1, 0), _shape_of(F2, 0), _shape_of(F3, 0), _shape_of(G, 0))
        if A_xx.size == 0:
            A_xx = np.zeros((m_x, m_x))
        return cls(
            A0_xx=_mat(A_xx, (m_x, m_x), "A_xx"),
            A0_xv=_mat(A_xv, (m_x, m_v), "A_xv"),
            A0_zx=_mat(A_zx, (m_z, m_x), "A_zx"),
            A0_zv=_mat(A_zv, (m_z, m_v), "A_zv"),
            B0_x=_mat(B_x, (m_x, m_u), "B_x"),
            B0_z=_mat(B_z, (m_z, m_u), "B_z"),
            C0_x=_mat(C_x, (m_y, m_x), "C_x"),
            C0_v=_mat(C_v, (m_y, m_v), "C_v"),
            D0=_mat(D, (m_y, m_u), "D"),
            H1=_mat(H1, (m_x, n_pout), "H1"),
            H2=_mat(H2, (m_z, n_pout), "H2"),
            H3=_mat(H3, (m_y, n_pout), "H3"),
            F1=_mat(F1, (n_pin, m_x), "F1"),
            F2=_mat(F2, (n_pin, m_v), "F2"),
            F3=_mat(F3, (n_pin, m_u), "F3"),
            G=_mat(G, (n_pin, n_pout), "G"),
            P=_mat(P, (n_pout, n_pin), "P"),
            E0=None if E is None else _mat(E, (m_x, m_x), "E"),
        )

    def __post_init__(self):
        m_x, m_v, m_z = self.m_x, self.m_v, self.m_z
        m_u, m_y = self.m_u, self.m_y
        n_pout, n_pin = self.P.shape
        expected = {
            "A0_xx": (m_x, m_x), "A0_xv": (m_x, m_v), "A0_zx": (m_z, m_x),
            "A0_zv": (m_z, m_v), "B0_x": (m_x, m_u), "B0_z": (m_z, m_u),
            "C0_x": (m_y, m_x), "C0_v": (m_y, m_v), "D0": (m_y, m_u),
            "H1": (m_x, n_pout), "H2": (m_z, n_pout), "H3": (m_y, n_pout),
            "F1": (n_pin, m_x), "F2": (n_pin, m_v), "F3": (n_pin, m_u),
            "G": (n_pin, n_pout),
        }
        for name, shape in expected.items():
            if getattr(self, name).shape != shape:
                raise InvalidModel(f"{name}: expected shape {shape}, got {getattr(self, name).shape}")
        if self.E0 is not None and self.E0.shape != (m_x, m_x):
            raise InvalidModel(f"E0 must be {m_x}x{m_x}, got {self.E0.shape}")

    m_x = property(lambda self: self.A0_xx.shape[0])
    m_v = property(lambda self: self.A0_xv.shape[1])
    m_z = property(lambda self: self.A0_zx.shape[0])
    m_u = property(lambda self: self.B0_x.shape[1])
    m_y = property(lambda self: self.C0_x.shape[0])

    @property
    def is_descriptor(self) -> bool:
        return self.E0 is not None


@dataclass(frozen=True, eq=False)
class AugmentedSubsystem:
    A_xx: np.ndarray
    A_xv: np.ndarray
    A_zx: np.ndarray
    A_zv: np.ndarray
    B_x: np.ndarray
    B_z: np.ndarray
    C_x: np.ndarray
    C_v: np.ndarray
    D: np.ndarray
    E: np.ndarray | None = None

    m_x = property(lambda self: self.A_xx.shape[0])
    m_vbar = property(lambda self: self.A_xv.shape[1])
    m_zbar = property(lambda self: self.A_zx.shape[0])
    m_u = property(lambda self: self.B_x.shape[1])
    m_y = property(lambda self: self.C_x.shape[0])

    @property
    def E_or_identity(self) -> np.ndarray:
        return np.eye(self.m_x) if self.E is None else self.E


def well_posed_subsystem(s: LftSubsystem, pol: TolerancePolicy = DEFAULT_POLICY) -> bool:
    """True iff ``I - G P`` is invertible under the tolerance policy."""
    n = s.G.shape[0]
    if n == 0:
        return True
    M = np.eye(n) - s.G @ s.P
    sv = singular_values(M)
    return bool(sv[-1] > pol.threshold(M.shape, sv[0]))


def augment(s: LftSubsystem) -> AugmentedSubsystem:
    """Move the parameter part into auxiliary internal channels.

    Purely structural: ``I - G P`` is never inverted.
    """
    return AugmentedSubsystem(
        A_xx=s.A0_xx.copy(),
        A_xv=np.hstack([s.A0_xv, s.H1]),
        A_zx=np.vstack([s.A0_zx, s.F1]),
        A_zv=np.block([[s.A0_zv, s.H2], [s.F2, s.G]]),
        B_x=s.B0_x.copy(),
        B_z=np.vstack([s.B0_z, s.F3]),
        C_x=s.C0_x.copy(),
        C_v=np.hstack([s.C0_v, s.H3]),
        D=s.D0.copy(),
        E=None if s.E0 is None else s.E0.copy(),
    )


def evaluate_lft(s: LftSubsystem) -> dict[str, np.ndarray]:
    """Effective system matrices with the parameter loop closed.

    Raises :class:`NotWellPosed` when ``I - G P`` is singular.
    """
    n_pin = s.G.shape[0]
    out = {k: getattr(s, k.replace("A_", "A0_").replace("B_", "B0_").replace("C_", "C0_")) if k != "D" else s.D0
           for k in ("A_xx", "A_xv", "A_zx", "A_zv", "B_x", "B_z", "C_x", "C_v", "D")}
    if n_pin == 0 or s.P.shape[0] == 0:
        return {k: v.copy() for k, v in out.items()}
    try:
        K = s.P @ np.linalg.solve(np.eye(n_pin) - s.G @ s.P, np.eye(n_pin))
    except np.linalg.LinAlgError as exc:
        raise NotWellPosed("I - G P is singular") from exc
    Hs = {"x": s.H1, "z": s.H2, "y": s.H3}
    Fs = {"x": s.F1, "v": s.F2, "u": s.F3}
    names = {("x", "x"): "A_xx", ("x", "v"): "A_xv", ("x", "u"): "B_x",
             ("z", "x"): "A_zx", ("z", "v"): "A_zv", ("z", "u"): "B_z",
             ("y", "x"): "C_x", ("y", "v"): "C_v", ("y", "u"): "D"}
    return {name: out[name] + Hs[r] @ K @ Fs[c] for (r, c), name in names.items()}


def block_diag(blocks: Sequence[np.ndarray], dtype=float) -> np.ndarray:
    """Dense block diagonal that respects zero-size blocks."""
    rows = sum(b.shape[0] for b in blocks)
    cols = sum(b.shape[1] for b in blocks)
    out = np.zeros((rows, cols), dtype=np.result_type(dtype, *[b.dtype for b in blocks]) if blocks else dtype)
    r = c = 0
    for b in blocks:
        out[r:r + b.shape[0], c:c + b.shape[1]] = b
        r += b.shape[0]
        c += b.shape[1]
    return out


def offsets(sizes: Iterable[int]) -> np.ndarray:
    return np.concatenate([[0], np.cumsum(list(sizes), dtype=int)]).astype(int)


# below this many internal channels the augmented SCM is densified
DENSE_CHANNEL_LIMIT = 64


@dataclass(frozen=True, eq=False)
class NdsModel:
    """Ordered subsystems plus the subsystem connection matrix ``scm``.

    ``scm`` maps the stacked internal outputs ``z`` to the stacked internal
    inputs ``v`` and is stored sparse (CSR).
    """

    subsystems: tuple[LftSubsystem, ...]
    scm: sp.csr_array = field(repr=False)

    def __init__(self, subsystems: Sequence[LftSubsystem], scm):
        subs = tuple(subsystems)
        if not subs:
            raise InvalidModel("a model needs at least one subsystem")
        M_v = sum(s.m_v for s in subs)
        M_z = sum(s.m_z for s in subs)
        if sp.issparse(scm):
            S = sp.csr_array(scm, dtype=float)
        else:
            A = np.asarray(scm, dtype=float)
            if A.size == 0:
                A = A.reshape(M_v, M_z)
            S = sp.csr_array(A)
        if S.shape != (M_v, M_z):
            raise InvalidModel(f"SCM must be {M_v}x{M_z} (sum m_v x sum m_z), got {S.shape}")
        if S.nnz and not np.all(np.isfinite(S.data)):
            raise InvalidModel("SCM has non-finite entries")
        S.eliminate_zeros()
        object.__setattr__(self, "subsystems", subs)
        object.__setattr__(self, "scm", S)

    @property
    def N(self) -> int:
        return len(self.subsystems)

    @cached_property
    def augmented(self) -> tuple[AugmentedSubsystem, ...]:
        return tuple(augment(s) for s in self.subsystems)

    @cached_property
    def scm_bar(self) -> sp.csr_array:
        return build_augmented_scm(self)

    @property
    def has_descriptor(self) -> bool:
        return any(s.E0 is not None for s in self.subsystems)

    @property
    def M_x(self) -> int:
        return sum(s.m_x for s in self.subsystems)

    @cached_property
    def stacked(self) -> dict[str, np.ndarray]:
        """Block-diagonal global matrices of the augmented representation."""
        aug = self.augmented
        out = {k: block_diag([getattr(a, k) for a in aug])
               for k in ("A_xx", "A_xv", "A_zx", "A_zv", "B_x", "B_z", "C_x", "C_v", "D")}
        out["E"] = block_diag([a.E_or_identity for a in aug])
        return out


def build_augmented_scm(m: NdsModel) -> sp.csr_array:
    """Interleave the SCM blocks with the per-subsystem parameter matrices."""
    subs = m.subsystems
    vb_off = offsets([s.m_v + s.P.shape[0] for s in subs])
    zb_off = offsets([s.m_z + s.P.shape[1] for s in subs])
    # maps from original v/z index to augmented index
    v_map = np.concatenate([vb_off[i] + np.arange(s.m_v) for i, s in enumerate(subs)]).astype(int)
    z_map = np.concatenate([zb_off[i] + np.arange(s.m_z) for i, s in enumerate(subs)]).astype(int)
    coo = m.scm.tocoo()
    rows = [v_map[coo.row]] if coo.nnz else []
    cols = [z_map[coo.col]] if coo.nnz else []
    vals = [coo.data] if coo.nnz else []
    for i, s in enumerate(subs):
        r, c = np.nonzero(s.P)
        if r.size:
            rows.append(vb_off[i] + s.m_v + r)
            cols.append(zb_off[i] + s.m_z + c)
            vals.append(s.P[r, c])
    shape = (int(vb_off[-1]), int(zb_off[-1]))
    if rows:
        data = (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols)))
        out = sp.coo_array(data, shape=shape).tocsr()
    else:
        out = sp.csr_array(shape)
    return out


def scm_dense_or_sparse(m: NdsModel):
    S = m.scm_bar
    if max(S.shape) < DENSE_CHANNEL_LIMIT:
        return S.toarray()
    return S


def _interconnection(m: NdsModel) -> np.ndarray:
    st = m.stacked
    n = st["A_zv"].shape[1]
    return np.eye(n) - m.scm_bar.toarray() @ st["A_zv"]


def well_posed_nds(m: NdsModel, pol: TolerancePolicy = DEFAULT_POLICY) -> bool:
    """True iff ``I - Phibar A_zv`` is invertible under tolerance."""
    M = _interconnection(m)
    if M.size == 0:
        return True
    sv = singular_values(M)
    return bool(sv[-1] > pol.threshold(M.shape, sv[0]))


def lump(m: NdsModel) -> tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
    """Eliminate all internal channels: returns the global ``(E, A, B, C, D)``."""
    st = m.stacked
    Pb = m.scm_bar.toarray()
    A_zv = st["A_zv"]
    n = A_zv.shape[0]
    if n:
        W = np.eye(n) - A_zv @ Pb
        if np.linalg.matrix_rank(W) < n:
            raise NotWellPosed("I - A_zv Phibar is singular")
        K = Pb @ np.linalg.solve(W, np.hstack([st["A_zx"], st["B_z"]]))
    else:
        K = np.zeros((Pb.shape[0], st["A_zx"].shape[1] + st["B_z"].shape[1]))
    top = np.block([[st["A_xx"], st["B_x"]], [st["C_x"], st["D"]]])
    full = top + np.vstack([st["A_xv"], st["C_v"]]) @ K
    Mx = st["A_xx"].shape[0]
    Mu = st["B_x"].shape[1]
    A = full[:Mx, :Mx]
    B = full[:Mx, Mx:Mx + Mu]
    C = full[Mx:, :Mx]
    D = full[Mx:, Mx:Mx + Mu]
    return st["E"].copy(), A, B, C, D


def dualize(m: NdsModel) -> NdsModel:
    """Transpose-dual model defined on the augmented representation.

    The dual subsystems carry no LFT part; every parameter block ends up in
    the dual SCM, which is the transpose of the augmented SCM.
    """
    subs = []
    for a in m.augmented:
        subs.append(LftSubsystem.build(
            a.A_xx.T, A_xv=a.A_zx.T, A_zx=a.A_xv.T, A_zv=a.A_zv.T,
            B_x=a.C_x.T, B_z=a.C_v.T, C_x=a.B_x.T, C_v=a.B_z.T, D=a.D.T,
            E=None if a.E is None else a.E.T,
            m_v=a.m_zbar, m_z=a.m_vbar, m_u=a.m_y, m_y=a.m_u, n_pin=0, n_pout=0,
        ))
    return NdsModel(subs, m.scm_bar.T.tocsr())


def rc_network(N: int, R, C, R_star, R0, connections: Iterable[tuple[int, int, float]],
               output: str = "right", lft: bool = False, scm=None) -> NdsModel:
    """Chain of op-amp RC subsystems coupled through resistors.

    Parameters
    ----------
    N
        Number of subsystems.
    R, C, R_star, R0
        Per-subsystem resistance, capacitance, feedback resistance and input
        resistance (length ``N`` or scalars).
    connections
        Triples ``(i, j, r)`` (0-based): subsystem ``i`` receives the internal
        output of subsystem ``j`` through a resistor of value ``r``.
    output
        ``"right"`` measures the right capacitor voltage (``C_x = [0 1]``),
        ``"left"`` the left one (``C_x = [1 0]``).
    lft
        Keep the physical coefficients as parameters of an LFT (``G = 0``,
        ``P`` diagonal) instead of folding them into the nominal matrices.
    scm
        Optional ``N x N`` connection matrix used verbatim in place of the
        resistor-derived one; ``connections`` then only set the loads ``k_i``.
    """
    if N < 1:
        raise InvalidParameter("N must be positive")
    R, C, R_star, R0 = (np.broadcast_to(np.asarray(v, dtype=float), (N,)).copy() for v in (R, C, R_star, R0))
    for name, v in (("R", R), ("C", C), ("R_star", R_star), ("R0", R0)):
        if not np.all(np.isfinite(v)) or np.any(v <= 0):
            raise InvalidParameter(f"{name} must be positive")
    if output not in ("right", "left"):
        raise InvalidParameter("output must be 'right' or 'left'")
    conns = [(int(i), int(j), float(r)) for i, j, r in connections]
    inv_rbar = np.zeros(N)
    Phi = np.zeros((N, N))
    for i, j, r in conns:
        if not (0 <= i < N and 0 <= j < N):
            raise InvalidParameter(f"connection ({i}, {j}) out of range")
        if not r > 0:
            raise InvalidParameter("connection resistances must be positive")
        inv_rbar[j] += 1.0 / r
        Phi[i, j] += R_star[i] / r
    if scm is not None:
        Phi = np.asarray(scm.toarray() if sp.issparse(scm) else scm, dtype=float)
        if Phi.shape != (N, N):
            raise InvalidParameter(f"scm must be {N}x{N}")
    T = R * C
    k = R * inv_rbar
    C_x = np.array([[0.0, 1.0]]) if output == "right" else np.array([[1.0, 0.0]])
    subs = []
    for i in range(N):
        a = 1.0 / ((5 + 3 * k[i]) * T[i])
        c = 1.0 / (5 + 3 * k[i])
        rr = R_star[i] / R0[i]
        if not lft:
            A_xx = a * np.array([[-3 - 2 * k[i], 1.0], [1.0, -2 - 3 * k[i]]])
            A_xv = a * np.array([[2 + k[i]], [1.0]])
            subs.append(LftSubsystem.build(
                A_xx, A_xv=A_xv, A_zx=c * np.array([[1.0, 3.0]]), A_zv=[[c]],
                B_x=-rr * A_xv, B_z=[[-rr * c]], C_x=C_x, C_v=np.zeros((1, 1)), D=np.zeros((1, 1)),
            ))
            continue
        # parameters a, a*k, c, a*r, a*k*r, c*r; each enters through fixed factors
        b = a * k[i]
        params = [a, a, b, b, c, a * rr, b * rr, c * rr]
        H1 = np.array([[1, 0, 1, 0, 0, -2, -1, 0], [0, 1, 0, 1, 0, -1, 0, 0]], dtype=float)
        H2 = np.array([[0, 0, 0, 0, 1, 0, 0, -1]], dtype=float)
        # columns: x1, x2 | v | u
        F = np.array([
            [-3, 1, 2, 0],   # a, row x1
            [1, -2, 1, 0],   # a, row x2
            [-2, 0, 1, 0],   # b, row x1
            [0, -3, 0, 0],   # b, row x2
            [1, 3, 1, 0],    # c, row z
            [0, 0, 0, 1],    # a*r
            [0, 0, 0, 1],    # b*r
            [0, 0, 0, 1],    # c*r
        ], dtype=float)
        n_p = len(params)
        subs.append(LftSubsystem.build(
            np.zeros((2, 2)), A_xv=np.zeros((2, 1)), A_zx=np.zeros((1, 2)), A_zv=np.zeros((1, 1)),
            B_x=np.zeros((2, 1)), B_z=np.zeros((1, 1)), C_x=C_x, C_v=np.zeros((1, 1)), D=np.zeros((1, 1)),
            H1=H1, H2=H2, H3=np.zeros((1, n_p)), F1=F[:, :2], F2=F[:, 2:3], F3=F[:, 3:4],
            G=np.zeros((n_p, n_p)), P=np.diag(params),
        ))
    return NdsModel(subs, Phi)
