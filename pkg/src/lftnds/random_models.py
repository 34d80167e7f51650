"""Random test instances.

Entries are small integers on a sparse pattern.  Exact zeros and repeated
integer values produce structural rank drops (unobservable modes, L blocks,
shared eigenvalues across subsystems) far more often than Gaussian draws,
which would almost surely be generic.
"""
from __future__ import annotations

import numpy as np

from .model import LftSubsystem, NdsModel, well_posed_nds, well_posed_subsystem
from .numeric import DEFAULT_POLICY, TolerancePolicy


def _int_matrix(rng: np.random.Generator, shape, density: float, lo: int = -2, hi: int = 2) -> np.ndarray:
    vals = rng.integers(lo, hi + 1, size=shape).astype(float)
    return vals * (rng.random(shape) < density)


def random_subsystem(rng: np.random.Generator, *, max_x: int = 4, max_v: int = 3, max_z: int = 3,
                     max_u: int = 2, max_y: int | None = None, lft: bool = False, descriptor: bool = False,
                     density: float | None = None, cv_zero: bool = False) -> LftSubsystem:
    """One subsystem with small integer sparse blocks.

    ``m_y = 0`` and ``C_v != 0`` both occur.  With ``lft`` a one- or two-channel
    parameter block is attached; with ``descriptor`` a possibly singular ``E``.
    """
    d = rng.uniform(0.3, 0.7) if density is None else density
    mx = int(rng.integers(1, max_x + 1))
    mv = int(rng.integers(0, max_v + 1))
    mz = int(rng.integers(0, max_z + 1))
    mu = int(rng.integers(0, max_u + 1))
    # up to m_x + m_v outputs, so output kernels of every size occur
    my = int(rng.integers(0, (mx + mv if max_y is None else max_y) + 1))
    blocks = dict(
        A_xx=_int_matrix(rng, (mx, mx), d),
        A_xv=_int_matrix(rng, (mx, mv), d),
        A_zx=_int_matrix(rng, (mz, mx), d),
        A_zv=_int_matrix(rng, (mz, mv), d * 0.5),
        B_x=_int_matrix(rng, (mx, mu), d),
        B_z=_int_matrix(rng, (mz, mu), d),
        C_x=_int_matrix(rng, (my, mx), d),
        C_v=np.zeros((my, mv)) if cv_zero else _int_matrix(rng, (my, mv), d * 0.5),
        D=_int_matrix(rng, (my, mu), d),
    )
    extra = {}
    if lft:
        q = int(rng.integers(1, 3))
        extra = dict(
            H1=_int_matrix(rng, (mx, q), d), H2=_int_matrix(rng, (mz, q), d),
            H3=np.zeros((my, q)) if cv_zero else _int_matrix(rng, (my, q), d * 0.5),
            F1=_int_matrix(rng, (q, mx), d), F2=_int_matrix(rng, (q, mv), d), F3=_int_matrix(rng, (q, mu), d),
            G=_int_matrix(rng, (q, q), d * 0.5),
            P=np.diag(rng.integers(-2, 3, size=q).astype(float)),
        )
    if descriptor:
        E = np.eye(mx)
        if rng.random() < 0.7:
            E[rng.integers(0, mx), :] = 0.0
        if rng.random() < 0.5:
            E = E + _int_matrix(rng, (mx, mx), 0.2, -1, 1)
        extra["E"] = E
    return LftSubsystem.build(**blocks, **extra, m_v=mv, m_z=mz, m_u=mu, m_y=my)


def random_scm(rng: np.random.Generator, subs, density: float = 0.4) -> np.ndarray:
    Mv = sum(s.m_v for s in subs)
    Mz = sum(s.m_z for s in subs)
    return _int_matrix(rng, (Mv, Mz), density, -1, 1)


def random_nds(rng: np.random.Generator, *, max_n: int = 6, max_x: int = 4, max_v: int = 3, max_z: int = 3,
               lft: bool = False, descriptor: bool = False, pol: TolerancePolicy = DEFAULT_POLICY,
               attempts: int = 50, **kw) -> NdsModel:
    """A well-posed random network; redraws until the well-posedness checks pass."""
    for _ in range(attempts):
        n = int(rng.integers(1, max_n + 1))
        subs = []
        for _ in range(n):
            s = random_subsystem(rng, max_x=max_x, max_v=max_v, max_z=max_z, lft=lft and rng.random() < 0.5,
                                 descriptor=descriptor and rng.random() < 0.6, **kw)
            while not well_posed_subsystem(s, pol):
                s = random_subsystem(rng, max_x=max_x, max_v=max_v, max_z=max_z, lft=False,
                                     descriptor=descriptor, **kw)
            subs.append(s)
        m = NdsModel(subs, random_scm(rng, subs))
        if well_posed_nds(m, pol):
            return m
    raise RuntimeError("could not draw a well-posed network")
