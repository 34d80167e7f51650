"""Matrix pencils ``lambda*G + H`` and the canonical Kronecker blocks."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import InvalidInput
from .numeric import DEFAULT_POLICY, TolerancePolicy, as_matrix, null_space_of_dim, rank_with_tolerance

BLOCK_KINDS = ("H", "K", "L", "N", "J")

# eigenvalues closer than this (relative to 1+|lambda|) are one point of the singular set
CLUSTER_TOL = 1e-8
# defective eigenvalues scatter by roughly eps**(1/k); group them before averaging
LOOSE_CLUSTER_TOL = 1e-6
# a singular value below this fraction of the pencil scale counts towards an eigenvalue's kernel
KERNEL_TOL = 1e-8


@dataclass(frozen=True, eq=False)
class MatrixPencil:
    G: np.ndarray
    H: np.ndarray

    def __post_init__(self):
        G, H = as_matrix(self.G), as_matrix(self.H)
        if G.shape != H.shape:
            raise InvalidInput(f"pencil parts differ in shape: {G.shape} vs {H.shape}")
        object.__setattr__(self, "G", G)
        object.__setattr__(self, "H", H)

    @property
    def shape(self) -> tuple[int, int]:
        return self.G.shape

    def __call__(self, lam) -> np.ndarray:
        return evaluate(self, lam)

    @property
    def T(self) -> "MatrixPencil":
        return MatrixPencil(self.G.T, self.H.T)

    def norm(self) -> float:
        if self.G.size == 0:
            return 0.0
        return float(max(np.linalg.norm(self.G, 2), np.linalg.norm(self.H, 2)))

    def transform(self, U: np.ndarray, V: np.ndarray) -> "MatrixPencil":
        return MatrixPencil(U @ self.G @ V, U @ self.H @ V)


def evaluate(p: MatrixPencil, lam) -> np.ndarray:
    lam = complex(lam)
    if lam.imag == 0.0:
        return lam.real * p.G + p.H
    return lam * p.G + p.H


@dataclass(frozen=True, eq=False)
class CanonicalBlock:
    """One Kronecker block.

    ``size`` is the subscript ``m``.  ``H`` blocks carry their (generally
    non-canonical) pencil in ``pencil`` and its eigenvalues in
    ``finite_eigenvalues``.
    """

    kind: str
    size: int
    finite_eigenvalues: tuple[complex, ...] = ()
    pencil: MatrixPencil | None = field(default=None, repr=False)

    def __post_init__(self):
        if self.kind not in BLOCK_KINDS:
            raise InvalidInput(f"unknown block kind {self.kind!r}")
        if self.size < 0 or (self.kind in ("K", "N") and self.size == 0):
            raise InvalidInput(f"invalid size {self.size} for a {self.kind} block")
        if self.kind == "H" and self.pencil is None and len(self.finite_eigenvalues) != self.size:
            raise InvalidInput("an H block needs either its pencil or exactly `size` eigenvalues")

    @property
    def shape(self) -> tuple[int, int]:
        m = self.size
        return {"L": (m, m + 1), "J": (m + 1, m)}.get(self.kind, (m, m))

    def label(self) -> str:
        return f"{self.kind}{self.size}"


def _shift(m: int) -> np.ndarray:
    return np.eye(m, k=1)


def _real_from_eigenvalues(eigs) -> np.ndarray:
    """Real matrix ``A`` with the given (conjugate-closed) spectrum."""
    eigs = list(eigs)
    n = len(eigs)
    A = np.zeros((n, n))
    i = 0
    used = [False] * n
    for k, e in enumerate(eigs):
        if used[k]:
            continue
        used[k] = True
        e = complex(e)
        if abs(e.imag) <= CLUSTER_TOL * (1 + abs(e)):
            A[i, i] = e.real
            i += 1
            continue
        # find the conjugate partner
        j = next((j for j in range(k + 1, n) if not used[j] and abs(complex(eigs[j]) - e.conjugate()) <= 1e-8 * (1 + abs(e))), None)
        if j is None:
            raise InvalidInput("complex eigenvalues must come in conjugate pairs")
        used[j] = True
        A[i:i + 2, i:i + 2] = [[e.real, e.imag], [-e.imag, e.real]]
        i += 2
    return A


def canonical_block_pencil(b: CanonicalBlock) -> MatrixPencil:
    """The exact matrices of a canonical block (``L_0`` is ``0x1``, ``J_0`` is ``1x0``)."""
    m = b.size
    if b.kind == "K":
        return MatrixPencil(np.eye(m), _shift(m))
    if b.kind == "N":
        return MatrixPencil(_shift(m), np.eye(m))
    if b.kind == "L":
        G = np.hstack([np.eye(m), np.zeros((m, 1))])
        H = np.hstack([_shift(m), np.eye(m)[:, m - 1:m] if m else np.zeros((0, 1))])
        return MatrixPencil(G, H)
    if b.kind == "J":
        return canonical_block_pencil(CanonicalBlock("L", m)).T
    if b.pencil is not None:
        return b.pencil
    return MatrixPencil(np.eye(m), -_real_from_eigenvalues(b.finite_eigenvalues))


def block_diag_pencil(blocks) -> MatrixPencil:
    ps = [canonical_block_pencil(b) for b in blocks]
    rows = sum(p.shape[0] for p in ps)
    cols = sum(p.shape[1] for p in ps)
    G = np.zeros((rows, cols))
    H = np.zeros((rows, cols))
    r = c = 0
    for p in ps:
        a, b = p.shape
        G[r:r + a, c:c + b] = p.G
        H[r:r + a, c:c + b] = p.H
        r += a
        c += b
    return MatrixPencil(G, H)


def cluster_indices(values, tol: float) -> list[list[int]]:
    """Single-linkage groups of indices.

    Two values join when ``|a - b| <= tol * (1 + max(|a|, |b|))``.  A sweep
    over the values sorted by real part keeps this near-linear.
    """
    vals = [complex(v) for v in values]
    n = len(vals)
    parent = list(range(n))

    def find(i):
        while parent[i] != i:
            parent[i] = parent[parent[i]]
            i = parent[i]
        return i

    order = sorted(range(n), key=lambda i: vals[i].real)
    bound = max((abs(v) for v in vals), default=0.0)
    window = tol * (1 + bound)
    start = 0
    for pos, i in enumerate(order):
        while vals[order[start]].real < vals[i].real - window:
            start += 1
        for j in order[start:pos]:
            a, b = vals[i], vals[j]
            if abs(a - b) <= tol * (1 + max(abs(a), abs(b))):
                parent[find(i)] = find(j)
    groups: dict[int, list[int]] = {}
    for i in range(n):
        groups.setdefault(find(i), []).append(i)
    return list(groups.values())


def _mean(vals: list[complex], tol: float) -> complex:
    mean = complex(np.mean(vals))
    if abs(mean.imag) <= tol * (1 + abs(mean)):
        mean = complex(mean.real, 0.0)
    return mean


def _point_key(v: complex):
    return (abs(v), v.real, v.imag)


def cluster_values(values, tol: float) -> list[tuple[complex, int]]:
    """``(mean, count)`` per cluster, sorted by modulus, then real and imaginary part."""
    vals = [complex(v) for v in values]
    out = [(_mean([vals[i] for i in g], tol), len(g)) for g in cluster_indices(vals, tol)]
    return sorted(out, key=lambda t: _point_key(t[0]))


def eigen_clusters(b: CanonicalBlock) -> list[tuple[complex, int]]:
    """Eigenvalue clusters of an ``H`` block (means of nearby computed eigenvalues)."""
    if b.kind != "H":
        return []
    return cluster_values(b.finite_eigenvalues, LOOSE_CLUSTER_TOL)


def _same_point(a: complex, b: complex, tol: float = CLUSTER_TOL) -> bool:
    return abs(a - b) <= tol * (1 + max(abs(a), abs(b)))


def block_null_space(b: CanonicalBlock, lam, pol: TolerancePolicy = DEFAULT_POLICY) -> np.ndarray:
    """Kernel basis of a canonical block evaluated at ``lam``.

    ``K`` and ``L`` use their closed forms; an ``H`` block's kernel is
    computed numerically at the cluster mean of the matching eigenvalue.
    """
    lam = complex(lam)
    rows, cols = b.shape
    real = lam.imag == 0.0
    dtype = float if real else complex
    empty = np.zeros((cols, 0), dtype=dtype)
    if b.kind in ("N", "J"):
        return empty
    if b.kind == "K":
        if _same_point(lam, 0.0):
            v = np.zeros((cols, 1), dtype=dtype)
            v[0, 0] = 1.0
            return v
        return empty
    if b.kind == "L":
        v = (-lam) ** np.arange(b.size + 1)
        v = v.real if real else v
        return v.reshape(-1, 1).astype(dtype)
    for mean, count in eigen_clusters(b):
        if _same_point(lam, mean):
            return _regular_kernel(canonical_block_pencil(b), mean, count, pol)
    return empty


def _regular_kernel(p: MatrixPencil, lam: complex, mult: int, pol: TolerancePolicy) -> np.ndarray:
    M = evaluate(p, lam)
    s = np.linalg.svd(M, compute_uv=False)
    scale = max(p.norm() * (1 + abs(lam)), s[0])
    cut = max(pol.threshold(M.shape, scale), KERNEL_TOL * scale)
    dim = int(np.clip(np.sum(s <= cut), 1, mult))
    B = null_space_of_dim(M, dim)
    return B.real.copy() if lam.imag == 0.0 else B


def sample_points(p: MatrixPencil, count: int, rng: np.random.Generator) -> np.ndarray:
    radius = 1.0 + float(np.linalg.norm(p.G)) + float(np.linalg.norm(p.H))
    angles = rng.uniform(0.0, 2 * np.pi, size=count)
    return radius * np.exp(1j * angles)


def normal_rank(p: MatrixPencil, pol: TolerancePolicy = DEFAULT_POLICY, trials: int = 3,
                rng: np.random.Generator | None = None, reference: MatrixPencil | None = None) -> int:
    """Rank of the pencil at generic points (max over random evaluations).

    If the final trial falls below the running maximum, up to three more
    points are drawn, so a single unlucky sample cannot lower the result.
    ``reference`` (a pencil of which ``p`` is a projection or product) sets
    the magnitude that singular values are judged against.
    """
    if trials < 1:
        raise InvalidInput("trials must be positive")
    m, n = p.shape
    if m == 0 or n == 0:
        return 0
    rng = np.random.default_rng(0) if rng is None else rng
    base = p if reference is None else reference

    def rank_at(lam):
        scale = None if reference is None else float(np.linalg.norm(evaluate(reference, lam), 2))
        return rank_with_tolerance(evaluate(p, lam), pol, scale)

    best = -1
    last = -1
    for lam in sample_points(base, trials, rng):
        last = rank_at(lam)
        best = max(best, last)
    extra = 0
    while last < best and extra < 3:
        last = rank_at(sample_points(base, 1, rng)[0])
        best = max(best, last)
        extra += 1
    return best


def minimal_index_counts(p: MatrixPencil, pol: TolerancePolicy = DEFAULT_POLICY,
                         rng: np.random.Generator | None = None) -> tuple[int, int]:
    """(number of L-type blocks, number of J-type blocks), size-0 blocks included."""
    r = normal_rank(p, pol, rng=rng)
    m, n = p.shape
    return n - r, m - r
