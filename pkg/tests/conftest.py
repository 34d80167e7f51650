import numpy as np
import pytest


def well_conditioned(rng: np.random.Generator, n: int, limit: float = 100.0) -> np.ndarray:
    """Random square matrix with condition number at most ``limit``."""
    if n == 0:
        return np.zeros((0, 0))
    while True:
        M = rng.standard_normal((n, n))
        if np.linalg.cond(M) <= limit:
            return M


@pytest.fixture
def rng():
    return np.random.default_rng(20261016)


def random_kcf_blocks(rng: np.random.Generator, total: int):
    """Canonical blocks whose larger dimensions sum to at most ``total``.

    At most one H block, with real or conjugate-pair eigenvalues bounded away
    from zero and from each other.
    """
    from lftnds.pencil import CanonicalBlock

    blocks, size = [], 0
    for _ in range(40):
        kind = str(rng.choice(list("HKLNJ")))
        if kind == "H":
            if any(b.kind == "H" for b in blocks):
                continue
            want = int(rng.integers(1, 4))
            eigs = []
            while len(eigs) < want:
                if want - len(eigs) >= 2 and rng.random() < 0.3:
                    z = complex(rng.uniform(-3, 3), rng.uniform(0.2, 3))
                    eigs += [z, z.conjugate()]
                else:
                    x = float(rng.uniform(0.3, 3) * rng.choice([-1, 1]))
                    if all(abs(x - e) > 0.1 for e in eigs):
                        eigs.append(x)
            b = CanonicalBlock("H", len(eigs), tuple(eigs))
        elif kind in "KN":
            b = CanonicalBlock(kind, int(rng.integers(1, 4)))
        else:
            b = CanonicalBlock(kind, int(rng.integers(0, 4)))
        if size + max(b.shape) > total:
            break
        blocks.append(b)
        size += max(b.shape)
    return blocks


def scrambled(rng: np.random.Generator, blocks, limit: float = 100.0):
    """The block-diagonal canonical pencil multiplied by random well-conditioned transforms."""
    from lftnds.pencil import block_diag_pencil

    p = block_diag_pencil(blocks)
    m, n = p.shape
    return p.transform(well_conditioned(rng, m, limit), well_conditioned(rng, n, limit))


def block_labels(blocks):
    return sorted(b.label() for b in blocks)


def sparse_scm(rng: np.random.Generator, N: int, density: float = 0.3) -> np.ndarray:
    Phi = np.zeros((N, N))
    mask = rng.random((N, N)) < density
    Phi[mask] = rng.uniform(-3.0, 3.0, size=int(mask.sum()))
    return Phi


def rc_draw(rng: np.random.Generator, N: int, output: str = "right", scm=None, shared: bool = True):
    """Op-amp RC ring with parameters in [0.1, 10].

    ``shared`` uses one (R, C, R*, R0) tuple and one ring resistance for every
    subsystem, so all subsystems have the same pole.  ``scm`` replaces the
    resistor-derived connection matrix.
    """
    from lftnds.model import rc_network

    size = None if shared else N
    R, C, Rs, R0 = (rng.uniform(0.1, 10.0, size) for _ in range(4))
    r = rng.uniform(0.1, 10.0, size)
    rs = np.broadcast_to(r, (N,))
    conns = [(i, (i + 1) % N, float(rs[i])) for i in range(N)] if N > 1 else []
    return rc_network(N, R, C, Rs, R0, conns, output=output, scm=scm)


def pytest_terminal_summary(terminalreporter):
    import sys

    mod = sys.modules.get("test_acceptance")
    results = getattr(mod, "RESULTS", None)
    if results:
        terminalreporter.section("acceptance criteria")
        for n in sorted(results):
            terminalreporter.write_line(results[n])
