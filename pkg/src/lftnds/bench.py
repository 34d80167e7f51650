"""Timing of the structured test against the lumped eigenvalue test as N grows."""
from __future__ import annotations

import csv
import io
import time
from dataclasses import dataclass

import numpy as np

from .model import NdsModel, rc_network
from .numeric import DEFAULT_POLICY, TolerancePolicy
from .verify import pbh_oracle, verify_observability

DEFAULT_SIZES = (8, 16, 32, 64, 128)


@dataclass(frozen=True)
class BenchRow:
    N: int
    t_structured: float
    t_lumped: float


@dataclass(frozen=True)
class BenchResult:
    rows: tuple[BenchRow, ...]
    slope_structured: float
    slope_lumped: float

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["N", "t_structured", "t_lumped"])
        for r in self.rows:
            w.writerow([r.N, f"{r.t_structured:.6g}", f"{r.t_lumped:.6g}"])
        w.writerow(["slope", f"{self.slope_structured:.3f}", f"{self.slope_lumped:.3f}"])
        return buf.getvalue()


def ring_template(N: int, rng: np.random.Generator, jitter: float = 0.2, output: str = "right") -> NdsModel:
    """RC subsystems on a ring with a chord every fourth node.

    Parameters are jittered around one template so that subsystem poles are
    distinct, which keeps each point of the singular set owned by a single
    subsystem.
    """
    def draw(center):
        return center * (1.0 + jitter * rng.uniform(-1.0, 1.0, N))

    conns = [(i, (i + 1) % N, float(r)) for i, r in zip(range(N), draw(2.0))] if N > 1 else []
    conns += [(i, (i + N // 2) % N, 4.0) for i in range(0, N, 4) if N > 3]
    return rc_network(N, draw(1.0), draw(1.0), draw(0.5), draw(1.0), conns, output=output)


def fit_slope(ns, ts) -> float:
    ns, ts = np.asarray(ns, dtype=float), np.asarray(ts, dtype=float)
    if len(ns) < 2:
        return float("nan")
    return float(np.polyfit(np.log(ns), np.log(ts), 1)[0])


def _time_structured(m: NdsModel, pol: TolerancePolicy, threads: int) -> float:
    rep = verify_observability(m, pol, threads=threads)
    return rep.timings["subsystems"] + rep.timings["network_test"]


def _time_lumped(m: NdsModel, pol: TolerancePolicy) -> float:
    t0 = time.perf_counter()
    pbh_oracle(m, pol)
    return time.perf_counter() - t0


def bench_scaling(sizes=DEFAULT_SIZES, seed: int = 0, repeats: int = 3, threads: int = 1,
                  pol: TolerancePolicy = DEFAULT_POLICY) -> BenchResult:
    """Best-of-``repeats`` timings per N.

    The structured time covers the per-subsystem stage and the network test;
    the well-posedness check, a dense factorization shared by both paths, is
    left out.  The lumped path always runs single-threaded.
    """
    rng = np.random.default_rng(seed)
    rows = []
    for N in sizes:
        m = ring_template(int(N), rng)
        ts = min(_time_structured(m, pol, threads) for _ in range(repeats))
        tl = min(_time_lumped(m, pol) for _ in range(repeats))
        rows.append(BenchRow(int(N), ts, tl))
    big = [r for r in rows if r.N > 1]
    return BenchResult(tuple(rows), fit_slope([r.N for r in big], [r.t_structured for r in big]),
                       fit_slope([r.N for r in big], [r.t_lumped for r in big]))
