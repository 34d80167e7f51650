"""Model files and JSON reports.

Model file::

    {"subsystems": [{"A_xx": [[...]], "A_xv": ..., "E": ..., "dims": {"m_v": 1}}, ...],
     "scm": [[...]]  or  {"rows": R, "cols": C, "entries": [[i, j, value], ...]}}

Matrices are row-major nested lists; an empty list means the block is
absent.  ``dims`` is only needed when a dimension cannot be inferred from the
blocks that are present.  SCM indices are 0-based.
"""
from __future__ import annotations

import json
import math
from pathlib import Path

import numpy as np
import scipy.sparse as sp

from .errors import InvalidInput, InvalidModel
from .kcf import ALL_OF_C, KcfDecomposition
from .model import LftSubsystem, NdsModel

SCHEMA_VERSION = "1.0"

MATRIX_KEYS = ("A_xx", "A_xv", "A_zx", "A_zv", "B_x", "B_z", "C_x", "C_v", "D",
               "H1", "H2", "H3", "F1", "F2", "F3", "G", "P", "E")
_FIELDS = ("A0_xx", "A0_xv", "A0_zx", "A0_zv", "B0_x", "B0_z", "C0_x", "C0_v", "D0",
           "H1", "H2", "H3", "F1", "F2", "F3", "G", "P", "E0")
DIM_KEYS = ("m_v", "m_z", "m_u", "m_y", "n_pin", "n_pout")


def _parse_json(text: str, source: str):
    try:
        return json.loads(text)
    except json.JSONDecodeError as exc:
        raise InvalidInput(f"{source}: malformed JSON at line {exc.lineno}, column {exc.colno}: {exc.msg}") from exc


def _matrix(value, where: str):
    if value is None or (isinstance(value, list) and len(value) == 0):
        return None
    try:
        A = np.array(value, dtype=float)
    except (TypeError, ValueError) as exc:
        raise InvalidModel(f"{where}: not a numeric matrix") from exc
    if A.ndim != 2:
        raise InvalidModel(f"{where}: expected a nested list of rows, got {A.ndim} dimensions")
    if not np.all(np.isfinite(A)):
        raise InvalidModel(f"{where}: non-finite entry")
    return A


def subsystem_from_dict(d: dict, index: int = 0) -> LftSubsystem:
    if not isinstance(d, dict):
        raise InvalidModel(f"subsystem {index}: expected an object")
    unknown = set(d) - set(MATRIX_KEYS) - {"dims"}
    if unknown:
        raise InvalidModel(f"subsystem {index}: unknown keys {sorted(unknown)}")
    if "A_xx" not in d:
        raise InvalidModel(f"subsystem {index}: A_xx is required")
    mats = {k: _matrix(d.get(k), f"subsystem {index} {k}") for k in MATRIX_KEYS}
    dims = d.get("dims", {}) or {}
    if not isinstance(dims, dict) or set(dims) - set(DIM_KEYS) - {"m_x"}:
        raise InvalidModel(f"subsystem {index}: dims may only contain m_x and {DIM_KEYS}")
    A_xx = mats.pop("A_xx")
    if A_xx is None:
        A_xx = np.zeros((int(dims.get("m_x", 0)), int(dims.get("m_x", 0))))
    try:
        return LftSubsystem.build(A_xx, **mats, **{k: int(v) for k, v in dims.items() if k != "m_x"})
    except (InvalidModel, TypeError, ValueError) as exc:
        raise InvalidModel(f"subsystem {index}: {exc}") from exc


def _scm_from_json(value, shape: tuple[int, int]):
    if isinstance(value, dict):
        try:
            rows, cols = int(value["rows"]), int(value["cols"])
            entries = value.get("entries", [])
            i = [int(e[0]) for e in entries]
            j = [int(e[1]) for e in entries]
            v = [float(e[2]) for e in entries]
        except (KeyError, TypeError, ValueError, IndexError) as exc:
            raise InvalidModel("scm: expected {rows, cols, entries: [[i, j, value], ...]}") from exc
        if (rows, cols) != shape:
            raise InvalidModel(f"scm: declared {rows}x{cols}, subsystems need {shape[0]}x{shape[1]}")
        if any(not (0 <= a < rows and 0 <= b < cols) for a, b in zip(i, j)):
            raise InvalidModel("scm: entry index out of range")
        return sp.coo_array((v, (i, j)), shape=shape).tocsr()
    if value is None or value == []:
        return sp.csr_array(shape)
    return _matrix(value, "scm")


def model_from_dict(doc: dict) -> NdsModel:
    if not isinstance(doc, dict) or "subsystems" not in doc:
        raise InvalidModel("model must be an object with a 'subsystems' array")
    subs = [subsystem_from_dict(d, i) for i, d in enumerate(doc["subsystems"])]
    if not subs:
        raise InvalidModel("model has no subsystems")
    shape = (sum(s.m_v for s in subs), sum(s.m_z for s in subs))
    return NdsModel(subs, _scm_from_json(doc.get("scm"), shape))


def load_model(path) -> NdsModel:
    p = Path(path)
    try:
        text = p.read_text()
    except OSError as exc:
        raise InvalidInput(f"cannot read {p}: {exc.strerror}") from exc
    return model_from_dict(_parse_json(text, str(p)))


def loads_model(text: str) -> NdsModel:
    return model_from_dict(_parse_json(text, "<string>"))


def _rows(A: np.ndarray) -> list:
    return [[float(x) for x in row] for row in A]


def model_to_dict(m: NdsModel) -> dict:
    subs = []
    for s in m.subsystems:
        d = {}
        for key, attr in zip(MATRIX_KEYS, _FIELDS):
            A = getattr(s, attr)
            if A is not None and A.size:
                d[key] = _rows(A)
        d["dims"] = {"m_v": s.m_v, "m_z": s.m_z, "m_u": s.m_u, "m_y": s.m_y,
                     "n_pin": s.G.shape[0], "n_pout": s.P.shape[0]}
        if s.A0_xx.size == 0:
            d["dims"]["m_x"] = 0
        subs.append(d)
    coo = m.scm.tocoo()
    order = np.lexsort((coo.col, coo.row))
    scm = {"rows": int(m.scm.shape[0]), "cols": int(m.scm.shape[1]),
           "entries": [[int(coo.row[k]), int(coo.col[k]), float(coo.data[k])] for k in order]}
    return {"subsystems": subs, "scm": scm}


def save_model(m: NdsModel, path) -> None:
    Path(path).write_text(dumps(model_to_dict(m)) + "\n")


# ---------------------------------------------------------------- reports

def cnum(z) -> list[float]:
    z = complex(z)
    return [float(z.real), float(z.imag)]


def _vector(v: np.ndarray) -> list:
    v = np.asarray(v)
    if np.iscomplexobj(v):
        return [cnum(x) for x in v]
    return [float(x) for x in v]


def verification_to_dict(rep, include_timings: bool = False) -> dict:
    lam = "all" if rep.lambda_set is ALL_OF_C else [cnum(z) for z in rep.lambda_set]
    out = {
        "schema_version": SCHEMA_VERSION,
        "property": rep.prop,
        "verdict": bool(rep.verdict),
        "mode": rep.mode,
        "lambda_set": lam,
        "failures": [{
            "lambda": cnum(f.lam),
            "rank": int(f.rank),
            "required": int(f.required),
            "witness": _vector(f.witness),
            "state_witness": _vector(f.lifted),
            "residual": float(f.residual),
        } for f in rep.failures],
        "subsystems": [{
            "index": s.index,
            "output_fcr": s.output_fcr,
            "blocks": list(s.blocks),
            "zeta_L": s.zeta_L,
            "warnings": list(s.warnings),
        } for s in rep.per_subsystem],
        "warnings": list(rep.warnings),
    }
    if include_timings:
        out["timings"] = {k: float(v) for k, v in rep.timings.items()}
    return out


def kcf_to_dict(d: KcfDecomposition, include_matrices: bool = False) -> dict:
    out = {"schema_version": SCHEMA_VERSION, "shape": list(d.shape), **d.summary(),
           "residual": float(d.residual), "warnings": list(d.warnings)}
    if include_matrices and d.U is not None:
        out["U"] = _rows(d.U)
        out["V"] = _rows(d.V)
    return out


def placement_to_dict(diag) -> dict:
    lam = diag.failing_lambda_sample
    return {"schema_version": SCHEMA_VERSION, "a_xv_fcr": diag.a_xv_fcr, "theta_fncr": diag.theta_fncr,
            "verdict": diag.verdict, "failing_lambda_sample": None if lam is None else cnum(lam),
            "notes": list(diag.notes)}


def descriptor_to_dict(rep, include_timings: bool = False) -> dict:
    return {"schema_version": SCHEMA_VERSION, "property": rep.prop, "regular": rep.regular,
            "infinity_condition": rep.infinity_condition, "finite_condition": rep.finite_condition,
            "verdict": rep.verdict,
            "evidence": None if rep.evidence is None else verification_to_dict(rep.evidence, include_timings)}


def _clean(obj):
    if isinstance(obj, float) and not math.isfinite(obj):
        return None
    if isinstance(obj, dict):
        return {k: _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, np.generic):
        return obj.item()
    return obj


def dumps(obj) -> str:
    """Deterministic JSON: fixed key order, shortest round-trip float repr."""
    return json.dumps(_clean(obj), indent=2, allow_nan=False)
