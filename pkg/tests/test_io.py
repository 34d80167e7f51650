import json
import warnings

import numpy as np
import pytest

from lftnds import io as lio
from lftnds.errors import InvalidInput, InvalidModel
from lftnds.kcf import kcf
from lftnds.model import rc_network
from lftnds.pencil import CanonicalBlock, block_diag_pencil
from lftnds.placement import theorem4_check
from lftnds.random_models import random_nds
from lftnds.verify import verify_observability
from lftnds.descriptor import complete_observability


def test_round_trip_random_models(rng):
    for _ in range(40):
        m = random_nds(rng, lft=True, descriptor=True)
        m2 = lio.loads_model(lio.dumps(lio.model_to_dict(m)))
        for s, t in zip(m.subsystems, m2.subsystems):
            for name in ("A0_xx", "A0_xv", "A0_zx", "A0_zv", "B0_x", "B0_z", "C0_x", "C0_v", "D0",
                         "H1", "H2", "H3", "F1", "F2", "F3", "G", "P"):
                np.testing.assert_array_equal(getattr(s, name), getattr(t, name))
            assert (s.E0 is None) == (t.E0 is None)
        np.testing.assert_array_equal(m.scm.toarray(), m2.scm.toarray())


def test_dense_and_sparse_scm_forms():
    doc = {"subsystems": [{"A_xx": [[-1.0]], "A_xv": [[1.0]], "A_zx": [[1.0]]}] * 2,
           "scm": [[0.0, 0.5], [0.25, 0.0]]}
    dense = lio.model_from_dict(doc)
    doc["scm"] = {"rows": 2, "cols": 2, "entries": [[0, 1, 0.5], [1, 0, 0.25]]}
    sparse = lio.model_from_dict(doc)
    np.testing.assert_array_equal(dense.scm.toarray(), sparse.scm.toarray())


def test_dims_allow_empty_blocks():
    doc = {"subsystems": [{"A_xx": [[0.0]], "dims": {"m_y": 0, "m_v": 2}}], "scm": []}
    m = lio.model_from_dict(doc)
    assert m.subsystems[0].m_v == 2 and m.subsystems[0].m_y == 0
    assert m.scm.shape == (2, 0)


@pytest.mark.parametrize("doc,msg", [
    ({"subsystems": []}, "no subsystems"),
    ({"nodes": []}, "subsystems"),
    ({"subsystems": [{"A_xv": [[1.0]]}]}, "A_xx"),
    ({"subsystems": [{"A_xx": [[1.0]], "Q": [[1.0]]}]}, "unknown"),
    ({"subsystems": [{"A_xx": [[1.0, 2.0]]}]}, "A_xx"),
    ({"subsystems": [{"A_xx": [["a"]]}]}, "numeric"),
    ({"subsystems": [{"A_xx": [[1.0]], "A_xv": [[1.0]], "A_zx": [[1.0]]}],
      "scm": {"rows": 1, "cols": 1, "entries": [[3, 0, 1.0]]}}, "range"),
    ({"subsystems": [{"A_xx": [[1.0]], "A_xv": [[1.0]], "A_zx": [[1.0]]}],
      "scm": {"rows": 2, "cols": 1, "entries": []}}, "declared"),
])
def test_invalid_models(doc, msg):
    with pytest.raises(InvalidModel, match=msg):
        lio.model_from_dict(doc)


def test_malformed_json_reports_position():
    with pytest.raises(InvalidInput, match="line 2, column"):
        lio.loads_model('{"subsystems":\n [}')


def test_missing_file(tmp_path):
    with pytest.raises(InvalidInput, match="cannot read"):
        lio.load_model(tmp_path / "nope.json")


def test_save_and_load(tmp_path):
    m = rc_network(3, 1.0, 1.0, 1.0, 1.0, [(0, 1, 1.0), (1, 2, 2.0)])
    lio.save_model(m, tmp_path / "m.json")
    m2 = lio.load_model(tmp_path / "m.json")
    np.testing.assert_array_equal(m.scm.toarray(), m2.scm.toarray())


def test_verification_report_schema():
    m = rc_network(3, 1.0, 1.0, 1.0, 1.0, [(0, 1, 1.0)], output="left", scm=-np.eye(3))
    d = lio.verification_to_dict(verify_observability(m))
    assert d["schema_version"] == lio.SCHEMA_VERSION
    assert d["property"] == "observability" and d["verdict"] is False and d["mode"] == "finite_lambda"
    assert all(len(z) == 2 for z in d["lambda_set"])
    f = d["failures"][0]
    assert set(f) == {"lambda", "rank", "required", "witness", "state_witness", "residual"}
    assert "timings" not in d
    assert "timings" in lio.verification_to_dict(verify_observability(m), include_timings=True)
    json.loads(lio.dumps(d))


def test_other_report_shapes(rng):
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        d = kcf(block_diag_pencil([CanonicalBlock("H", 1, (2.0,)), CanonicalBlock("L", 1)]))
    kd = lio.kcf_to_dict(d, include_matrices=True)
    assert kd["blocks"] == ["H1", "L1"] and "U" in kd and kd["s"] == 3
    m = rc_network(1, 1.0, 1.0, 1.0, 1.0, [])
    pd = lio.placement_to_dict(theorem4_check(m.augmented[0]))
    assert pd["verdict"] is True and pd["failing_lambda_sample"] is None
    dd = lio.descriptor_to_dict(complete_observability(m))
    assert dd["evidence"]["property"] == "observability"


def test_dumps_is_deterministic_and_nan_free():
    payload = {"a": float("nan"), "b": [np.float64(1.5), np.int64(2)], "c": (1, 2)}
    text = lio.dumps(payload)
    assert json.loads(text) == {"a": None, "b": [1.5, 2], "c": [1, 2]}
    assert lio.dumps(payload) == text
