import json
import warnings

import numpy as np
import pytest
from hypothesis import given, strategies as st

from conelab import io
from conelab import linalg as la
from conelab.linalg import HermitianOperator


def test_roundtrip_tau(tmp_path):
    tau = la.max_entangled(2)
    path = tmp_path / "tau.json"
    io.write_operator_file(tau, path)
    back = io.parse_operator_file(path)
    assert back.dims == tau.dims
    assert np.array_equal(back.mat, tau.mat)


@given(st.integers(0, 2**32 - 1))
def test_roundtrip_exact_complex(seed):
    rng = np.random.default_rng(seed)
    x = HermitianOperator(la.DimProfile((("A", 2), ("B", 3))), la.random_state(6, rng))
    back = io.loads_operator(io.dumps_operator(x))
    assert back.dims == x.dims and np.array_equal(back.mat, x.mat)


def test_channel_roundtrip(tmp_path):
    ch = la.depolarizing_choi(2, 0.3)
    path = tmp_path / "ch.json"
    io.write_operator_file(ch, path)
    assert json.loads(path.read_text())["kind"] == "channel"
    back = io.parse_channel_file(path)
    assert (back.din, back.dout) == (2, 2) and np.array_equal(back.mat, ch.mat)


def test_dims_mismatch():
    doc = {"dims": [["A", 2], ["B", 3]], "real": np.eye(4).tolist()}
    with pytest.raises(io.ValidationError, match="product 6"):
        io.loads_operator(json.dumps(doc))


def test_legacy_unlabelled_dims_warn():
    doc = {"dims": [2, 2], "real": (np.eye(4) / 4).tolist()}
    with pytest.warns(UserWarning, match="auto-labelling"):
        x = io.loads_operator(json.dumps(doc))
    assert x.dims.labels == ("S0", "S1")


def test_parse_error_has_line_info():
    text = '{\n "dims": [["A", 2]],\n "real": [[1, 0], [0, 1]\n}'
    with pytest.raises(io.ParseError) as err:
        io.loads_operator(text, "bad.json")
    assert err.value.line == 4 and "bad.json:4:" in str(err.value)


def test_non_hermitian_rejected():
    doc = {"dims": [["A", 2]], "real": [[1, 1e-6], [0, 0]]}
    with pytest.raises(io.ValidationError, match="not Hermitian"):
        io.loads_operator(json.dumps(doc))
    tiny = {"dims": [["A", 2]], "real": [[1, 1e-12], [0, 0]]}
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        io.loads_operator(json.dumps(tiny))


def test_other_errors(tmp_path):
    with pytest.raises(io.OperatorFileError):
        io.parse_operator_file(tmp_path / "missing.json")
    with pytest.raises(io.ValidationError, match="square"):
        io.loads_operator(json.dumps({"dims": [["A", 2]], "real": [[1, 0]]}))
    with pytest.raises(io.ValidationError, match="missing 'real'"):
        io.loads_operator(json.dumps({"dims": [["A", 2]]}))
    with pytest.raises(io.ParseError):
        io.loads_operator("[1, 2]")
    (tmp_path / "three.json").write_text(io.dumps_operator(la.max_entangled(2)))
    doc = {"dims": [["A", 2], ["B", 2], ["C", 1]], "real": np.eye(4).tolist()}
    (tmp_path / "three.json").write_text(json.dumps(doc))
    with pytest.raises(io.ValidationError, match="two factors"):
        io.parse_channel_file(tmp_path / "three.json")
