import json
import math

import numpy as np
import pytest

from qsslab import modelio
from qsslab.model import two_qubit_both, two_qubit_site1
from qsslab.modelio import ModelFileError, dumps, matrix_to_json, model_to_doc, parse_model


def minimal_doc():
    return {
        "schema_version": "1",
        "label": "minimal",
        "dim": 2,
        "hamiltonian": [[[0.0, 0.0], [0.0, 0.0]], [[0.0, 0.0], [0.0, 0.0]]],
        "jump_ops": [[[[0.0, 0.0], [1.0, 0.0]], [[0.0, 0.0], [0.0, 0.0]]]],
        "p0_basis": [0],
    }


def test_parse_minimal_model():
    mf = parse_model(minimal_doc())
    assert mf.spec is not None
    assert mf.spec.dim == 2
    assert np.allclose(mf.spec.p0, np.diag([1.0, 0.0]))
    assert mf.classical is None


def test_parse_rejects_with_field_paths():
    doc = minimal_doc()
    doc["schema_version"] = "2"
    with pytest.raises(ModelFileError, match="schema_version"):
        parse_model(doc)

    doc = minimal_doc()
    doc["hamiltonian"][0][1] = [1.0]
    with pytest.raises(ModelFileError, match=r"hamiltonian\[0\]\[1\]"):
        parse_model(doc)

    doc = minimal_doc()
    doc["jump_ops"][0][0] = [[0.0, 0.0]]
    with pytest.raises(ModelFileError, match=r"jump_ops\[0\]\[0\]"):
        parse_model(doc)

    doc = minimal_doc()
    del doc["p0_basis"]
    with pytest.raises(ModelFileError, match="p0_basis"):
        parse_model(doc)

    doc = minimal_doc()
    doc["p0_basis"] = [7]
    with pytest.raises(ModelFileError, match="p0_basis"):
        parse_model(doc)

    doc = minimal_doc()
    doc["family"] = "unknown_family"
    with pytest.raises(ModelFileError, match="family"):
        parse_model(doc)

    doc = minimal_doc()
    doc["hamiltonian"][0][1] = [0.0, 1.0]  # makes H non-Hermitian
    doc["hamiltonian"][1][0] = [0.0, 1.0]
    with pytest.raises(ModelFileError, match="Hermitian"):
        parse_model(doc)

    with pytest.raises(ModelFileError, match="neither"):
        parse_model({"schema_version": "1", "label": "empty"})


def test_parse_classical_block_errors():
    doc = {
        "schema_version": "1",
        "classical": {"rate_matrix": [[-1.0, 1.0], [0.0, 0.0]], "absorbing_set": [1]},
    }
    mf = parse_model(doc)
    assert mf.classical is not None and mf.classical.n == 2

    bad = {"schema_version": "1", "classical": {"rate_matrix": [[-1.0], [0.0]], "absorbing_set": [1]}}
    with pytest.raises(ModelFileError, match=r"classical.rate_matrix\[0\]"):
        parse_model(bad)

    bad = {
        "schema_version": "1",
        "classical": {"rate_matrix": [[-1.0, 1.0], [1.0, -1.0]], "absorbing_set": [1]},
    }
    with pytest.raises(ModelFileError, match="closed"):
        parse_model(bad)


def test_model_roundtrip():
    for spec in (two_qubit_site1(0.4), two_qubit_both(1.0)):
        doc = model_to_doc(spec, family=None, params={"omega": 0.4})
        mf = parse_model(json.loads(json.dumps(doc)))
        assert np.allclose(mf.spec.hamiltonian, spec.hamiltonian)
        assert np.allclose(mf.spec.p0, spec.p0)
        assert all(
            np.allclose(a, b) for a, b in zip(mf.spec.jump_ops, spec.jump_ops)
        )


def test_matrix_to_json_roundtrip():
    rng = np.random.default_rng(13)
    m = rng.standard_normal((3, 3)) + 1j * rng.standard_normal((3, 3))
    encoded = matrix_to_json(m)
    decoded = np.array([[complex(re, im) for re, im in row] for row in encoded])
    assert np.array_equal(decoded, m)


def test_dumps_deterministic_and_sorted():
    a = dumps({"b": 1.5, "a": [True, False, None], "c": {"y": 2, "x": 0.1}})
    b = dumps({"c": {"x": 0.1, "y": 2}, "a": [True, False, None], "b": 1.5})
    assert a == b
    assert a.index('"a"') < a.index('"b"') < a.index('"c"')
    assert json.loads(a)["c"]["x"] == 0.1


def test_dumps_float_fidelity():
    x = 0.1 + 0.2
    assert float(dumps(x)) == x
    assert dumps(np.float64(1.0)) == "1"
    with pytest.raises(ValueError):
        dumps(math.nan)
    with pytest.raises(ValueError):
        dumps(math.inf)
    with pytest.raises(TypeError):
        dumps({1: "non-string key"})


def test_load_model_files(models_dir):
    import os

    for name in (
        "two_qubit_site1.json",
        "two_qubit_both.json",
        "classical_two_state.json",
        "classical_three_state.json",
    ):
        mf = modelio.load_model(os.path.join(models_dir, name))
        assert mf.label
