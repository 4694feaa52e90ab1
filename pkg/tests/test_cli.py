import io
import json

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from heisboundary import DerivationSpec, decompose
from heisboundary.cli import run
from heisboundary.errors import DimensionError, SchemaError, SpecSyntaxError
from heisboundary.specio import parse_spec, serialize_spec

DIAG_123 = '{"n":1,"derivation":{"matrix":[[1,0,0],[0,2,0],[0,0,3]]}}'
DIAG_246 = '{"n":1,"derivation":{"matrix":[[2,0,0],[0,4,0],[0,0,6]]}}'
DIAG_134 = '{"n":1,"derivation":{"matrix":[[1,0,0],[0,3,0],[0,0,4]]}}'
SPECTRAL_112 = (
    '{"n":1,"derivation":{"spectral":[{"eigenvalue":1,"eigenvectors":[[1,0,0],[0,1,0]]},'
    '{"eigenvalue":2,"eigenvectors":[[0,0,1]]}]}}'
)
H2 = '{"n":2,"label":"h2","derivation":{"matrix":[[1,0,0,0,0],[0,3,0,0,0],[0,0,2,0,0],[0,0,0,2,0],[0,0,0,0,4]]}}'


@pytest.fixture
def files(tmp_path):
    out = {}
    for name, text in [("a", DIAG_123), ("b", DIAG_246), ("c", DIAG_134), ("s", SPECTRAL_112), ("h2", H2)]:
        p = tmp_path / f"{name}.json"
        p.write_text(text)
        out[name] = str(p)
    return out


def _run(argv):
    out, err = io.StringIO(), io.StringIO()
    code = run(argv, stdout=out, stderr=err)
    return code, out.getvalue(), err.getvalue()


def test_parse_matrix_form():
    spec = parse_spec(DIAG_123)
    assert spec.n == 1
    np.testing.assert_array_equal(spec.to_matrix(), np.diag([1.0, 2.0, 3.0]))


def test_parse_spectral_form():
    gs = decompose(parse_spec(SPECTRAL_112))
    np.testing.assert_array_equal(gs.alphas, [1.0, 2.0])
    assert gs.dims == (2, 1)


@pytest.mark.parametrize("text", [DIAG_123, SPECTRAL_112, H2])
def test_round_trip(text):
    spec = parse_spec(text)
    again = parse_spec(serialize_spec(spec))
    assert serialize_spec(again) == serialize_spec(spec)
    np.testing.assert_array_equal(again.to_matrix(), spec.to_matrix())
    assert again.label == spec.label


@settings(max_examples=30, deadline=None)
@given(st.lists(st.floats(0.1, 10, allow_subnormal=False), min_size=2, max_size=2))
def test_round_trip_random_diagonals(ab):
    a, b = ab
    spec = DerivationSpec.diag(a, b, a + b)
    assert serialize_spec(parse_spec(serialize_spec(spec))) == serialize_spec(spec)


@pytest.mark.parametrize(
    "text, field",
    [
        ('{"derivation":{"matrix":[[1]]}}', "n"),
        ('{"n":"one","derivation":{"matrix":[[1]]}}', "n"),
        ('{"n":1}', "derivation"),
        ('{"n":1,"derivation":{}}', "derivation"),
        ('{"n":1,"derivation":{"matrix":"diag"}}', "derivation.matrix"),
        ('{"n":1,"derivation":{"matrix":[[1,0,0],[0,"x",0],[0,0,3]]}}', "derivation.matrix[1][1]"),
        ('{"n":1,"derivation":{"spectral":[{"eigenvectors":[[1,0,0]]}]}}', "derivation.spectral[0].eigenvalue"),
        ('{"n":1,"derivation":{"spectral":[{"eigenvalue":1,"eigenvectors":[]}]}}', "derivation.spectral[0].eigenvectors"),
        ('{"n":1,"label":3,"derivation":{"matrix":[[1,0,0],[0,2,0],[0,0,3]]}}', "label"),
        ('[1, 2]', "<root>"),
    ],
)
def test_schema_errors_name_field(text, field):
    with pytest.raises(SchemaError) as info:
        parse_spec(text)
    assert info.value.field == field
    assert field in str(info.value)


def test_syntax_and_dimension_errors():
    with pytest.raises(SpecSyntaxError):
        parse_spec('{"n": 1,')
    with pytest.raises(DimensionError):
        parse_spec('{"n":1,"derivation":{"matrix":[[1,0],[0,2]]}}')
    with pytest.raises(DimensionError):
        parse_spec('{"n":1,"derivation":{"matrix":[[1,0,0],[0,2],[0,0,3]]}}')


def test_validate(files):
    code, out, _ = _run(["validate", files["h2"]])
    assert code == 0
    rep = json.loads(out)
    assert rep["command"] == "validate"
    assert rep["results"]["passed"] is True
    assert rep["results"]["dims"] == [1, 2, 1, 1]
    assert rep["inputs"]["spec"]["label"] == "h2"


def test_classify(files):
    code, out, _ = _run(["classify", files["a"], files["b"]])
    assert code == 0
    res = json.loads(out)["results"]
    assert res["equivalent"] is True and res["lambda"] == 0.5
    code, out, _ = _run(["classify", files["a"], files["c"]])
    assert code == 0 and json.loads(out)["results"]["equivalent"] is False


def test_isometry(files):
    code, out, _ = _run(["isometry", files["a"], files["b"], "--pairs", "2000", "--seed", "0"])
    assert code == 0
    res = json.loads(out)["results"]
    assert res["max_relative_error"] <= 1e-9
    assert np.asarray(res["map"]).shape == (3, 3)


def test_dist_and_chain(files):
    code, out, _ = _run(["dist", files["a"], "--p", "1,0,0", "--q", "1,1,0"])
    assert code == 0
    assert json.loads(out)["results"]["dist_A"] == pytest.approx(1 + 0.5 ** (1 / 3))
    code, out, _ = _run(["chain", files["s"], "--p", "0,0,0", "--q", "1,0,0", "--samples", "300"])
    assert code == 0
    res = json.loads(out)["results"]
    assert res["chain_dist"] <= res["dist_A"]
    assert json.loads(out)["seed"] == 0


def test_regularity_cosets_distort(files):
    code, out, _ = _run(["regularity", files["s"], "--samples", "20000", "--radii", "0.5,1,2"])
    assert code == 0 and json.loads(out)["results"]["target_exponent"] == 4.0
    code, out, _ = _run(["cosets", files["a"], "--g1", "0,0,0", "--g2", "0,1,0", "--radii", "1,10,100"])
    assert code == 0
    assert json.loads(out)["results"]["hausdorff"]["algebraic_verdict"] == "infinite"
    code, out, _ = _run(["distort", files["a"], "--samples", "50", "--pairs", "200"])
    assert code == 0
    assert json.loads(out)["results"]["almost_similarity"]["L"] == pytest.approx(2.0)


@pytest.mark.parametrize(
    "argv",
    [
        ["isometry", "{a}", "{b}", "--pairs", "500", "--seed", "3"],
        ["chain", "{s}", "--p", "0,0,0", "--q", "0.5,0.5,0.5", "--samples", "200", "--seed", "7"],
        ["regularity", "{a}", "--samples", "10000"],
        ["distort", "{h2}", "--map", "translate", "--g", "0.1,0.2,0.3,0.4,0.5", "--samples", "40", "--pairs", "100"],
        ["validate", "{h2}"],
    ],
)
def test_reports_are_byte_identical(files, argv):
    argv = [a.format(**files) for a in argv]
    first, second = _run(argv), _run(argv)
    assert first[0] == 0
    assert first[1] == second[1]
    rep = json.loads(first[1])
    assert list(rep) == sorted(rep)
    assert "wall_time_s" not in rep


def test_timing_flag_adds_wall_time(files):
    code, out, _ = _run(["validate", files["a"], "--timing"])
    assert code == 0 and json.loads(out)["wall_time_s"] >= 0


def test_exit_codes(files, tmp_path):
    assert _run(["frobnicate"])[0] == 1
    assert "usage" in _run(["frobnicate"])[2]
    assert _run([])[0] == 1
    assert _run(["dist", files["a"], "--p", "1,0", "--q", "0,0,0"])[0] == 1
    assert _run(["validate", str(tmp_path / "missing.json")])[0] == 1
    bad = tmp_path / "bad.json"
    bad.write_text('{"derivation":{"matrix":[[1,0,0],[0,2,0],[0,0,3]]}}')
    code, out, _ = _run(["validate", str(bad)])
    assert code == 1 and json.loads(out)["error"]["field"] == "n"
    nonder = tmp_path / "nonder.json"
    nonder.write_text('{"n":1,"derivation":{"matrix":[[1,0,0],[0,2,0],[0,0,4]]}}')
    assert _run(["validate", str(nonder)])[0] == 1
    assert _run(["isometry", files["a"], files["c"]])[0] == 1
    assert _run(["chain", files["a"], "--p", "0,0,0", "--q", "1,0,0", "--scale", "0.5"])[0] == 1


def test_numeric_failure_exit_code(files, monkeypatch):
    from heisboundary import cli
    from heisboundary.errors import DegeneratePairing

    def boom(args):
        raise DegeneratePairing("singular pairing")

    monkeypatch.setitem(cli.COMMANDS, "validate", boom)
    code, out, _ = _run(["validate", files["a"]])
    assert code == 2
    assert json.loads(out)["error"]["kind"] == "numeric"
