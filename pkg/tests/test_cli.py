import io
import json

import pytest

from k3twistor.cli import main


def run(capsys, monkeypatch, argv, stdin=None):
    if stdin is not None:
        monkeypatch.setattr("sys.stdin", io.StringIO(stdin))
    code = main(argv)
    out = capsys.readouterr()
    return code, out.out, out.err


def test_isotropic_census(capsys, monkeypatch):
    code, out, _ = run(capsys, monkeypatch, ["forms", "isotropic-census", "--p", "3", "--sigma0", "1"])
    rep = json.loads(out)
    assert code == 0 and rep["results"]["count"] == 20 and rep["pass"]
    assert set(rep) == {"command", "config", "statement", "results", "pass"}


def test_classify_from_flags_and_stdin(capsys, monkeypatch):
    code, out, _ = run(capsys, monkeypatch, ["forms", "classify", "--p", "5", "--sigma0", "2",
                                            "--kind", "neutral"])
    assert code == 0 and json.loads(out)["results"]["classification"] == "neutral"
    gram = {"p": 3, "gram": [[0, 1], [1, 0]]}
    code, out, _ = run(capsys, monkeypatch, ["forms", "classify"], stdin=json.dumps(gram))
    assert code == 0 and json.loads(out)["results"]["classification"] == "neutral"
    odd = {"p": 3, "gram": [[1, 0, 0], [0, 1, 0], [0, 0, 1]]}
    code, _, err = run(capsys, monkeypatch, ["forms", "classify"], stdin=json.dumps(odd))
    assert code == 2 and err


def test_twistor_commands(capsys, monkeypatch):
    base = ["--p", "3", "--sigma0", "2", "--m", "4", "--sigma", "1"]
    code, out, _ = run(capsys, monkeypatch, ["twistor", "fiber", *base])
    rep = json.loads(out)
    assert code == 0 and rep["results"]["expected_components"] == 3
    code, out, _ = run(capsys, monkeypatch, ["twistor", "census", *base])
    assert code == 0 and json.loads(out)["pass"]
    code, out, _ = run(capsys, monkeypatch, ["twistor", "lift", *base, "--index", "5"])
    rep = json.loads(out)
    assert code == 0 and rep["results"]["artin"] in (1, 2) and "artifact" in rep
    # the fiber artifact round-trips through --in style stdin
    code, out2, _ = run(capsys, monkeypatch, ["twistor", "fiber"], stdin=out)
    assert code == 0


def test_crystal_pipeline(capsys, monkeypatch):
    code, built, _ = run(capsys, monkeypatch, ["crystal", "build", "--p", "3", "--sigma0", "1",
                                              "--m", "4", "--N", "8"])
    assert code == 0
    code, out, _ = run(capsys, monkeypatch, ["crystal", "verify"], stdin=built)
    assert code == 0 and json.loads(out)["results"]["supersingular"]
    code, out, _ = run(capsys, monkeypatch, ["crystal", "tate"], stdin=built)
    assert json.loads(out)["results"]["disc_valuation"] == 2
    code, twisted, _ = run(capsys, monkeypatch, ["crystal", "twist", "--seed", "1"], stdin=built)
    rep = json.loads(twisted)
    assert code == 0 and rep["results"]["artin"] == 2 and rep["results"]["transcendental"]
    code, out, _ = run(capsys, monkeypatch, ["crystal", "compare"], stdin=twisted)
    rep = json.loads(out)
    assert code == 0 and rep["results"]["case"] == "transcendental" and rep["results"]["isomorphic"]
    code, twisted, _ = run(capsys, monkeypatch, ["crystal", "twist", "--kind", "essentially-trivial"],
                           stdin=built)
    code, out, _ = run(capsys, monkeypatch, ["crystal", "compare"], stdin=twisted)
    rep = json.loads(out)
    assert code == 0 and rep["results"]["case"] == "essentially-trivial" and rep["pass"]


def test_controls_fail_with_exit_one(capsys, monkeypatch):
    for control in ("unimodular", "scaled-gram"):
        code, built, _ = run(capsys, monkeypatch, ["crystal", "build", "--p", "3", "--sigma0", "1",
                                                  "--m", "2", "--control", control])
        code, out, _ = run(capsys, monkeypatch, ["crystal", "verify", "--format", "csv"], stdin=built)
        assert code == 1
        assert out.startswith("key,value\n") and "pass,False" in out


def test_precision_and_usage_exit_codes(capsys, monkeypatch):
    code, _, err = run(capsys, monkeypatch, ["crystal", "build", "--p", "3", "--sigma0", "1",
                                            "--m", "2", "--N", "1"])
    assert code == 3 and "precision" in err
    code, _, _ = run(capsys, monkeypatch, ["crystal", "build", "--p", "3"])
    assert code == 2
    code, _, _ = run(capsys, monkeypatch, ["crystal", "verify"], stdin="not json")
    assert code == 2
    code, _, _ = run(capsys, monkeypatch, ["crystal", "verify"], stdin="")
    assert code == 2
    with pytest.raises(SystemExit) as e:
        main(["twistor", "bogus"])
    assert e.value.code == 2


def test_output_is_byte_identical_across_runs(capsys, monkeypatch):
    argv = ["crystal", "build", "--p", "3", "--sigma0", "2", "--m", "4", "--seed", "7"]
    a = run(capsys, monkeypatch, argv)[1]
    b = run(capsys, monkeypatch, argv)[1]
    assert a == b
    argv = ["twistor", "census", "--p", "3", "--sigma0", "2", "--m", "4"]
    assert run(capsys, monkeypatch, argv)[1] == run(capsys, monkeypatch, argv)[1]


def test_out_flag_and_timing(capsys, monkeypatch, tmp_path):
    path = tmp_path / "rep.json"
    code, out, _ = run(capsys, monkeypatch, ["forms", "isotropic-census", "--p", "5", "--sigma0", "1",
                                            "--out", str(path), "--timing"])
    assert code == 0 and out == ""
    rep = json.loads(path.read_text())
    assert rep["pass"] and "seconds" in rep


def test_suite(capsys, monkeypatch):
    code, out, _ = run(capsys, monkeypatch, ["suite"])
    rep = json.loads(out)
    assert code == 0 and all(rep["results"].values())
