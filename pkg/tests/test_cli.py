import json
import subprocess
import sys
from importlib.resources import files

import pytest

from tileforge import __version__
from tileforge.cli import main

BRICK = str(files("tileforge") / "data" / "brick2d.seed")


def _write(path, data):
    path.write_text(json.dumps(data))
    return str(path)


@pytest.fixture
def m36(tmp_path):
    return _write(tmp_path / "m36.json", {"modulus": 36, "A": list(range(0, 36, 6)), "B": [0, 4, 8, 9, 13, 17]})


def _report(path):
    return json.loads(path.read_text())


def test_verify_ok(tmp_path, m36):
    rep = tmp_path / "r.json"
    assert main(["verify", "--tiling", m36, "--report", str(rep)]) == 0
    body = _report(rep)
    assert body["tiling"]["direct"] and body["tiling"]["sands"] and body["tiling"]["cyclotomic"]
    assert body["version"] == __version__ and body["config"]["command"] == "verify"
    assert "rng_seed" in body


def test_verify_broken_writes_witness(tmp_path):
    broken = _write(tmp_path / "broken.json", {"modulus": 4, "A": [0, 1], "B": [0, 1]})
    rep = tmp_path / "r.json"
    assert main(["verify", "--tiling", broken, "--report", str(rep)]) == 1
    wit = json.loads((tmp_path / "r.witness.json").read_text())
    assert wit["doubly_covered_residue"] == 1


def test_verify_method_subset(tmp_path, m36):
    rep = tmp_path / "r.json"
    assert main(["verify", "--tiling", m36, "--methods", "sands", "--report", str(rep)]) == 0
    assert set(_report(rep)["tiling"]) == {"modulus", "verdict", "sands", "witness"}


def test_usage_errors(tmp_path, m36):
    assert main(["verify", "--tiling", str(tmp_path / "missing.json")]) == 2
    bad = tmp_path / "bad.json"
    bad.write_text("{not json")
    assert main(["verify", "--tiling", str(bad)]) == 2
    assert main(["verify", "--tiling", m36, "--methods", "nope"]) == 2
    assert main(["verify", "--tiling", m36, "--workers", "0"]) == 2
    assert main(["no-such-command"]) == 2
    assert main(["ckp-search", "--modulus", "41"]) == 2


def test_workers_environment(tmp_path, m36, monkeypatch):
    monkeypatch.setenv("TILEFORGE_THREADS", "0")
    assert main(["verify", "--tiling", m36]) == 2
    monkeypatch.setenv("TILEFORGE_THREADS", "4")
    assert main(["verify", "--tiling", m36, "--report", str(tmp_path / "r.json")]) == 0


def test_reports_are_byte_identical(tmp_path, m36):
    a, b = tmp_path / "a.json", tmp_path / "b.json"
    main(["keller", "--tiling", m36, "--report", str(a)])
    main(["keller", "--tiling", m36, "--report", str(b)])
    assert a.read_bytes().replace(b"a.json", b"") == b.read_bytes().replace(b"b.json", b"")


def test_keller(tmp_path, m36):
    rep = tmp_path / "k.json"
    assert main(["keller", "--tiling", m36, "--report", str(rep)]) == 0
    body = _report(rep)
    assert body["ikp1"]["side"] == "A"
    assert body["ikp2_B"] is None and body["ikp2_A"]["base"] == 0
    assert body["splitting"] == {"1": "ii", "2": "ii"}
    assert body["ckp_A"] == "HOLDS"


def test_cuboid_and_fiber(tmp_path):
    good = _write(tmp_path / "g.json", {"modulus": 12, "elements": [0, 4, 6, 10]})
    bad = _write(tmp_path / "b.json", {"modulus": 12, "elements": [0, 1]})
    rep = tmp_path / "r.json"
    assert main(["cuboid-test", "--set", good, "--report", str(rep)]) == 0
    assert _report(rep)["divisible"] and _report(rep)["polynomial_check"]
    assert main(["cuboid-test", "--set", bad, "--report", str(rep)]) == 1
    assert _report(rep)["witness"]["value"] != 0
    assert main(["fiber-solve", "--set", good, "--report", str(rep)]) == 0
    assert _report(rep)["solvable"]
    assert main(["fiber-solve", "--set", bad, "--report", str(rep)]) == 1


def test_convert_round_trip(tmp_path):
    src = _write(tmp_path / "s.json", {"modulus": 36, "elements": [0, 6, 13]})
    lat = tmp_path / "s.lattice"
    back = tmp_path / "back.json"
    assert main(["convert", "--lift", "--input", src, "--output", str(lat), "--report", str(tmp_path / "r1")]) == 0
    assert lat.read_text().splitlines()[1:] == ["0 0", "2 6", "1 1"]
    assert main(["convert", "--project", "--input", str(lat), "--output", str(back),
                 "--report", str(tmp_path / "r2")]) == 0
    assert json.loads(back.read_text()) == {"modulus": 36, "elements": [0, 6, 13]}


def test_cm(tmp_path):
    src = _write(tmp_path / "s.json", {"modulus": 36, "elements": list(range(0, 36, 6))})
    rep = tmp_path / "r.json"
    assert main(["cm", "--set", src, "--complement", "--report", str(rep)]) == 0
    assert _report(rep)["standard_complement"] == [0, 4, 8, 9, 13, 17]
    src2 = _write(tmp_path / "t.json", {"elements": [0, 1, 2, 4, 5, 6]})
    assert main(["cm", "--set", src2, "--modulus", "24", "--report", str(rep)]) == 1
    assert main(["cm", "--set", src2, "--report", str(rep)]) == 2


def test_survey_and_ckp(tmp_path):
    rows = tmp_path / "rows.jsonl"
    rep = tmp_path / "r.json"
    assert main(["survey", "--modulus", "12", "--out", str(rows), "--report", str(rep)]) == 0
    lines = rows.read_text().splitlines()
    assert len(lines) == _report(rep)["survey"]["rows"] > 0
    assert main(["ckp-search", "--modulus", "12", "--report", str(rep)]) == 0
    assert _report(rep)["status"] == "NONE"


def test_construct_rejects_partial_seed(tmp_path):
    rep = tmp_path / "c.json"
    code = main(["construct", "--primes", "2,3", "--seed", BRICK, "--out", str(tmp_path / "out"),
                 "--report", str(rep)])
    assert code == 1
    assert _report(rep)["code"] == "SHARED_FACE"
    assert json.loads((tmp_path / "c.witness.json").read_text())["code"] == "SHARED_FACE"


def test_slice_dump(tmp_path):
    out = tmp_path / "s.csv"
    assert main(["slice-dump", "--tiling", BRICK, "--out", str(out), "--report", str(tmp_path / "r.json")]) == 0
    assert out.read_text().splitlines() == ["x,y,width,height", "0,0,2,2", "0,2,2,2", "2,1,2,2", "2,3,2,2"]
    assert main(["slice-dump", "--tiling", BRICK, "--dims", "1,3"]) == 2


def test_console_script_help():
    res = subprocess.run([sys.executable, "-m", "tileforge.cli", "--help"], capture_output=True, text=True)
    assert res.returncode == 0
    for name in ("verify", "keller", "cuboid-test", "fiber-solve", "convert", "cm", "construct", "survey",
                 "ckp-search", "slice-dump"):
        assert name in res.stdout
    res = subprocess.run([sys.executable, "-m", "tileforge.cli", "construct", "--help"], capture_output=True, text=True)
    for flag in ("--primes", "--seed", "--samples", "--rng-seed", "--allow-large", "--workers"):
        assert flag in res.stdout
