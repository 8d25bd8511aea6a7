import json
import subprocess
import sys

import pytest

from hyperform.cli import main


def run(capsys, *argv):
    code = main(list(argv))
    out, err = capsys.readouterr()
    return code, out, err


@pytest.fixture
def delta1(tmp_path, capsys):
    path = tmp_path / "d1.json"
    code, _, _ = run(capsys, "delta", "--n", "1", "--out", str(path))
    assert code == 0
    return str(path)


def test_delta_envelope(capsys):
    code, out, _ = run(capsys, "delta", "--n", "2")
    doc = json.loads(out)
    assert code == 0
    assert doc["hyperform"]["n"] == 2 and doc["hyperform"]["support"]["kind"] == "point"
    assert doc["provenance"]["backend"] in ("numpy", "cython")


def test_pair_delta(capsys, delta1):
    code, out, _ = run(capsys, "pair", "--hyper", delta1, "--density", '{"omega": "cos(x1)"}')
    doc = json.loads(out)
    assert code == 0
    assert doc["value"][0] == pytest.approx(1.0, abs=1e-9)
    assert doc["error"] < 1e-8 and doc["resolution"] >= 2


def test_pair_accepts_envelope(capsys, tmp_path):
    code, out, _ = run(capsys, "delta", "--n", "1")
    env = tmp_path / "env.json"
    env.write_text(out)
    code, out, _ = run(capsys, "pair", "--hyper", str(env), "--density", '{"omega": "exp(x1)"}')
    assert json.loads(out)["value"][0] == pytest.approx(1.0, abs=1e-9)


def test_deriv_and_mult(capsys, delta1, tmp_path):
    dpath = tmp_path / "dd.json"
    assert run(capsys, "deriv", "--i", "1", "--hyper", delta1, "--out", str(dpath))[0] == 0
    _, out, _ = run(capsys, "pair", "--hyper", str(dpath), "--density", '{"omega": "exp(3*x1)"}')
    assert json.loads(out)["value"][0] == pytest.approx(-3.0, abs=1e-8)
    mpath = tmp_path / "m.json"
    assert run(capsys, "mult", "--f", "x1 + 2", "--hyper", delta1, "--out", str(mpath))[0] == 0
    _, out, _ = run(capsys, "pair", "--hyper", str(mpath), "--density", '{"omega": "exp(x1)"}')
    assert json.loads(out)["value"][0] == pytest.approx(2.0, abs=1e-9)


def test_bv_pair_with_cutoff(capsys, tmp_path):
    p = tmp_path / "b.json"
    code, _, _ = run(capsys, "bv", "--f=-1/(2*pi*i*z1)", "--cone", '{"etas": [[1.0]]}', "--out", str(p))
    assert code == 0
    _, out, _ = run(capsys, "pair", "--hyper", str(p), "--density", '{"omega": "cos(x1)"}',
                    "--cutoff", '{"kind": "box", "inner": 1.0, "outer": 2.0}')
    # b+ alone pairs to half the jump, cos being even
    assert json.loads(out)["value"][0] == pytest.approx(0.5, abs=1e-8)


def test_extprod_and_fiber(capsys, delta1, tmp_path):
    p = tmp_path / "p.json"
    code, _, _ = run(capsys, "extprod", "--hyper", delta1, "--hyper", delta1, "--mode", "stein", "--out", str(p))
    assert code == 0
    code, out, _ = run(capsys, "fiber-int", "--hyper", str(p), "--d", "1", "--density", '{"omega": "exp(x1)"}')
    doc = json.loads(out)
    assert code == 0 and doc["value"][0] == pytest.approx(1.0, abs=1e-8)
    assert doc["base"]["n"] == 1


def test_restrict_and_embed(capsys):
    code, out, _ = run(capsys, "restrict", "--f", "z1+z2", "--cone", '{"etas": [[1, 1], [-1, 1]]}')
    assert code == 0 and json.loads(out)["hyperform"]["n"] == 1
    code, out, _ = run(capsys, "embed", "--f", "exp(x1)", "--n", "1")
    assert code == 0 and json.loads(out)["hyperform"]["support"]["kind"] == "all"


def test_residue(capsys):
    code, out, _ = run(capsys, "residue", "--h", "3 + z1*z2", "--n", "2")
    assert code == 0 and json.loads(out)["value"][0] == pytest.approx(3.0, abs=1e-10)


def test_check_exit_codes(capsys, delta1, tmp_path):
    code, out, _ = run(capsys, "check", "--hyper", delta1)
    assert code == 0 and json.loads(out)["ok"] is True
    bad = {"covering": {"dim": 1, "kind": "point"}, "bidegree": [0, 1],
           "sigma01": {"dim": 1, "basis": "complex", "terms": [{"coeff": "zb1", "dz": [], "dzbar": []}]}}
    code, out, _ = run(capsys, "check", "--cochain", json.dumps(bad))
    assert code == 4 and json.loads(out)["ok"] is False


def test_error_exit_codes(capsys, tmp_path):
    code, _, err = run(capsys, "embed", "--f", "1 +", "--n", "1")
    assert code == 2 and json.loads(err)["error"] == "ParseError"
    code, _, err = run(capsys, "delta", "--n", "0")
    assert code == 3
    p = tmp_path / "e.json"
    run(capsys, "embed", "--f", "1", "--n", "1", "--out", str(p))
    code, _, err = run(capsys, "pair", "--hyper", str(p), "--density", '{"omega": "1"}')
    assert code == 3 and json.loads(err)["error"] == "SupportNotCompact"


def test_deterministic_output(capsys, delta1):
    args = ("pair", "--hyper", delta1, "--density", '{"omega": "cos(x1)"}', "--seed", "7")
    _, a, _ = run(capsys, *args)
    _, b, _ = run(capsys, *args)
    assert a == b


def test_calibrate_table(capsys):
    code, out, _ = run(capsys, "calibrate")
    rows = json.loads(out)["table"]
    assert code == 0
    final = {}
    for r in rows:
        final[r["example"]] = r["abs_error"]
    assert all(e < 1e-8 for e in final.values())


def test_console_entry_point():
    r = subprocess.run([sys.executable, "-m", "hyperform.cli", "residue", "--h", "exp(z1)", "--n", "1"],
                       capture_output=True, text=True, check=False)
    assert r.returncode == 0
    assert json.loads(r.stdout)["value"][0] == pytest.approx(1.0, abs=1e-10)
