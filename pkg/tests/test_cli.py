import json
import subprocess
import sys

import pytest

from camoforge.cli import main
from camoforge.netlist import read_netlist, validate

from helpers import AOI


@pytest.fixture
def run(capsys):
    def _run(*argv):
        code = main([str(a) for a in argv])
        out, err = capsys.readouterr()
        return code, out, err

    return _run


@pytest.fixture
def bench(tmp_path, run):
    net = tmp_path / "b.camo"
    assert run("gen", "--out", net, "--seed", 42)[0] == 0
    app, sec = tmp_path / "a.camo", tmp_path / "s.json"
    code, out, _ = run("obfuscate", "--in", net, "--out", app, "--secret", sec, "--camo", 16, "--seed", 42)
    assert code == 0
    return net, app, sec, json.loads(out)


def test_gen(tmp_path, run):
    p = tmp_path / "g.camo"
    assert run("--seed", 42, "gen", "--out", p, "--gates", 200, "--inputs", 16, "--outputs", 8)[0] == 0
    n = read_netlist(p)
    assert len(n.gates) == 200 and len(n.inputs) == 16 and len(n.outputs) == 8
    assert validate(n) == []
    q = tmp_path / "h.camo"
    run("--seed", 42, "gen", "--out", q)
    assert p.read_bytes() == q.read_bytes()
    one = tmp_path / "one.camo"
    assert run("gen", "--out", one, "--gates", 1, "--outputs", 1)[0] == 0
    assert len(read_netlist(one).gates) == 1


def test_obfuscate_report(bench):
    _, app, sec, report = bench
    assert report["key_space"] == "3^16 = 43046721"
    assert report["camo_cells"] == 16 and report["gates_before"] == report["gates_after"] == 200
    assert "secret" not in report
    assert len(json.loads(sec.read_text())["camo"]) == 16


def test_obfuscate_identity(tmp_path, run):
    src = tmp_path / "f.camo"
    src.write_text(AOI)
    app, sec = tmp_path / "a.camo", tmp_path / "s.json"
    assert run("obfuscate", "--in", src, "--out", app, "--secret", sec)[0] == 0
    assert read_netlist(app) == read_netlist(src)
    assert all(v in ({}, []) for v in json.loads(sec.read_text()).values())


def test_obfuscate_reveal_and_errors(tmp_path, run):
    src = tmp_path / "f.camo"
    src.write_text(AOI)
    app, sec = tmp_path / "a.camo", tmp_path / "s.json"
    code, out, _ = run("obfuscate", "--in", src, "--out", app, "--secret", sec, "--stuck", "b=1", "--reveal")
    assert code == 0 and json.loads(out)["secret"]["stuck"] == {"b": 1}
    code, _, err = run("obfuscate", "--in", src, "--out", app, "--secret", sec, "--camo-sites", "n2")
    assert code == 2 and "camouflageable" in err
    bad = tmp_path / "bad.camo"
    bad.write_text(".inputs a\n.gate NOT a a\n.end\n")
    assert run("obfuscate", "--in", bad, "--out", app, "--secret", sec)[0] == 2
    assert run("obfuscate", "--in", tmp_path / "missing", "--out", app, "--secret", sec)[0] == 2


def test_usage_errors(run):
    with pytest.raises(SystemExit) as e:
        run("attack")
    assert e.value.code == 1
    with pytest.raises(SystemExit) as e:
        run("frobnicate")
    assert e.value.code == 1
    with pytest.raises(SystemExit) as e:
        run("gen", "--out", "x", "--gates", 0)
    assert e.value.code == 1


def test_attack_small_and_budget(tmp_path, run, bench):
    _, app, sec, _ = bench
    rep = tmp_path / "r.json"
    code, out, _ = run("attack", "--in", app, "--secret", sec, "--out", rep)
    assert code == 0
    full = json.loads(rep.read_text())
    assert full["verified"] is True and full["queries"] <= 64
    assert set(full) == {"queries", "solver_calls", "conflicts", "wall_time_s", "verified", "key"}
    assert "key" not in json.loads(out)
    assert full["key"]["camo"].keys() == json.loads(sec.read_text())["camo"].keys()

    code, out, err = run("attack", "--in", app, "--secret", sec, "--max-queries", 1)
    assert code == 3 and json.loads(out)["verified"] is False and "not verified" in err


def test_attack_one_camo(tmp_path, run):
    src = tmp_path / "n.camo"
    src.write_text(".inputs a b\n.outputs y\n.gate NAND2 y a b\n.end\n")
    app, sec = tmp_path / "a.camo", tmp_path / "s.json"
    run("obfuscate", "--in", src, "--out", app, "--secret", sec, "--camo", 1)
    code, out, _ = run("attack", "--in", app, "--secret", sec, "--reveal")
    rep = json.loads(out)
    assert code == 0 and rep["verified"] and rep["queries"] <= 2
    assert rep["key"]["camo"] == {"y": "NAND"}


def test_simulate(tmp_path, run):
    src = tmp_path / "f.camo"
    src.write_text(AOI)
    sec = tmp_path / "s.json"
    sec.write_text(json.dumps({"stuck": {"b": 1, "c": 1}}))
    vec = tmp_path / "v.txt"
    vec.write_text("\n".join(format(i, "03b") for i in range(8)) + "\n")
    trace = tmp_path / "t.csv"
    assert run("simulate", "--in", src, "--secret", sec, "--vectors", vec, "--out", trace)[0] == 0
    rows = [l.split(",") for l in trace.read_text().splitlines()]
    assert [r[1] for r in rows] == [str(1 - int(r[0][0])) for r in rows]

    empty = tmp_path / "e.txt"
    empty.write_text("")
    code, out, _ = run("simulate", "--in", src, "--vectors", empty)
    assert code == 0 and out == ""

    bad = tmp_path / "b.txt"
    bad.write_text("000\n01\n")
    code, _, err = run("simulate", "--in", src, "--vectors", bad)
    assert code == 2 and "row 2" in err


def test_physics(tmp_path, run):
    recs = [
        {"id": "cmp", "K": 100, "z0": 1000, "z1": 500, "t": 2, "rho0": 0.5, "via_height": 550},
        {"id": "xt", "c_adj": 0, "c_gnd_v": 1e-15, "c_gnd_a": 1e-15, "r_victim": 100, "r_aggressor": 100},
        {"id": "bad", "K": 100, "z0": 1000, "z1": 500, "t": 2, "rho0": 0},
    ]
    inp, out = tmp_path / "p.json", tmp_path / "o.json"
    inp.write_text(json.dumps(recs))
    code, _, err = run("physics", "--in", inp, "--out", out)
    assert code == 0 and "record 2" in err
    res = json.loads(out.read_text())
    assert res[0]["z"] == 600 and res[0]["via_class"] == "StuckAt0"
    assert res[1]["crosstalk_class"] == "NoEffect" and res[1]["k"] == 1.0
    assert res[2]["id"] == "bad" and "rho0" in res[2]["error"]
    inp.write_text(json.dumps([recs[2]]))
    assert run("physics", "--in", inp, "--out", out)[0] == 2


def test_seed_env_fallback(tmp_path, monkeypatch, run):
    a, b, c = tmp_path / "a", tmp_path / "b", tmp_path / "c"
    monkeypatch.setenv("CAMOFORGE_SEED", "7")
    run("gen", "--out", a, "--gates", 30)
    run("gen", "--out", b, "--gates", 30, "--seed", 7)
    monkeypatch.delenv("CAMOFORGE_SEED")
    run("gen", "--out", c, "--gates", 30)
    assert a.read_bytes() == b.read_bytes() != c.read_bytes()
    monkeypatch.setenv("CAMOFORGE_SEED", "x")
    assert run("gen", "--out", a)[0] == 1


def test_module_entry_point(tmp_path):
    p = tmp_path / "g.camo"
    cmd = [sys.executable, "-m", "camoforge", "gen", "--out", str(p), "--gates", "5", "--outputs", "2"]
    r = subprocess.run(cmd, capture_output=True, text=True)
    assert r.returncode == 0 and len(read_netlist(p).gates) == 5
