import json

import pytest

from qelastica import __version__
from qelastica.cli import run


def test_hierarchy_n3(capsys):
    assert run(["hierarchy", "--n", "3"]) == 0
    out = capsys.readouterr().out
    assert out.strip() == "n=3: u_t = 1 * u5 + 10 * u0 u3 + 20 * u1 u2 + 30 * u0^2 u1"


def test_hierarchy_range_with_densities(capsys):
    assert run(["hierarchy", "--upto", "2", "--densities"]) == 0
    lines = capsys.readouterr().out.splitlines()
    assert lines == ["n=1: u_t = 1 * u1", "n=1: h = 1/2 * u0^2",
                     "n=2: u_t = 1 * u3 + 6 * u0 u1", "n=2: h = -1/2 * u1^2 + 1 * u0^3"]


def test_psdo(capsys):
    assert run(["psdo", "--power", "1", "--depth", "2"]) == 0
    out = capsys.readouterr().out
    assert "D^-1: 1/2 * u0" in out and "D^-2: -1/4 * u1" in out
    assert run(["psdo", "--power", "2"]) == 2


def test_flow_circle_manifest(tmp_path):
    out = tmp_path / "circle"
    assert run(["flow", "--loop", "circle", "--steps", "0", "--out", str(out)]) == 0
    manifest = json.loads((out / "manifest.json").read_text())
    assert manifest["schema_version"] == 1
    assert manifest["version"] == __version__
    assert manifest["config"]["loop"] == "circle"
    assert manifest["results"]["frames"][0]["energy"] == pytest.approx(0.5, abs=1e-12)
    header = (out / "frame_00000000.csv").read_text().splitlines()[0]
    assert header == "s,x,y,k"


def test_flow_is_deterministic(tmp_path):
    args = ["flow", "--loop", "random", "--n", "64", "--dt", "1e-5", "--steps", "20",
            "--seed", "5"]
    assert run(args + ["--out", str(tmp_path / "a")]) == 0
    assert run(args + ["--out", str(tmp_path / "b")]) == 0
    for name in ("frame_00000000.csv", "frame_00000020.csv", "manifest.json"):
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()


def test_flow_manifest_reproduces_run(tmp_path):
    assert run(["flow", "--loop", "random", "--n", "32", "--steps", "10", "--seed", "3",
                "--out", str(tmp_path / "a")]) == 0
    cfg = json.loads((tmp_path / "a" / "manifest.json").read_text())["config"]
    ini = tmp_path / "run.ini"
    ini.write_text("[flow]\n" + "".join(f"{k} = {v}\n" for k, v in cfg.items()))
    assert run(["flow", "--config", str(ini), "--out", str(tmp_path / "b")]) == 0
    assert (tmp_path / "a" / "frame_00000010.csv").read_bytes() == \
        (tmp_path / "b" / "frame_00000010.csv").read_bytes()


@pytest.mark.parametrize("text", ["[other]\nn = 4\n", "[flow]\nbogus = 1\n", "[flow]\nn = x\n",
                                  "[flow]\nn = 15\n", "not an ini"])
def test_flow_config_errors(tmp_path, text):
    ini = tmp_path / "bad.ini"
    ini.write_text(text)
    assert run(["flow", "--config", str(ini)]) == 2


def test_usage_errors():
    assert run(["flow", "--dt", "-1"]) == 2
    assert run(["nonsense"]) == 2
    assert run(["curve", "wp", "--branch-points=0,1,2"]) == 2  # missing --point


def test_curve_commands(tmp_path, capsys):
    path = tmp_path / "curve.json"
    path.write_text(json.dumps({"genus": 1, "branch_points": [[-1.1, 0], [0.3, 0], [1.6, 0]]}))
    assert run(["curve", "periods", "--curve", str(path)]) == 0
    data = json.loads(capsys.readouterr().out)
    assert data["omega1"][0][0][0] == pytest.approx(-2.2762010943774698, rel=1e-10)
    assert run(["curve", "wp", "--curve", str(path), "--point", "0.3+0.2j",
                "--out", str(tmp_path / "o")]) == 0
    manifest = json.loads((tmp_path / "o" / "manifest.json").read_text())
    assert manifest["command"] == "curve" and len(manifest["results"]["wp"]) == 1
    assert run(["curve", "relations", "--curve", str(path)]) == 2  # genus 3 only


def test_degenerate_curve_is_config_error():
    assert run(["curve", "periods", "--branch-points=1,1,2"]) == 2


def test_curve_relations_genus3(capsys):
    assert run(["curve", "relations", "--branch-points=-2,-1.4,-0.8,-0.1,0.5,1.1,1.9",
                "--points", "3"]) == 0
    assert "15/15 relations pass" in capsys.readouterr().out


def test_spectrum_from_curve(tmp_path):
    out = tmp_path / "scan"
    assert run(["spectrum", "--source", "from-curve", "--branch-points=-1.1,0.3,1.6",
                "--xmin", "-2", "--xmax", "4", "--out", str(out)]) == 0
    manifest = json.loads((out / "manifest.json").read_text())
    res = manifest["results"]
    assert res["simple_edges"] == pytest.approx(res["expected_edges"], abs=1e-6)
    assert (out / "scan.csv").read_text().startswith("xbar,delta,stable\n")
    assert (out / "edges.csv").read_text().startswith("xbar,level,simple,slope\n")


def test_spectrum_file_source(tmp_path):
    samples = tmp_path / "u.csv"
    samples.write_text("\n".join("0.0" for _ in range(64)) + "\n")
    assert run(["spectrum", "--source", "file", "--file", str(samples), "--xmin", "-0.3",
                "--xmax", "1.2", "--out", str(tmp_path / "o")]) == 0
    edges = (tmp_path / "o" / "edges.csv").read_text().splitlines()[1:]
    assert len(edges) == 3  # 0 (simple), 1/4 and 1 (double)
    assert run(["spectrum", "--source", "file"]) == 2
    assert run(["spectrum", "--xmin", "1", "--xmax", "0"]) == 2


def test_verify_genus3(capsys):
    assert run(["verify", "--suite", "genus3", "--points", "3"]) == 0
    out = capsys.readouterr().out
    assert "15/15" in out and "FAIL" not in out


@pytest.mark.parametrize("suite", ["lax", "miura", "finite-gap"])
def test_verify_suites(suite, capsys):
    assert run(["verify", "--suite", suite]) == 0
    assert "all checks pass" in capsys.readouterr().out
