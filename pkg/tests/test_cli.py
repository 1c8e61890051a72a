import json
import os

import pytest

from ghsdensity.artifacts import sha256_file
from ghsdensity.cli import main


def run(*argv):
    return main([str(a) for a in argv])


def test_smoke_chain_of_subcommands(tmp_path):
    d, c, k = tmp_path / "domain.json", tmp_path / "cover.json", tmp_path / "decomp.json"
    assert run("gen", "--shape", "square", "--h", "0.1", "--out", d) == 0
    assert run("cover", d, "--out", c) == 0
    assert run("decompose", "--m", "3", c, "--C", "2", "--out", k) == 0
    assert sorted(os.listdir(tmp_path)) == ["cover.json", "decomp.json", "domain.json"]
    doc = json.loads(k.read_text())
    assert doc["kind"] == "decomposition"
    assert doc["inputs"]["cover"]["sha256"] == sha256_file(c)
    assert doc["config"]["m"] == 3
    p = tmp_path / "pou.json"
    assert run("pou", k, "--out", p) == 0
    assert json.loads(p.read_text())["report"]["checks"]["sum"]


def test_malformed_json_is_an_input_error(tmp_path, capsys):
    bad = tmp_path / "bad.json"
    bad.write_text('{"vertices": [\n,]}')
    out = tmp_path / "cover.json"
    assert run("cover", bad, "--out", out) == 2
    assert not out.exists()
    assert "line" in capsys.readouterr().err


def test_scale_below_mesh_window(tmp_path, capsys):
    outdir = tmp_path / "run"
    code = run("pipeline", "--shape", "comb", "--h", "0.05", "--m", "7:8", "--samples", "5",
               "--outdir", outdir)
    assert code == 2 and not outdir.exists()
    assert "mesh window" in capsys.readouterr().err


def test_bad_values_and_unknown_keys(tmp_path):
    assert run("gen", "--shape", "square", "--h", "-1") == 2
    assert run("gen", "--shape", "hexagon", "--h", "0.1") == 2
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"shape": "square", "h": 0.1, "colour": "red"}))
    assert run("gen", "--config", cfg) == 2
    cfg.write_text(json.dumps({"shape": "square", "h": "zero"}))
    assert run("gen", "--config", cfg) == 2


def test_config_file_matches_flags(tmp_path):
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"shape": "disk", "h": 0.2}))
    a, b = tmp_path / "a.json", tmp_path / "b.json"
    assert run("gen", "--config", cfg, "--out", a) == 0
    assert run("gen", "--shape", "disk", "--h", "0.2", "--out", b) == 0
    assert a.read_bytes() == b.read_bytes()


def test_qh_and_chain_commands(tmp_path):
    d, c = tmp_path / "domain.json", tmp_path / "cover.json"
    run("gen", "--shape", "disk", "--h", "0.1", "--out", d)
    run("cover", d, "--out", c)
    g = json.loads(d.read_text())
    inner = [v["id"] for v in g["vertices"] if not v["boundary"]]
    q = tmp_path / "qh.json"
    assert run("qh", d, "--from", inner[0], "--to", inner[-1], "--out", q) == 0
    doc = json.loads(q.read_text())
    assert doc["path"][0] == inner[0] and doc["path"][-1] == inner[-1] and doc["distance"] > 0
    boundary = next(v["id"] for v in g["vertices"] if v["boundary"])
    assert run("qh", d, "--from", boundary, "--to", inner[0]) == 2
    cov = json.loads(c.read_text())
    b = cov["cover"]["base_ball"]
    ch = tmp_path / "chain.json"
    assert run("chain", c, "--ball-a", b, "--ball-b", b, "--out", ch) == 0
    assert json.loads(ch.read_text())["chain"]["n_balls"] == 1


@pytest.mark.slow
def test_pipeline_is_byte_deterministic(tmp_path):
    dirs = [tmp_path / "a", tmp_path / "b"]
    codes = [run("pipeline", "--shape", "square", "--h", "0.05", "--m", "3:4", "--samples", "20",
                 "--outdir", d) for d in dirs]
    assert codes[0] == codes[1]
    names = sorted(os.listdir(dirs[0]))
    assert names == sorted(os.listdir(dirs[1]))
    assert {"report.json", "approx.csv", "approx.json", "decomp_m3.json", "pou_m4.json"} <= set(names)
    for n in names:
        assert (dirs[0] / n).read_bytes() == (dirs[1] / n).read_bytes()
