import csv
import json
import math
from pathlib import Path

import numpy as np
import pytest

import cgholo
from cgholo.cli import main
from cgholo.config import ConfigError, load
from cgholo.report import Claim, dumps, write_report

CONFIGS = Path(cgholo.__file__).parent / "configs"
BUNDLED = {"line_h2": 0, "circle_cg_h2": 0, "circle_arclength_h2": 1}


def run(cfg, out, *extra):
    return main(["run", str(cfg), "--out", str(out), *extra])


@pytest.mark.parametrize("name,code", list(BUNDLED.items()))
def test_bundled_exit_codes_and_determinism(tmp_path, name, code):
    cfg = CONFIGS / f"{name}.cfg"
    assert run(cfg, tmp_path / "a") == code
    assert run(cfg, tmp_path / "b") == code
    a = (tmp_path / "a" / "report.json").read_bytes()
    assert a == (tmp_path / "b" / "report.json").read_bytes()
    assert (tmp_path / "a" / "samples.csv").read_bytes() == (tmp_path / "b" / "samples.csv").read_bytes()
    doc = json.loads(a)
    assert doc["schema_version"] == 1 and doc["config"] == name
    assert doc["all_pass"] is (code == 0)
    assert doc["claim_count"] == sum(len(j["claims"]) for j in doc["jobs"])
    for job in doc["jobs"]:
        for c in job["claims"]:
            assert set(c) == {"name", "paper_anchor", "value", "threshold", "comparison", "pass", "details"}


def test_line_report_contents(tmp_path):
    run(CONFIGS / "line_h2.cfg", tmp_path)
    doc = json.loads((tmp_path / "report.json").read_text())
    claims = {c["name"]: c for j in doc["jobs"] for c in j["claims"]}
    assert {"tension_zero", "sff_zero", "pullback_zero", "energy_c1", "energy_e_ren"} <= set(claims)
    assert all(c["pass"] for c in claims.values())


def test_arclength_report_names_failures(tmp_path):
    run(CONFIGS / "circle_arclength_h2.cfg", tmp_path)
    doc = json.loads((tmp_path / "report.json").read_text())
    failed = {c["name"] for j in doc["jobs"] for c in j["claims"] if not c["pass"]}
    assert {"sff_slope", "pullback_decay"} <= failed
    verify = next(j for j in doc["jobs"] if j["kind"] == "verify")
    sff = next(c for c in verify["claims"] if c["name"] == "sff_slope")
    for rec in sff["details"]["mixed_sff"]:
        np.testing.assert_allclose(rec["extracted_st"], rec["predicted_st"], rtol=1e-4, atol=1e-8)


def test_outputs_and_plots(tmp_path):
    assert run(CONFIGS / "circle_cg_h2.cfg", tmp_path, "--plots") == 0
    rows = list(csv.reader(open(tmp_path / "samples.csv")))
    assert rows[0] == ["job", "quantity", "t", "s", "value"]
    assert {r[1] for r in rows[1:]} >= {"tension", "sff", "pullback", "gamma_error", "cg_residual"}
    traj = list(csv.reader(open(tmp_path / "trajectory_b_geodesic.csv")))
    assert traj[0][:3] == ["t", "gamma1", "gamma2"] and len(traj) == 62
    svgs = sorted(p.name for p in (tmp_path / "plots").iterdir())
    assert "a_verify_tension.svg" in svgs and "b_geodesic_trajectory.svg" in svgs
    assert (tmp_path / "plots" / "a_verify_tension.svg").read_text().startswith("<svg")


def test_ladder_depth_option(tmp_path):
    assert run(CONFIGS / "circle_cg_h2.cfg", tmp_path, "--ladder-depth", "6") == 0
    doc = json.loads((tmp_path / "report.json").read_text())
    verify = next(j for j in doc["jobs"] if j["kind"] == "verify")
    assert len(verify["data"]["ladder"]) == 6


def write(tmp_path, text, name="job.cfg"):
    p = tmp_path / name
    p.write_text(text)
    return p


def test_bad_config_exits_2(tmp_path, capsys):
    cfg = write(tmp_path, "[metric]\nbuiltin = flat\n[bogus]\nx = 1\n")
    assert run(cfg, tmp_path / "out") == 2
    err = capsys.readouterr().err.strip().splitlines()
    assert len(err) == 1 and err[0].startswith("cgholo: error:") and "bogus" in err[0]
    assert run(tmp_path / "missing.cfg", tmp_path / "out") == 2


def test_bad_expression_exits_2(tmp_path, capsys):
    cfg = write(
        tmp_path,
        "[metric]\nbuiltin = flat\n[curve]\ngamma1 = t +* 2\ngamma2 = 0\n[job a]\nkind = report\n",
    )
    assert run(cfg, tmp_path / "out") == 2
    assert "cgholo: error:" in capsys.readouterr().err


def test_causal_mismatch_exits_2(tmp_path):
    cfg = write(
        tmp_path,
        "[metric]\nbuiltin = minkowski\n[curve]\ngamma1 = 0\ngamma2 = t\n"
        "[ambient]\nmode = ExactAdS\n[domain]\ntype = AdS2\n[job a]\nkind = verify\n",
    )
    assert run(cfg, tmp_path / "out") == 2


def test_ads_config_runs(tmp_path):
    cfg = write(
        tmp_path,
        "[metric]\nbuiltin = minkowski\n[curve]\ngamma1 = 2*t/(1-t^2)\ngamma2 = (1+t^2)/(1-t^2)\n"
        "t_samples = -0.3, 0.2\n[ambient]\nmode = ExactAdS\n[domain]\ntype = AdS2\n"
        "[job a]\nkind = verify\nladder_min = 5\nladder_max = 12\n[job b]\nkind = geodesic\nt_span = -0.5, 0.5\n",
    )
    assert run(cfg, tmp_path / "out") == 0


def test_custom_metric_curvature_job(tmp_path):
    cfg = write(
        tmp_path,
        "[metric]\ndimension = 3\nvariables = a, b, c\n"
        "g11 = 4/(1+a^2+b^2+c^2)^2\ng22 = 4/(1+a^2+b^2+c^2)^2\ng33 = 4/(1+a^2+b^2+c^2)^2\n"
        "[job k]\nkind = curvature\npoints = 20\n",
    )
    assert run(cfg, tmp_path / "out", "--seed", "3") == 0
    doc = json.loads((tmp_path / "out" / "report.json").read_text())
    np.testing.assert_allclose(doc["jobs"][0]["data"]["scalar_curvature"], 6.0, atol=1e-9)


def test_config_errors(tmp_path):
    with pytest.raises(ConfigError):
        load(write(tmp_path, "[metric]\nbuiltin = flat\n"))
    with pytest.raises(ConfigError):
        load(write(tmp_path, "[metric]\nbuiltin = flat\n[job a]\nkind = dance\n"))
    with pytest.raises(ConfigError):
        load(write(tmp_path, "[metric]\nbuiltin = flat\n[job a]\nkind = verify\n"))
    with pytest.raises(ConfigError):
        load(write(tmp_path, "[metric]\nbuiltin = nowhere\n[job a]\nkind = curvature\n"))
    with pytest.raises(ConfigError):
        load(write(tmp_path, "[metric]\ndimension = 2\ng12 = 0\n[job a]\nkind = curvature\n"))


def test_jobs_sorted_by_name(tmp_path):
    cfg = load(write(tmp_path, "[metric]\nbuiltin = flat\ndimension = 3\n[job z]\nkind = curvature\n[job b]\nkind = curvature\n"))
    assert [j.name for j in cfg.jobs] == ["b", "z"]


def test_override_in_config(tmp_path):
    cfg = load(
        write(
            tmp_path,
            "[metric]\ng11 = 1\ng22 = sin(y1)^2\np11 = 1/2\np22 = sin(y1)^2/2\n[job a]\nkind = curvature\n",
        )
    )
    assert cfg.chart.schouten_exprs is not None


# -- report serialisation ---------------------------------------------------------------


def test_dumps_is_canonical():
    text = dumps({"b": 1.0, "a": [True, None, float("nan"), 2, 0.1]})
    assert text.index('"a"') < text.index('"b"')
    assert "null" in text and "true" in text and "0.10000000000000001" in text
    assert json.loads(text)["b"] == 1.0
    assert dumps(3.0) == "3.0" and dumps(float("inf")) == "null"
    with pytest.raises(TypeError):
        dumps(object())


def test_write_report(tmp_path):
    c = Claim("x", "anchor", 0.5, 1.0, "<", True, {"k": math.pi})
    write_report(tmp_path / "r.json", "cfg", [{"name": "j", "kind": "report", "claims": [c.to_dict()], "data": {}}])
    doc = json.loads((tmp_path / "r.json").read_text())
    assert doc["all_pass"] is True and doc["claim_count"] == 1
    assert doc["jobs"][0]["claims"][0]["details"]["k"] == math.pi
