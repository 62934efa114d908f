import csv
import io
import json

import numpy as np
import pytest

from isoslice.cli import EXIT_FAIL, EXIT_MALFORMED, EXIT_OK, main
from isoslice.convex_bodies import gauge
from isoslice.io import body_from_dict, dump_json
from isoslice.report import Report


def _run(capsys, *argv):
    code = main(list(argv))
    out, err = capsys.readouterr()
    return code, out, err


# --- gen -------------------------------------------------------------------------

def test_gen_cube(capsys):
    code, out, _ = _run(capsys, "gen", "cube:3")
    assert code == EXIT_OK
    d = json.loads(out)
    assert d["kind"] == "box" and d["half_widths"] == [1.0, 1.0, 1.0]
    assert list(d) == sorted(d)


def test_gen_random_vpoly_deterministic(capsys):
    a = _run(capsys, "gen", "random-vpoly:2:8", "--seed", "5")[1]
    b = _run(capsys, "gen", "random-vpoly:2:8", "--seed", "5")[1]
    c = _run(capsys, "gen", "random-vpoly:2:8", "--seed", "6")[1]
    assert a == b and a != c
    K = body_from_dict(json.loads(a))
    V = np.asarray(json.loads(a)["vertices"])
    assert np.all(gauge(K, V) <= 1 + 1e-12)


def test_gen_lp(capsys):
    K = body_from_dict(json.loads(_run(capsys, "gen", "lp:3:1.5")[1]))
    assert gauge(K, np.eye(3)[:1])[0] == pytest.approx(1.0)


@pytest.mark.parametrize("spec", ["cube", "cube:x", "lp:3:0.5", "random-hpoly:3:5", "torus:3"])
def test_gen_bad_spec(capsys, spec):
    code, _, err = _run(capsys, "gen", spec)
    assert code == EXIT_MALFORMED and "isoslice:" in err


def test_gen_refuses_csv(capsys):
    assert _run(capsys, "gen", "cube:2", "--format", "csv")[0] == EXIT_MALFORMED


# --- render ----------------------------------------------------------------------

def test_render_empty_is_header_only(capsys):
    code, out, _ = _run(capsys, "render")
    assert code == EXIT_OK
    assert out == "id,body,check,passed,quantity,value,std_error\r\n"


def test_render_sorts_and_flags_failure(capsys, tmp_path):
    a = Report("lem-2.2", "cube:3", values={"x": 1.5})
    a.check("ok", True)
    b = Report("eq3", "n<=60", values={"k": 3})
    b.check("bad", False, "detail")
    p = tmp_path / "r.json"
    p.write_text(dump_json({"reports": [a.to_dict(), b.to_dict()]}))
    code, out, _ = _run(capsys, "render", str(p))
    assert code == EXIT_FAIL
    rows = list(csv.reader(io.StringIO(out)))
    assert rows[1][:4] == ["eq3", "n<=60", "bad", "False"]
    assert rows[2][0] == "lem-2.2" and rows[2][5] == "1.5"


def test_render_schema_mismatch(capsys, tmp_path):
    p = tmp_path / "r.json"
    p.write_text('[{"id": "eq3"}]')
    code, _, err = _run(capsys, "render", str(p))
    assert code == EXIT_MALFORMED and "schema" in err


def test_render_bad_json_reports_line(capsys, tmp_path):
    p = tmp_path / "r.json"
    p.write_text('{\n  "reports": [,]\n}')
    code, _, err = _run(capsys, "render", str(p))
    assert code == EXIT_MALFORMED and "line 2" in err


# --- verify ----------------------------------------------------------------------

def test_verify_exact_ids(capsys):
    code, out, _ = _run(capsys, "verify", "--ids", "eq4,lem-2.4", "--seed", "0")
    assert code == EXIT_OK
    d = json.loads(out)
    assert d["passed"] and {r["id"] for r in d["reports"]} == {"eq4", "lem-2.4"}


def test_verify_unknown_id(capsys):
    code, _, err = _run(capsys, "verify", "--ids", "thm-9.9", "--seed", "0")
    assert code == EXIT_MALFORMED and "thm-9.9" in err


def test_verify_needs_seed(capsys):
    assert _run(capsys, "verify", "--ids", "eq4")[0] == EXIT_MALFORMED


def test_verify_malformed_corpus(capsys, tmp_path):
    p = tmp_path / "c.json"
    p.write_text(json.dumps({"bodies": [{"kind": "box", "half_widths": [1, 1], "colour": "red"}]}))
    code, _, err = _run(capsys, "verify", "--ids", "thm-1.2", "--seed", "0", "--corpus", str(p))
    assert code == EXIT_MALFORMED and "colour" in err


def test_verify_ball_corpus(capsys, tmp_path):
    p = tmp_path / "c.json"
    p.write_text(json.dumps({"bodies": [{"kind": "ball", "dim": 3, "label": "ball3"}]}))
    code, out, _ = _run(capsys, "verify", "--ids", "thm-1.2", "--seed", "1", "--samples", "20000",
                        "--corpus", str(p))
    assert code == EXIT_OK
    rep = json.loads(out)["reports"][0]
    assert rep["body"] == "ball3" and rep["values"]["d_G"]["value"] <= 1.05


def test_verify_csv_to_file(capsys, tmp_path):
    out = tmp_path / "r.csv"
    code, stdout, _ = _run(capsys, "verify", "--ids", "eq3", "--seed", "0", "--format", "csv",
                           "--out", str(out))
    assert code == EXIT_OK and stdout == ""
    assert out.read_bytes().startswith(b"id,body,check,passed")


# --- other commands --------------------------------------------------------------

def test_lk_cube(capsys):
    code, out, _ = _run(capsys, "lk", "--body", "cube:2", "--seed", "1", "--samples", "50000")
    assert code == EXIT_OK
    assert json.loads(out)["values"]["L_K"]["value"] == pytest.approx(12 ** -0.5, rel=0.03)


def test_kf_indicator(capsys, tmp_path):
    p = tmp_path / "f.json"
    p.write_text(json.dumps({"type": "indicator", "body": {"kind": "box", "half_widths": [1, 1]}}))
    code, out, _ = _run(capsys, "kf", "--density", str(p), "--seed", "0", "--samples", "50000")
    assert code == EXIT_OK
    d = json.loads(out)
    assert d["values"]["radial_max"] / d["values"]["radial_min"] == pytest.approx(2 ** 0.5, rel=1e-6)


def test_near_origin_hypothesis_failure_exit(capsys):
    code, out, _ = _run(capsys, "near-origin", "--body", "cube:3", "--gamma", "0.5", "--beta", "1.1",
                        "--delta", "1", "--seed", "0", "--samples", "2000")
    assert code == EXIT_FAIL
    assert json.loads(out)["values"]["hypothesis"] == "volume"


def test_project_rejects_full_subspace(capsys):
    code, _, err = _run(capsys, "project", "--body", "cube:2", "--subspace", "random:2:0", "--seed", "0",
                        "--samples", "5000")
    assert code == EXIT_MALFORMED and "proper subspace" in err


def test_config_file_and_unknown_constant(capsys, tmp_path):
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"seed": 3, "constants": {"c_alpha": 50.0}}))
    code, out, _ = _run(capsys, "verify", "--ids", "eq4", "--config", str(cfg))
    assert code == EXIT_OK and json.loads(out)["constants"]["c_alpha"]["value"] == 50.0
    cfg.write_text(json.dumps({"constants": {"c_beta": 1.0}}))
    assert _run(capsys, "verify", "--ids", "eq4", "--seed", "0", "--config", str(cfg))[0] == EXIT_MALFORMED


def test_bad_option_exit_code(capsys):
    with pytest.raises(SystemExit) as exc:
        main(["verify", "--seed", "x"])
    assert exc.value.code == EXIT_MALFORMED


# --- determinism -----------------------------------------------------------------

def test_perturb_output_byte_identical(capsys):
    argv = ["perturb", "--body", "cross:2", "--seed", "4", "--samples", "8000"]
    a = _run(capsys, *argv, "--threads", "1")[1]
    b = _run(capsys, *argv, "--threads", "3")[1]
    assert a == b
