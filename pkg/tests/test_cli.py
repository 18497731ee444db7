import csv
import json
import subprocess
import sys

import pytest

from statichedge import cli
from statichedge.config import config_hash, load_config
from statichedge.errors import NumericError

BASE_CASE = {
    "schema_version": 1,
    "alpha": 0.005,
    "assets": [{"vol_kind": "lognormal", "sigma": 0.2, "driver": {"law": "shifted_lognormal", "skew": -0.3}}],
    "claims": {"kind": "gaussian", "sigma": 0.388},
    "mc": {"n_samples": 200000, "seed": 3, "n_chunks": 8},
    "phi_grid": {"start": 0.6, "stop": 1.4, "num": 5},
}


def write(tmp_path, cfg, name="cfg.json"):
    path = tmp_path / name
    path.write_text(json.dumps(cfg))
    return str(path)


def read_csv(path):
    with open(path, encoding="utf-8") as fh:
        header = fh.readline()
        rows = list(csv.DictReader(fh))
    return header, rows


def test_profile_output_and_header(tmp_path):
    path = write(tmp_path, BASE_CASE)
    out = tmp_path / "out"
    assert cli.main(["profile", "--config", path, "--out", str(out), "--jobs", "1"]) == 0
    header, rows = read_csv(out / "profile.csv")
    assert header.strip() == f"# schema_version=1 seed=3 config_sha256={config_hash(load_config(path))}"
    assert len(rows) == 10
    assert set(rows[0]) == {"phi", "measure", "mc_value", "mc_se", "exp2", "exp3", "exp4", "cornish_fisher"}
    var_rows = [r for r in rows if r["measure"] == "var"]
    for r in var_rows:
        assert abs(float(r["mc_value"]) - float(r["exp3"])) < 0.02
        assert len(r["mc_value"].replace("-", "").replace(".", "").lstrip("0")) <= 12
    assert all(r["cornish_fisher"] == "" for r in rows if r["measure"] == "es")


def test_profile_is_byte_identical(tmp_path):
    path = write(tmp_path, BASE_CASE)
    for d in ("a", "b"):
        assert cli.main(["profile", "--config", path, "--out", str(tmp_path / d), "--measure", "var",
                         "--jobs", "1" if d == "a" else "2"]) == 0
    assert (tmp_path / "a" / "profile.csv").read_bytes() == (tmp_path / "b" / "profile.csv").read_bytes()


def test_seed_flag_overrides_config(tmp_path):
    path = write(tmp_path, BASE_CASE)
    cli.main(["profile", "--config", path, "--out", str(tmp_path / "a"), "--measure", "var", "--seed", "99"])
    cli.main(["profile", "--config", path, "--out", str(tmp_path / "b"), "--measure", "var"])
    a = (tmp_path / "a" / "profile.csv").read_text()
    b = (tmp_path / "b" / "profile.csv").read_text()
    assert a.startswith("# schema_version=1 seed=99 ")
    assert a != b


def test_constant_asset_profile_is_flat(tmp_path):
    cfg = dict(BASE_CASE, assets=[{"vol_kind": "lognormal", "sigma": 0.0}])
    out = tmp_path / "out"
    assert cli.main(["profile", "--config", write(tmp_path, cfg), "--out", str(out)]) == 0
    _, rows = read_csv(out / "profile.csv")
    for measure in ("var", "es"):
        for col in ("mc_value", "exp2", "exp3", "exp4"):
            assert len({r[col] for r in rows if r["measure"] == measure}) == 1


def test_student_t_profile(tmp_path):
    cfg = dict(BASE_CASE, claims={"kind": "student_t", "df": 6, "scale": 0.3})
    out = tmp_path / "out"
    assert cli.main(["profile", "--config", write(tmp_path, cfg), "--out", str(out), "--measure", "var"]) == 0
    _, rows = read_csv(out / "profile.csv")
    assert all(r["exp4"] for r in rows)


def test_two_asset_profile(tmp_path):
    cfg = dict(BASE_CASE, assets=[{"vol_kind": "lognormal", "sigma": 0.1}, {"vol_kind": "lognormal", "sigma": 0.2}],
               claims={"kind": "gaussian", "cov": [[4.0, 1.0], [1.0, 1.0]]}, phi_grid=[[4.0, 2.0], [3.0, 1.5]])
    out = tmp_path / "out"
    assert cli.main(["profile", "--config", write(tmp_path, cfg), "--out", str(out)]) == 0
    _, rows = read_csv(out / "profile.csv")
    assert rows[0]["phi"] == "4;2" and rows[0]["exp2"] and rows[0]["exp3"] == ""


def test_optimize_table(tmp_path):
    cfg = dict(BASE_CASE, optimize={"sigmas": [0.3], "skews": [0.0, -0.3], "bounds": [0.4, 1.6]})
    out = tmp_path / "out"
    assert cli.main(["optimize", "--config", write(tmp_path, cfg), "--out", str(out)]) == 0
    _, rows = read_csv(out / "optimize.csv")
    assert [r["mu3"] for r in rows] == ["0", "-0.3"]
    assert float(rows[0]["phi_star_formula"]) == pytest.approx(0.8493, abs=1e-4)
    for r in rows:
        assert abs(float(r["gap"])) < 0.1


def test_scr_outputs(tmp_path):
    cfg = {"alpha": 0.005, "assets": [{"vol_kind": "normal", "sigma": 0.15}], "allow_nonpositive": True,
           "claims": {"kind": "gaussian", "sigma": 0.3882}, "mc": {"n_samples": 200000, "n_chunks": 8},
           "phi_grid": [0.0, 0.85, 2.0]}
    out = tmp_path / "out"
    assert cli.main(["scr", "--config", write(tmp_path, cfg), "--out", str(out)]) == 0
    _, rows = read_csv(out / "scr.csv")
    assert len(rows) == 3
    summary = json.loads((out / "scr_summary.json").read_text())
    assert summary["scr_L"] == 1.0
    assert summary["phi_star"] == pytest.approx(0.849 * summary["scr_L_unnormalized"], abs=1e-3)


def test_validate_passes_cheap_checks(tmp_path, capsys):
    cfg = dict(BASE_CASE, validate={"checks": [6, 7], "n_samples": 200000})
    assert cli.main(["validate", "--config", write(tmp_path, cfg), "--out", str(tmp_path)]) == 0
    out = capsys.readouterr().out
    assert "[PASS] criterion  6" in out and "[PASS] criterion  7" in out
    assert (tmp_path / "validate.txt").read_text() == out


def test_validate_detects_injected_fault(tmp_path, capsys):
    cfg = dict(BASE_CASE, validate={"checks": [1], "n_samples": 400000, "overrides": {"1": {"sigma_l": 0.45}}})
    assert cli.main(["validate", "--config", write(tmp_path, cfg), "--out", str(tmp_path)]) == 1
    assert "[FAIL] criterion  1" in capsys.readouterr().out


def test_validate_surfaces_tail_warning(tmp_path, capsys):
    cfg = dict(BASE_CASE, validate={"checks": [1], "n_samples": 100000})
    cli.main(["validate", "--config", write(tmp_path, cfg), "--out", str(tmp_path)])
    assert "[WARN] only 500 expected tail samples" in capsys.readouterr().out


@pytest.mark.parametrize("patch", [
    {"unknown_key": 1},
    {"alpha": 1.5},
    {"claims": {"kind": "gaussian"}},
    {"assets": [{"vol_kind": "lognormal", "sigma": 0.3, "driver": {"law": "shifted_lognormal", "skew": 0.5}}]},
    {"claims": {"kind": "student_t", "df": 3}},
])
def test_config_errors_exit_2(tmp_path, capsys, patch):
    cfg = dict(BASE_CASE, **patch)
    assert cli.main(["profile", "--config", write(tmp_path, cfg), "--out", str(tmp_path)]) == 2
    assert "config error" in capsys.readouterr().err


def test_unreadable_config_exit_2(tmp_path):
    bad = tmp_path / "bad.json"
    bad.write_text("{not json")
    assert cli.main(["profile", "--config", str(bad)]) == 2
    assert cli.main(["profile", "--config", str(tmp_path / "missing.json")]) == 2


def test_numeric_error_exit_3(tmp_path, monkeypatch):
    def boom(*args, **kw):
        raise NumericError("quadrature failed", achieved=1e-3)
    monkeypatch.setattr(cli, "cmd_profile", boom)
    assert cli.main(["profile", "--config", write(tmp_path, BASE_CASE), "--out", str(tmp_path)]) == 3


def test_console_entry_point(tmp_path):
    res = subprocess.run([sys.executable, "-m", "statichedge.cli", "--help"], capture_output=True, text=True)
    assert res.returncode == 0
    for sub in ("profile", "optimize", "scr", "validate"):
        assert sub in res.stdout


def test_number_format():
    assert cli.fmt(0.1) == "0.1"
    assert cli.fmt(1 / 3) == "0.333333333333"
    assert cli.fmt(float("nan")) == ""
    assert cli.fmt(12345678.9) == "12345678.9"
