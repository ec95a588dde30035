import csv
import json

import pytest

from ghostradar.cli import main


def run(capsys, *argv):
    code = main([str(a) for a in argv])
    out, err = capsys.readouterr()
    return code, (json.loads(out) if code == 0 else json.loads(err))


def read_csv(path):
    with open(path) as fh:
        header = fh.readline()
        return header, list(csv.DictReader(fh))


def test_synth_estimate_detect(tmp_path, capsys):
    code, res = run(capsys, "synth", "--seed", 7, "--out", tmp_path)
    assert code == 0 and res["k1"] == 1
    snap, geom = tmp_path / "snapshot.csv", tmp_path / "geometry.json"
    code, est = run(capsys, "estimate", "--snapshot", snap, "--geometry", geom, "--out", tmp_path)
    assert code == 0 and (tmp_path / "estimate_h1.json").exists()
    assert {"k0", "k1", "theta1_deg"} <= set(est)
    code, est0 = run(capsys, "estimate", "--snapshot", snap, "--hypothesis", "h0", "--estimator", "grid-baseline")
    assert code == 0 and all(t % 2 == 0 for t in est0["theta0_deg"])
    code, det = run(capsys, "detect", "--snapshot", snap, "--geometry", geom)
    assert code == 0 and det["decision"] in ("H0", "H1")
    code, ideal = run(capsys, "detect", "--snapshot", snap, "--ideal-glrt", "--scene", tmp_path / "scene.json",
                      "--out", tmp_path)
    assert code == 0 and ideal["mode"] == "ideal" and (tmp_path / "detection.json").exists()


def test_synth_is_deterministic(tmp_path, capsys):
    run(capsys, "synth", "--seed", 3, "--hypothesis", "h0", "--out", tmp_path / "a")
    run(capsys, "synth", "--seed", 3, "--hypothesis", "h0", "--out", tmp_path / "b")
    assert (tmp_path / "a/snapshot.csv").read_text() == (tmp_path / "b/snapshot.csv").read_text()


def test_theory(tmp_path, capsys):
    code, res = run(capsys, "theory", "--out", tmp_path, "--points", 11)
    assert code == 0 and res["M"] == 48 and res["threshold"] > 1
    header, rows = read_csv(tmp_path / "theory_pfa.csv")
    assert header.startswith("# theory_pfa") and len(rows) == 11
    assert float(rows[0]["pfa"]) == 1.0


def test_mc_commands(tmp_path, capsys):
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"rho0_db": [10.0], "rho1_db": [0.0, 10.0]}))
    code, res = run(capsys, "mc", "pfa", "--config", cfg, "--trials", 20, "--out", tmp_path)
    assert code == 0 and len(res["rows"]) == 2
    code, res = run(capsys, "mc", "pd", "--config", cfg, "--trials", 20, "--ideal-glrt", "--out", tmp_path)
    assert code == 0 and len(res["rows"]) == 2
    code, res = run(capsys, "mc", "rmse", "--config", cfg, "--trials", 5, "--out", tmp_path)
    assert code == 0
    for name in ("pfa", "pd", "rmse"):
        assert (tmp_path / f"{name}.csv").exists() and (tmp_path / f"{name}.manifest.json").exists()


def test_profile(tmp_path, capsys):
    code, res = run(capsys, "profile", "--reference", 10, "--step", 1, "--out", tmp_path)
    assert code == 0 and res["peak_deg"] == 10.0 and res["peak"] == pytest.approx(1.0)
    code, res = run(capsys, "profile", "--reference", -20, 30, "--step", 1, "--out", tmp_path)
    assert code == 0


def test_usage_error_json(capsys):
    code, err = run(capsys, "mc", "pfa", "--trials", 0)
    assert code == 2 and set(err) == {"error", "message"}
    code, err = run(capsys, "synth", "--seed", -1)
    assert code == 2


def test_runtime_error_json(tmp_path, capsys):
    code, err = run(capsys, "estimate", "--snapshot", tmp_path / "missing.csv")
    assert code == 1 and err["error"]
    bad = tmp_path / "cfg.json"
    bad.write_text(json.dumps({"unknown_key": 1}))
    code, err = run(capsys, "mc", "pd", "--config", bad)
    assert code == 1 and "unknown_key" in err["message"]
    code, err = run(capsys, "detect", "--snapshot", tmp_path / "x.csv", "--ideal-glrt")
    assert code == 2
