import csv
import json
from pathlib import Path

import numpy as np
import pytest

from oct_elast.cli import main
from oct_elast.detect import read_measurements

SCEN = Path(__file__).resolve().parents[1] / "scenarios"


def scenario(tmp_path, name, **changes):
    obj = json.loads((SCEN / name).read_text())
    for key, val in changes.items():
        if val is None:
            obj.pop(key, None)
        else:
            obj[key] = val
    p = tmp_path / f"s_{len(list(tmp_path.iterdir()))}.json"
    p.write_text(json.dumps(obj))
    return str(p)


def error_json(capsys):
    err = capsys.readouterr().err.strip().splitlines()
    return json.loads(err[-1])


# --- forward ---------------------------------------------------------------------------


def test_forward_vacuum_rows_are_zero(tmp_path):
    out = tmp_path / "vac"
    assert main(["forward", "--scenario", str(SCEN / "vacuum.json"), "--out", str(out)]) == 0
    ms = read_measurements(out / "field.csv")
    assert np.all(ms.field == 0)
    im = read_measurements(out / "intensity.csv")
    assert np.all(im.m[0] == 0)


def test_forward_is_deterministic(tmp_path):
    s = scenario(tmp_path, "single_interface.json", noise={"kind": "field-gaussian", "sigma": 1e-3})
    main(["forward", "--scenario", s, "--out", str(tmp_path / "a")])
    main(["forward", "--scenario", s, "--out", str(tmp_path / "b")])
    for f in ("field.csv", "intensity.csv"):
        assert (tmp_path / "a" / f).read_bytes() == (tmp_path / "b" / f).read_bytes()


def test_forward_zero_noise_equals_no_noise(tmp_path):
    s0 = scenario(tmp_path, "single_interface.json", noise={"kind": "field-gaussian", "sigma": 0.0})
    s1 = scenario(tmp_path, "single_interface.json", noise=None)
    main(["forward", "--scenario", s0, "--out", str(tmp_path / "a")])
    main(["forward", "--scenario", s1, "--out", str(tmp_path / "b")])
    assert (tmp_path / "a" / "field.csv").read_bytes() == (tmp_path / "b" / "field.csv").read_bytes()


def test_forward_gate_flags_go_together(tmp_path, capsys):
    code = main(["forward", "--scenario", str(SCEN / "vacuum.json"), "--out", str(tmp_path / "o"), "--gate-center", "1"])
    assert code == 2
    assert "error" in error_json(capsys)


# --- invert ------------------------------------------------------------------------------


def forward(tmp_path, s):
    out = tmp_path / "fw"
    assert main(["forward", "--scenario", s, "--out", str(out)]) == 0
    return out


def test_invert_single_interface(tmp_path, capsys):
    s = str(SCEN / "single_interface.json")
    out = forward(tmp_path, s)
    rep = tmp_path / "rep.json"
    assert main(["invert", "--scenario", s, "--measurements", str(out / "intensity.csv"), "--out", str(rep)]) == 0
    r = json.loads(rep.read_text())
    assert r["complete"] and r["flags"] == []
    assert abs(r["layers"][0]["z"] - 0.3) < 1e-8


def test_invert_truncated_csv(tmp_path, capsys):
    s = str(SCEN / "single_interface.json")
    out = forward(tmp_path, s)
    lines = (out / "field.csv").read_text().splitlines()
    bad = tmp_path / "bad.csv"
    bad.write_text("\n".join(lines[:-4]) + "\n")
    assert main(["invert", "--scenario", s, "--measurements", str(bad), "--out", str(tmp_path / "r.json")]) == 2
    assert error_json(capsys)["error"] == "SchemaError"


def test_invert_grid_mismatch(tmp_path, capsys):
    out = forward(tmp_path, str(SCEN / "vacuum.json"))
    s = str(SCEN / "single_interface.json")
    assert main(["invert", "--scenario", s, "--measurements", str(out / "field.csv"), "--out", str(tmp_path / "r.json")]) == 2
    assert error_json(capsys)["error"] == "SchemaError"


def test_invert_partial_report(tmp_path, capsys):
    s = str(SCEN / "gating_overlap.json")
    out = forward(tmp_path, s)
    rep = tmp_path / "rep.json"
    assert main(["invert", "--scenario", s, "--measurements", str(out / "field.csv"), "--out", str(rep)]) == 4
    r = json.loads(rep.read_text())
    assert not r["complete"] and "GatingOverlap" in r["flags"]


def test_missing_file_is_io_error(tmp_path, capsys):
    code = main(["forward", "--scenario", str(tmp_path / "nope.json"), "--out", str(tmp_path / "o")])
    assert code == 3
    assert "error" in error_json(capsys)


# --- mc-verify ---------------------------------------------------------------------------------


def mc_scenario(tmp_path, chi=None, **mc):
    obj = json.loads((SCEN / "mc_acceptance.json").read_text())
    obj["mc"].update(mc)
    if chi is not None:
        sub = obj["medium"]["layers"][0]["sublayer"]
        sub["nu"] = {"kind": "constant", "chi": [chi, 0.0]}
    p = tmp_path / "mc.json"
    p.write_text(json.dumps(obj))
    return str(p)


def read_rows(path):
    with open(path) as fh:
        return list(csv.DictReader(fh))


def test_mc_verify_zero_contrast(tmp_path, capsys):
    s = mc_scenario(tmp_path, chi=0.0, L_schedule=[2.0], configs=3, omegas=[1.0])
    out = tmp_path / "mc.csv"
    assert main(["mc-verify", "--scenario", s, "--out", str(out)]) == 0
    rows = read_rows(out)
    assert len(rows) == 1
    assert float(rows[0]["zscore"]) == 0 and float(rows[0]["stderr"]) == 0


def test_mc_verify_small_run(tmp_path, capsys):
    s = mc_scenario(tmp_path, L_schedule=[2.0], configs=20, omegas=[1.0, 2.0])
    out = tmp_path / "mc.csv"
    assert main(["mc-verify", "--scenario", s, "--out", str(out)]) == 0
    rows = read_rows(out)
    assert [float(r["omega"]) for r in rows] == [1.0, 2.0]
    assert all(float(r["stderr"]) > 0 for r in rows)
    summary = json.loads(capsys.readouterr().out.strip().splitlines()[-1])
    assert summary["rows"] == 2


def test_mc_verify_single_config(tmp_path, capsys):
    s = mc_scenario(tmp_path)
    assert main(["mc-verify", "--scenario", s, "--out", str(tmp_path / "m.csv"), "--configs", "1"]) == 2
    assert "error" in error_json(capsys)


def test_mc_verify_needs_sublayer(tmp_path, capsys):
    s = str(SCEN / "single_interface.json")
    assert main(["mc-verify", "--scenario", s, "--out", str(tmp_path / "m.csv")]) == 2


# --- roundtrip -----------------------------------------------------------------------------------


def test_roundtrip_single_interface(tmp_path, capsys):
    out = tmp_path / "rt"
    assert main(["roundtrip", "--scenario", str(SCEN / "single_interface.json"), "--out", str(out)]) == 0
    summary = json.loads((out / "summary.json").read_text())
    assert summary["complete"] and summary["max_rel_error"] < 1e-8
    with open(out / "errors.csv") as fh:
        errs = list(csv.DictReader(fh))
    assert {e["parameter"] for e in errs} >= {"n", "n_rate", "z"}


def test_roundtrip_noise_degrades_gracefully(tmp_path, capsys):
    s = scenario(tmp_path, "single_interface.json", noise={"kind": "field-gaussian", "sigma": 1e-6})
    out = tmp_path / "rt"
    assert main(["roundtrip", "--scenario", s, "--out", str(out)]) in (0, 4)
    summary = json.loads((out / "summary.json").read_text())
    assert 0 < summary["max_rel_error"] < 1e-2


def test_bad_variant_rejected_by_parser(tmp_path):
    with pytest.raises(SystemExit):
        main(["roundtrip", "--scenario", str(SCEN / "vacuum.json"), "--out", str(tmp_path), "--variant", "x"])
