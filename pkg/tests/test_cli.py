import json

import pytest

from hemo1d.cli import main


def run_cli(argv, capsys):
    code = main([str(a) for a in argv])
    out = capsys.readouterr()
    return code, out.out, out.err


def test_check_ok(small_case, capsys):
    code, out, _ = run_cli(["check", "--config", small_case / "config.json"], capsys)
    assert code == 0
    assert out.strip().splitlines()[-1] == "OK"
    assert "dt =" in out and "heart rate 75.0 bpm" in out


def test_check_warns_on_expanding_taper(small_case, capsys):
    net = json.loads((small_case / "net.json").read_text())
    net["vessels"][2]["r_out_cm"] = 0.45
    (small_case / "net.json").write_text(json.dumps(net))
    code, out, _ = run_cli(["check", "--config", small_case / "config.json"], capsys)
    assert code == 0 and "WARNING" in out and "expanding" in out


def test_missing_inflow_is_validation_error(small_case, capsys):
    code, _, err = run_cli(["run", "--config", small_case / "config.json",
                            "--inflow", small_case / "missing.csv"], capsys)
    assert code == 1 and "inflow" in err


def test_missing_config_file(tmp_path, capsys):
    code, _, err = run_cli(["check", "--config", tmp_path / "none.json"], capsys)
    assert code == 1 and "not found" in err


def test_scale_flows(tmp_path, capsys):
    from importlib.resources import files
    src = files("hemo1d").joinpath("data", "dorv_flows.json")
    code, out, _ = run_cli(["scale-flows", src, "--out", tmp_path / "s.json"], capsys)
    assert code == 0
    d = json.loads((tmp_path / "s.json").read_text())
    assert all(abs(r) < 1e-12 for r in d["junction_residuals"].values())


def test_run_writes_outputs_and_is_reproducible(small_case, capsys):
    cfg = small_case / "config.json"
    code, out, _ = run_cli(["run", "--config", cfg], capsys)
    assert code == 0
    outdir = small_case / "out"
    names = {p.name for p in outdir.iterdir()}
    assert {"vessel_01.csv", "vessel_02.csv", "vessel_03.csv", "report.json",
            "run_summary.json", "manifest.json", "wia_01.csv"} <= names
    header = (outdir / "vessel_02.csv").read_text().splitlines()[0]
    assert header == "t_s,x_cm,p_mmHg,q_mls,A_cm2"
    report = json.loads((outdir / "report.json").read_text())
    assert set(report) >= {"pressures_mmHg", "wss", "reflection_coefficients", "meta"}
    first = {n: (outdir / n).read_bytes() for n in names if n != "manifest.json"}

    code, _, _ = run_cli(["run", "--config", cfg, "--out", small_case / "again",
                          "--workers", "2"], capsys)
    assert code == 0
    for n, blob in first.items():
        if n == "run_summary.json":
            a = json.loads(blob)
            b = json.loads((small_case / "again" / n).read_text())
            a.pop("wall_time_s"), b.pop("wall_time_s")
            assert a == b
        else:
            assert (small_case / "again" / n).read_bytes() == blob, n
    m1 = json.loads((outdir / "manifest.json").read_text())
    m2 = json.loads((small_case / "again" / "manifest.json").read_text())
    assert m1["result_sha256"] == m2["result_sha256"]
    assert m1["config_sha256"] == m2["config_sha256"]

    # analyze recomputes the same report from the CSVs
    code, _, _ = run_cli(["analyze", outdir, "--out", small_case / "re"], capsys)
    assert code == 0
    re = json.loads((small_case / "re" / "report.json").read_text())
    assert re["pressures_mmHg"].keys() == report["pressures_mmHg"].keys()
    for v, s in report["pressures_mmHg"].items():
        assert re["pressures_mmHg"][v]["systolic"] == pytest.approx(s["systolic"], rel=1e-12)


def test_run_exercise(small_case, capsys):
    code, out, _ = run_cli(["run", "--config", small_case / "config.json", "--exercise",
                            "--out", small_case / "ex", "--cycles", "2"], capsys)
    assert code == 0
    assert "heart rate 125.0 bpm" in out
    meta = json.loads((small_case / "ex" / "report.json").read_text())["meta"]
    assert meta["period_s"] == pytest.approx(0.48)
    assert meta["inflow_mean_ml_s"] == pytest.approx(40.0, rel=1e-12)
