import csv
import json
import subprocess
import sys

import numpy as np
import pytest

from sassdpr.cli import EXIT_CONFIG, EXIT_OK, fmt, main, read_signal
from sassdpr.events import EventInterval, score_events


def _csv(path):
    with open(path, newline="", encoding="utf-8") as fh:
        rows = list(csv.reader(fh))
    flags = {"true": 1.0, "false": 0.0}
    data = [[flags[v] if v in flags else float(v) for v in r] for r in rows[1:]]
    return rows[0], np.array(data).reshape(-1, len(rows[0]))


def _design(capsys, *args):
    assert main(["design", *args]) == EXIT_OK
    return json.loads(capsys.readouterr().out)


def test_fmt_uses_six_significant_digits():
    assert fmt(np.pi) == "3.14159"
    assert fmt(123456789.0) == "1.23457e+08"
    assert fmt(3) == "3" and fmt(True) == "true"


def test_design_highpass_half_power(capsys):
    rep = _design(capsys, "--kind", "hp", "--order", "4", "--cutoff", "0.2")
    assert rep["gain_at_cutoffs"][0] == pytest.approx(np.sqrt(0.5), abs=1e-5)
    assert rep["dc_gain"] < 1e-6
    assert rep["zeros_at_plus_one"] == 4 and rep["zeros_at_minus_one"] == 0
    assert rep["spectral_radius"] < 1.0


def test_design_lowpass_dc_gain(capsys):
    rep = _design(capsys, "--kind", "lp", "--order", "2", "--cutoff", "0.1")
    assert rep["dc_gain"] == pytest.approx(1.0, abs=1e-6)
    assert len(rep["impulse_response"]) == 64


def test_design_bandpass_reports_zeros_at_both_ends(capsys, tmp_path):
    rep = _design(capsys, "--kind", "bp", "--order", "8", "--center", "0.5", "--bandwidth", "0.1",
                  "--response-csv", str(tmp_path / "r.csv"))
    assert rep["zeros_at_plus_one"] == 8 and rep["zeros_at_minus_one"] == 8
    assert rep["order"] == 16
    header, data = _csv(tmp_path / "r.csv")
    assert header == ["omega_over_pi", "magnitude"] and data.shape == (512, 2)
    assert data[:, 1].max() == pytest.approx(1.0, abs=1e-4)


def test_design_config_file_and_flag_override(capsys, tmp_path):
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"design": {"kind": "hp", "order": 3, "cutoff": 0.3}}))
    rep = _design(capsys, "--config", str(cfg), "--order", "2")
    assert rep["filter"]["kind"] == "hp" and rep["order"] == 2


def test_design_missing_band_is_a_config_error(capsys):
    assert main(["design", "--kind", "bp", "--order", "2"]) == EXIT_CONFIG
    assert "band-pass" in capsys.readouterr().err


def _synth(tmp_path, name, *extra):
    out = tmp_path / f"{name}.csv"
    assert main(["synth", "--scenario", name, "--out", str(out), *extra]) == EXIT_OK
    return out


def test_synth_is_deterministic(tmp_path):
    a = _synth(tmp_path, "sasd", "--seed", "4")
    first = a.read_bytes()
    b = _synth(tmp_path, "sasd", "--seed", "4")
    assert b.read_bytes() == first
    c = _synth(tmp_path, "sasd", "--seed", "5")
    assert c.read_bytes() != first


def test_synth_sasd_jumps(tmp_path):
    path = _synth(tmp_path, "sasd", "--fs", "100")
    header, data = _csv(path)
    x2 = data[:, header.index("x2")]
    assert np.flatnonzero(np.diff(x2)).tolist() == [89, 179]
    assert json.loads(path.with_suffix(".json").read_text())["fs"] == 100.0


def test_synth_sasdpr_components(tmp_path):
    header, data = _csv(_synth(tmp_path, "sasdpr"))
    assert header == ["t", "value", "truth", "x1", "x2", "x3"]
    t = data[:, 0]
    x2 = data[:, header.index("x2")]
    assert np.all(x2[(t < 4.0) | (t >= 6.0)] == 0) and np.abs(x2).max() > 0.4
    x3 = data[:, header.index("x3")]
    assert sorted(set(x3.tolist())) == [-1.0, 0.0, 1.0]


def test_missing_fs_exits_with_config_error(tmp_path, capsys):
    p = tmp_path / "nofs.csv"
    p.write_text("value\n1\n2\n3\n")
    assert main(["denoise", str(p)]) == EXIT_CONFIG
    assert "sampling rate" in capsys.readouterr().err


def test_bad_inputs_are_config_errors(tmp_path, capsys):
    p = tmp_path / "bad.csv"
    p.write_text("value\n1\nnan\n")
    assert main(["denoise", str(p), "--fs", "100"]) == EXIT_CONFIG
    assert main(["denoise", str(tmp_path / "missing.csv"), "--fs", "100"]) == EXIT_CONFIG
    q = tmp_path / "ok.csv"
    q.write_text("value\n" + "0\n" * 50)
    assert main(["detect", str(q), "--fs", "100", "--scale", "-1"]) == EXIT_CONFIG
    with pytest.raises(SystemExit) as info:
        main(["design", "--kind", "notch"])
    assert info.value.code == 2


def test_read_signal_sidecar(tmp_path):
    p = tmp_path / "s.csv"
    p.write_text("t,value\n0,1\n0.5,2\n")
    p.with_suffix(".json").write_text('{"fs": 2}')
    y, fs, table = read_signal(str(p))
    assert fs == 2.0 and y.tolist() == [1.0, 2.0] and "t" in table


@pytest.fixture(scope="module")
def sasd_file(tmp_path_factory):
    d = tmp_path_factory.mktemp("sasd")
    out = d / "sasd.csv"
    assert main(["synth", "--scenario", "sasd", "--out", str(out)]) == EXIT_OK
    return out


def test_denoise_summary(sasd_file, tmp_path):
    out, summ = tmp_path / "den.csv", tmp_path / "den.json"
    rc = main(["denoise", str(sasd_file), "--lam", "1.0", "--out", str(out),
               "--summary", str(summ), "--cache-dir", str(tmp_path / "cache")])
    assert rc == EXIT_OK
    s = json.loads(summ.read_text())
    assert s["converged"] and s["certificate"]["passed"]
    assert s["rmse"] < 0.09
    header, data = _csv(out)
    assert header == ["t", "y", "x1", "x2", "x"] and data.shape[0] == 300
    np.testing.assert_allclose(data[:, 2] + data[:, 3], data[:, 4], atol=2e-5)
    assert list((tmp_path / "cache").glob("*.json"))


def test_denoise_huge_lambda_is_lowpass(sasd_file, tmp_path):
    out = tmp_path / "den.csv"
    assert main(["denoise", str(sasd_file), "--lam", "1e9", "--out", str(out),
                 "--summary", str(tmp_path / "s.json")]) == EXIT_OK
    header, data = _csv(out)
    np.testing.assert_array_equal(data[:, header.index("x2")], 0.0)
    np.testing.assert_array_equal(data[:, header.index("x")], data[:, header.index("x1")])


def test_detect_zero_signal_gives_empty_events(tmp_path, capsys):
    p = tmp_path / "zero.csv"
    p.write_text("value\n" + "0\n" * 2000)
    ev = tmp_path / "ev.csv"
    assert main(["detect", str(p), "--fs", "200", "--pattern", "kcomplex",
                 "--events", str(ev)]) == EXIT_OK
    assert ev.read_text() == "start_s,end_s,peak_energy\n"


def test_detect_kcomplexes_with_reference(tmp_path):
    sig, ann = tmp_path / "kc.csv", tmp_path / "kc_ann.csv"
    assert main(["synth", "--scenario", "kcomplex", "--seed", "1", "--out", str(sig),
                 "--annotations", str(ann)]) == EXIT_OK
    ev, rep, comp = tmp_path / "ev.csv", tmp_path / "rep.json", tmp_path / "comp.csv"
    assert main(["detect", str(sig), "--pattern", "kcomplex", "--events", str(ev),
                 "--reference", str(ann), "--report", str(rep),
                 "--components", str(comp)]) == EXIT_OK
    _, det = _csv(ev)
    _, ref = _csv(ann)
    assert len(ref) == 2 and len(det) >= 2
    report = json.loads(rep.read_text())
    score = report["scores"]["kc_ann.csv"]
    assert score["events_detected"] == [2, 2]
    # the reported kappa is what score_events gives for the same intervals
    fs, n = 200.0, 6000
    d = [EventInterval(int(round(a * fs)), int(round(b * fs))) for a, b, _ in det]
    r = [EventInterval(int(round(a * fs)), int(round(b * fs))) for a, b in ref]
    assert score["kappa"] == pytest.approx(score_events(d, r, n).kappa, abs=1e-5)
    header, _ = _csv(comp)
    assert header == ["t", "y", "pattern", "wavelet", "energy"]


def test_benchmark_table1_small(tmp_path):
    out = tmp_path / "t1.csv"
    assert main(["benchmark", "--table", "1", "--sizes", "100", "--out", str(out),
                 "--cache-dir", str(tmp_path / "c")]) == EXIT_OK
    header, data = _csv(out)
    assert data.shape[0] == 2 and "norm" in " ".join(header)
    assert main(["benchmark", "--table", "3", "--trials", "0"]) == EXIT_CONFIG


def test_gridsearch_command(tmp_path):
    sig, ann = tmp_path / "kc.csv", tmp_path / "kc_ann.csv"
    main(["synth", "--scenario", "kcomplex", "--events", "1", "--out", str(sig),
          "--annotations", str(ann)])
    cfg = tmp_path / "g.json"
    cfg.write_text(json.dumps({"gridsearch": {"grids": {"lam0": [150, 160, 10], "lam1": [15, 15, 5]}}}))
    out, feas = tmp_path / "grid.csv", tmp_path / "feas.csv"
    assert main(["gridsearch", "--config", str(cfg), "--inputs", str(sig), "--annotations", str(ann),
                 "--out", str(out), "--feasible", str(feas)]) == EXIT_OK
    header, data = _csv(out)
    assert header[:2] == ["lam0", "lam1"] and data.shape[0] == 2
    assert main(["gridsearch", "--inputs", str(sig)]) == EXIT_CONFIG


def test_module_entry_point(tmp_path):
    p = tmp_path / "nofs.csv"
    p.write_text("value\n1\n")
    r = subprocess.run([sys.executable, "-m", "sassdpr.cli", "denoise", str(p)],
                       capture_output=True, text=True)
    assert r.returncode == 2 and "error" in r.stderr
