import json
import math

import pytest

from revcut.cli import RunConfig, dumps, main


def run(capsys, *argv):
    code = main(list(argv))
    out = capsys.readouterr()
    return code, out.out, out.err


def test_analyze_main_class(capsys):
    code, out, _ = run(capsys, "analyze", "--profile", "gauss")
    assert code == 0
    d = json.loads(out)
    assert d["profile"] == "gauss" and d["params"] == {"a": 1.0}
    assert d["t0"] is None
    assert d["t1"] == pytest.approx(1 / math.sqrt(2), abs=1e-12)


@pytest.mark.parametrize("name", ["catenoid", "flat", "logneck"])
def test_analyze_outside_main_class(capsys, name):
    code, out, _ = run(capsys, "analyze", "--profile", name)
    assert code == 2
    assert json.loads(out)["profile"] == name


def test_cutlocus_json(capsys):
    code, out, _ = run(capsys, "cutlocus", "--profile", "gauss", "--t-q", "-0.3")
    assert code == 0
    d = json.loads(out)
    assert d["kind"] == "MeridianAndParallelArc"
    assert d["parallel_level"] == 0.3
    assert d["theta_arc"][0] == pytest.approx(2.274029395103783, abs=1e-10)


def test_cutlocus_outside_class(capsys):
    code, _, err = run(capsys, "cutlocus", "--profile", "logneck", "--t-q", "1.5")
    assert code == 2 and "K_decreasing" in err
    code, out, _ = run(capsys, "cutlocus", "--profile", "logneck", "--t-q", "1.5",
                       "--allow-outside-class")
    assert code == 0
    assert json.loads(out)["relaxed_hypotheses"] == ["K_decreasing"]


def test_cutlocus_ambiguous_lists_candidates(capsys):
    code, _, err = run(capsys, "cutlocus", "--profile", "sech", "--t-q", "0")
    assert code == 1
    assert "candidate MeridianOnly" in err and "candidate MeridianAndParallelArc" in err


def test_phi_table_csv(capsys):
    code, out, _ = run(capsys, "phi-table", "--profile", "sech", "--format", "csv",
                       "--nu-min", "0.3", "--nu-max", "0.7", "-n", "3")
    assert code == 0
    lines = out.splitlines()
    assert lines[0] == "nu,phi,l,est_err_phi,est_err_l"
    row = [float(x) for x in lines[2].split(",")]
    assert row[0] == 0.5
    assert row[1] == pytest.approx(4.8442241102738365, abs=1e-11)
    assert row[2] == pytest.approx(4.3130312949992857, abs=1e-11)


def test_phi_table_default_band_json(capsys):
    code, out, _ = run(capsys, "phi-table", "--profile", "gauss", "-n", "5")
    assert code == 0
    d = json.loads(out)
    assert len(d["rows"]) == 5 and d["monotone"]


def test_trace_csv_default(capsys):
    code, out, _ = run(capsys, "trace", "--profile", "flat", "--eta", "0.5", "--smax", "0.002")
    assert code == 0
    lines = out.splitlines()
    assert lines[0] == "s,t,theta,dt_ds"
    s, t, th, v = map(float, lines[-1].split(","))
    assert t == pytest.approx(0.002 * math.sin(0.5), abs=1e-15)
    assert th == pytest.approx(0.002 * math.cos(0.5), abs=1e-15)


def test_trace_downward_json(capsys):
    code, out, _ = run(capsys, "trace", "--eta", "-1.0", "--smax", "0.01", "--format", "json")
    assert code == 0
    d = json.loads(out)
    assert d["columns"] == ["s", "t", "theta", "dt_ds"]
    assert d["rows"][-1][1] < 0


def test_output_is_deterministic(capsys, tmp_path):
    outs = []
    for k in range(2):
        path = tmp_path / f"o{k}.json"
        assert main(["phi-table", "--profile", "coshneck", "-n", "7", "--out", str(path)]) == 0
        outs.append(path.read_bytes())
    assert outs[0] == outs[1]


def test_config_file_and_flag_precedence(capsys, tmp_path):
    cfg = tmp_path / "run.json"
    cfg.write_text(json.dumps({"profile": "gauss", "params": {"a": 2.0}}))
    code, out, _ = run(capsys, "analyze", "--config", str(cfg))
    assert code == 0
    d = json.loads(out)
    assert d["params"] == {"a": 2.0}
    assert d["t1"] == pytest.approx(0.5, abs=1e-12)  # K = 4a - 4a^2 t^2
    code, out, _ = run(capsys, "analyze", "--config", str(cfg), "--param", "a=1")
    assert json.loads(out)["params"] == {"a": 1.0}
    # params from the file still apply after the profile is switched by flag
    code, _, err = run(capsys, "analyze", "--config", str(cfg), "--profile", "sech")
    assert code == 1 and "sech" in err
    cfg.write_text(json.dumps({"profile": "gauss", "t_max": 20.0}))
    code, out, _ = run(capsys, "analyze", "--config", str(cfg), "--profile", "sech")
    d = json.loads(out)
    assert d["profile"] == "sech" and d["t_max"] == 20.0


@pytest.mark.parametrize("raw", ['{"tol": -1}', '{"colour": "red"}', '{"profile": "torus"}',
                                 '{"format": "xml"}', "not json"])
def test_invalid_config_exits_1(capsys, tmp_path, raw):
    cfg = tmp_path / "bad.json"
    cfg.write_text(raw)
    code, _, err = run(capsys, "analyze", "--config", str(cfg))
    assert code == 1 and err.startswith("revcut:")


def test_bad_profile_parameter(capsys):
    code, _, err = run(capsys, "analyze", "--profile", "gauss", "--param", "b=2")
    assert code == 1 and "gauss" in err


def test_missing_config_file(capsys, tmp_path):
    code, _, _ = run(capsys, "analyze", "--config", str(tmp_path / "absent.json"))
    assert code == 1


def test_dumps_float_format():
    assert dumps({"x": 0.1, "y": math.inf, "z": [1, True, None]}) == \
        '{"x": 0.10000000000000001, "y": null, "z": [1, true, null]}\n'


def test_run_config_validation():
    with pytest.raises(ValueError):
        RunConfig(step=0.0).validate()
    RunConfig().validate()


def test_verify_flat(capsys):
    code, out, _ = run(capsys, "verify", "--profile", "flat", "--t-q", "0", "--fan", "1000",
                       "--smax", "3.5")
    assert code == 0
    d = json.loads(out)
    assert d["summary"]["violations"] == 0
    assert d["summary"]["max_deviation"] <= 2e-2


def test_verify_sparse_fan_reports_gaps(capsys):
    # 400 rays leave the far meridian samples just outside tol_space
    code, out, _ = run(capsys, "verify", "--profile", "flat", "--t-q", "0", "--fan", "400",
                       "--smax", "3.5")
    assert code == 3
    assert json.loads(out)["summary"]["unmatched_samples"]
