import json

import pytest

from mmwsim.cli import main, read_kv_file, self_checks
from mmwsim.errors import InvalidConfigError
from mmwsim.experiment import load_report_json, read_report_csv


def test_validate_exits_zero(capsys):
    assert main(["validate"]) == 0
    out = capsys.readouterr().out
    assert out.count("PASS") == 5 and "FAIL" not in out


def test_self_checks_all_pass():
    assert all(passed for _, passed, _ in self_checks())


def test_sweep_csv(tmp_path, capsys):
    out = tmp_path / "r.csv"
    rc = main(["sweep", "--users", "2,5,10", "--snr-db", "20", "--drops", "5", "--seed", "42", "--out", str(out)])
    assert rc == 0
    header, cdfs = read_report_csv(out)
    assert header["axis"] == "num_users"
    assert header["config.snr_db"] == "20.0"
    assert header["seed"] == "42"
    assert {k[0] for k in cdfs} == {"2", "5", "10"}


def test_sweep_json_with_config_file(tmp_path):
    cfg = tmp_path / "run.cfg"
    cfg.write_text(
        "# a comment\n"
        "axis = element_spacing\n"
        "values = 0.5, 4, 6\n"
        "drops = 4\n"
        "num_users = 3\n"
        "los_model.model = nlos   # blocked\n"
        "path_loss.use_shadowing = false\n"
    )
    out = tmp_path / "r.json"
    assert main(["sweep", "--config", str(cfg), "--seed", "3", "--out", str(out)]) == 0
    report = load_report_json(out)
    assert report.axis == "element_spacing"
    assert [c.axis_value for c in report.cells] == ["0.5", "4.0", "6.0"]
    assert report.provenance["config"]["los_model.model"] == "nlos"
    assert report.provenance["config"]["path_loss.use_shadowing"] is False
    assert report.provenance["drops"] == 4


def test_sweep_array_axis_and_selection(tmp_path):
    out = tmp_path / "r.json"
    rc = main(["sweep", "--users", "4", "--bs-rows", "5,20", "--drops", "3", "--selection", "incremental:3",
               "--metrics", "sum_rate,per_user_snr", "--out", str(out)])
    assert rc == 0
    report = load_report_json(out)
    assert report.axis == "bs_array"
    assert [c.axis_value for c in report.cells] == ["5x8", "20x8"]
    assert report.provenance["selection"] == "incremental:3"


def test_sweep_error_codes(tmp_path, capsys):
    assert main(["sweep", "--drops", "0", "--out", str(tmp_path / "x.csv")]) == 2
    assert "drops" in capsys.readouterr().err
    assert main(["sweep", "--bogus", "--out", str(tmp_path / "x.csv")]) == 1
    assert main([]) == 1
    assert main(["sweep", "--drops", "1", "--out", str(tmp_path / "missing" / "x.csv")]) == 3
    assert "missing" in capsys.readouterr().err
    assert main(["sweep", "--drops", "1", "--users", "500", "--out", str(tmp_path / "x.csv")]) == 2
    assert main(["sweep", "--config", str(tmp_path / "nope.cfg"), "--out", str(tmp_path / "x.csv")]) == 3
    bad = tmp_path / "bad.cfg"
    bad.write_text("frobnicate = 1\n")
    assert main(["sweep", "--config", str(bad), "--out", str(tmp_path / "x.csv")]) == 2


def test_single_drop(tmp_path, capsys):
    dump = tmp_path / "d.txt"
    assert main(["single-drop", "--users", "3", "--drop-index", "2", "--dump", str(dump)]) == 0
    result = json.loads(capsys.readouterr().out)
    assert result["drop_index"] == 2 and result["feasible"] is True
    assert len(result["per_user_snr"]) == 3
    assert dump.read_text().startswith("# mmwsim channel dump v1")
    assert main(["single-drop", "--users", "2,3"]) == 2


def test_reproducible_timestamp(tmp_path, monkeypatch):
    monkeypatch.setenv("SOURCE_DATE_EPOCH", "0")
    out = tmp_path / "r.csv"
    assert main(["sweep", "--users", "2", "--drops", "2", "--out", str(out)]) == 0
    assert "# timestamp = 1970-01-01T00:00:00+00:00" in out.read_text()


def test_read_kv_file(tmp_path):
    path = tmp_path / "c.cfg"
    path.write_text("a = 1\n\n# only comment\nb=x, y\n")
    assert read_kv_file(path) == {"a": "1", "b": "x, y"}
    path.write_text("no equals sign\n")
    with pytest.raises(InvalidConfigError):
        read_kv_file(path)
