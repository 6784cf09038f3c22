import json

import pytest

from pixelinv.cli import main


def test_unknown_experiment_is_usage_error(capsys):
    with pytest.raises(SystemExit) as exc:
        main(["frobnicate"])
    assert exc.value.code == 2


def test_missing_config_file_is_usage_error(tmp_path, capsys):
    code = main(["stability", "--config", str(tmp_path / "nope.cfg")])
    assert code == 2
    assert "bad config" in capsys.readouterr().err


def test_nonuniqueness_run_writes_csv(tmp_path, capsys):
    out = tmp_path / "sweep.csv"
    cfg = tmp_path / "run.cfg"
    cfg.write_text("sigma_step=1.0\nk=1\n", encoding="utf-8")
    code = main(["nonuniqueness", "--config", str(cfg), "--out", str(out)])
    assert code == 0
    lines = out.read_text(encoding="utf-8").strip().split("\n")
    assert lines[0].startswith("# config:")
    assert lines[1] == "pixel,sigma_i,F_value"
    assert len(lines) == 2 + 27


def test_cli_flags_override_config(tmp_path):
    out = tmp_path / "stab.csv"
    cfg = tmp_path / "run.cfg"
    cfg.write_text("nx_min=2\nnx_max=3\nk=4\n", encoding="utf-8")
    code = main(["stability", "--config", str(cfg), "--k", "2", "--out", str(out)])
    assert code == 0
    comment = out.read_text(encoding="utf-8").split("\n")[0]
    assert "k=2" in comment


def test_properties_pass_and_fail_exit_codes(tmp_path):
    out = tmp_path / "props.json"
    assert main(["properties", "--out", str(out)]) == 0
    report = json.loads(out.read_text(encoding="utf-8"))
    assert report["all_passed"]

    cfg = tmp_path / "tight.cfg"
    cfg.write_text("tol_difference_identity=1e-18\n", encoding="utf-8")
    out2 = tmp_path / "props2.json"
    assert main(["properties", "--config", str(cfg), "--out", str(out2)]) == 1
    report = json.loads(out2.read_text(encoding="utf-8"))
    assert not report["all_passed"]
