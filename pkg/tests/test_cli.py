import json
import math

import pytest

from hardylab.cli import main, parse_ladder, to_json, ConfigError


def test_constants_output(capsys):
    assert main(["constants", "--p", "2", "--beta", "-2", "--k", "1"]) == 0
    out = capsys.readouterr().out
    assert "sharp=0.25" in out and "remainder=0.25" in out
    T = float(out.split("T=")[1].split()[0])
    assert T == pytest.approx(math.e ** 2, rel=1e-11)


def test_bad_p_exits_2(capsys, tmp_path):
    assert main(["constants", "--p", "1", "--beta", "-2", "--k", "1", "--out", str(tmp_path)]) == 2
    assert "p>1" in capsys.readouterr().err
    rep = json.loads((tmp_path / "report.json").read_text())
    assert rep["errors"][0]["type"] == "config" and "p>1" in rep["errors"][0]["message"]


def test_config_errors():
    assert main(["sweep-sharp", "--model", "torus", "--m", "2", "--n", "1", "--eps-ladder", "1:2"]) == 2
    assert main(["rayleigh", "--model", "torus", "--m", "2", "--n", "1", "--grid", "16"]) == 2
    assert main(["constants", "--model", "torus", "--m", "2", "--n", "1", "--k", "2"]) == 2
    with pytest.raises(SystemExit):
        main(["nonsense"])


def test_parse_ladder():
    assert parse_ladder("3:6") == (0.125, 0.0625, 0.03125, 0.015625)
    assert parse_ladder("0.1,0.05,0.02,0.01") == (0.1, 0.05, 0.02, 0.01)
    with pytest.raises(ConfigError):
        parse_ladder("0.1,0.2,0.05,0.01")


def test_json_floats_have_17_digits():
    text = to_json({"a": 0.1, "b": [1, True, None, float("nan")], "c": "x"})
    assert '"a": 0.10000000000000001' in text
    back = json.loads(text)
    assert back["a"] == 0.1 and back["b"][3] == "nan"


def test_sweep_report_files(tmp_path):
    args = ["sweep-sharp", "--model", "section", "--n", "1", "--eps-ladder", "3:8", "--out", str(tmp_path)]
    assert main(args) == 0
    rep = json.loads((tmp_path / "report.json").read_text())
    assert rep["schema_version"] == 1
    assert rep["config"]["rng"] == "numpy PCG64"
    assert all(v is True for v in rep["verdicts"].values())
    csv_text = (tmp_path / "sweep-sharp.csv").read_bytes()
    assert csv_text.startswith(b"epsilon,quotient,envelope,constant,gap\n")
    assert b"\r" not in csv_text
    assert len(csv_text.splitlines()) == 7


def test_failed_verdict_exits_1(tmp_path):
    # a tolerance of zero cannot be met by a fitted limit
    args = ["sweep-sharp", "--model", "section", "--n", "1", "--eps-ladder", "3:8", "--tol", "0"]
    assert main(args) == 1
