# tests/test_cli.py
import json
from pathlib import Path

import pytest
from click.testing import CliRunner

from app.channel.channel_io import read_record
from app.cli import cli

SCENARIOS = Path(__file__).resolve().parent.parent / "scenarios"
TWO_TONE = str(SCENARIOS / "two_tone.json")


@pytest.fixture
def runner():
    return CliRunner()


@pytest.fixture
def record_stem(runner, tmp_path):
    stem = str(tmp_path / "two_tone")
    result = runner.invoke(cli, ["synth", TWO_TONE, stem])
    assert result.exit_code == 0, result.output
    return stem


@pytest.fixture
def analysis_config(tmp_path):
    path = tmp_path / "config.json"
    path.write_text(
        json.dumps(
            {
                "n": 32,
                "m": 8,
                "delta_t": 16,
                "delta_f": 4,
                "estimate_noise_floor": False,
                "intervals": [
                    {"name": "first", "start": 0.0, "stop": 0.1},
                    {"name": "late", "start": 10.0, "stop": 11.0},
                ],
            }
        )
    )
    return str(path)


def test_synth_writes_record(runner, tmp_path, record_stem):
    assert (tmp_path / "two_tone.json").exists() and (tmp_path / "two_tone.bin").exists()
    record = read_record(record_stem)
    assert (record.s, record.q) == (2048, 16)


def test_synth_is_deterministic(runner, tmp_path):
    for name in ("a", "b"):
        assert runner.invoke(cli, ["synth", TWO_TONE, str(tmp_path / name), "--seed", "4"]).exit_code == 0
    assert (tmp_path / "a.bin").read_bytes() == (tmp_path / "b.bin").read_bytes()
    assert (tmp_path / "a.json").read_bytes() == (tmp_path / "b.json").read_bytes()


def test_synth_aliasing_exit_code(runner, tmp_path):
    scenario = json.loads(Path(TWO_TONE).read_text())
    scenario["segments"][0]["paths"][0]["doppler_knots"] = [[0.0, 6000.0]]
    path = tmp_path / "aliased.json"
    path.write_text(json.dumps(scenario))

    result = runner.invoke(cli, ["synth", str(path), str(tmp_path / "out")])

    assert result.exit_code == 2
    assert "doppler alias" in result.output
    assert not (tmp_path / "out.bin").exists()


def test_synth_invalid_scenario(runner, tmp_path):
    path = tmp_path / "bad.json"
    path.write_text(json.dumps({"S": 10, "Q": 4, "t_s": 1e-4, "f_s": 1e6, "segments": []}))
    assert runner.invoke(cli, ["synth", str(path), str(tmp_path / "out")]).exit_code == 2


def test_synth_missing_scenario(runner, tmp_path):
    assert runner.invoke(cli, ["synth", str(tmp_path / "absent.json"), str(tmp_path / "out")]).exit_code == 1


def test_mask_nlos(runner, tmp_path, record_stem):
    out = str(tmp_path / "nlos")
    result = runner.invoke(cli, ["mask", record_stem, out, "--interval", "(-inf,-258)"])

    assert result.exit_code == 0, result.output
    assert "doppler-mask(-inf,-258)" in read_record(out).label


def test_mask_out_of_range_interval(runner, tmp_path, record_stem):
    result = runner.invoke(cli, ["mask", record_stem, str(tmp_path / "x"), "--interval", "(-5000,0)"])
    assert result.exit_code == 2


def test_analyze_missing_input(runner, tmp_path):
    assert runner.invoke(cli, ["analyze", str(tmp_path / "absent")]).exit_code == 1


def test_analyze_malformed_metadata(runner, tmp_path, record_stem):
    (tmp_path / "two_tone.json").write_bytes(b"\xff\xfe\x00garbage")
    result = runner.invoke(cli, ["analyze", record_stem, "--out", str(tmp_path / "a")])
    assert result.exit_code == 1


def test_analyze_writes_report_and_echoes_config(runner, tmp_path, record_stem, analysis_config):
    out = tmp_path / "analysis"
    result = runner.invoke(
        cli, ["analyze", record_stem, "--config", analysis_config, "--out", str(out), "--gamma", "0.85", "--export-lsf"]
    )

    assert result.exit_code == 0, result.output
    for name in ("report.json", "f_stat.csv", "t_stat.csv", "collinearity_time.csv", "collinearity_freq.csv", "doppler_profile.csv", "lsf.csv"):
        assert (out / name).exists(), name

    report = json.loads((out / "report.json").read_text())
    assert report["config"]["n"] == 32
    assert report["config"]["estimate_noise_floor"] is False
    assert report["config"]["gamma_threshold"] == 0.85
    assert report["k_t_count"] == (2048 - 32) // 16 + 1
    assert (out / "t_stat.csv").read_text().splitlines()[0] == "index,start,extent,run_length,censored"
    assert (out / "lsf.csv").read_text().splitlines()[0] == "k_t,k_f,doppler_bin,delay_bin,power"


def test_analyze_is_byte_identical_with_workers(runner, tmp_path, record_stem, analysis_config):
    out = tmp_path / "analysis"
    args = ["analyze", record_stem, "--config", analysis_config, "--out", str(out), "--workers", "4"]

    assert runner.invoke(cli, args).exit_code == 0
    first = (out / "report.json").read_bytes()
    assert runner.invoke(cli, args).exit_code == 0
    assert (out / "report.json").read_bytes() == first


def test_analyze_invalid_flag_value(runner, record_stem):
    assert runner.invoke(cli, ["analyze", record_stem, "--gamma", "1.5"]).exit_code == 2


def test_analyze_region_larger_than_record(runner, tmp_path, record_stem):
    # default M=30 exceeds the 16 frequency bins of the record
    result = runner.invoke(cli, ["analyze", record_stem, "--out", str(tmp_path / "a")])
    assert result.exit_code == 2


def test_report_table(runner, tmp_path, record_stem, analysis_config):
    out = tmp_path / "analysis"
    assert runner.invoke(cli, ["analyze", record_stem, "--config", analysis_config, "--out", str(out)]).exit_code == 0

    result = runner.invoke(cli, ["report", str(out / "report.json")])

    assert result.exit_code == 0, result.output
    assert "Stationarity report" in result.output
    assert "late" in result.output and "n/a" in result.output


def test_report_corrupt_json(runner, tmp_path):
    path = tmp_path / "report.json"
    path.write_text("{broken")
    assert runner.invoke(cli, ["report", str(path)]).exit_code == 1


def test_report_missing_file(runner, tmp_path):
    assert runner.invoke(cli, ["report", str(tmp_path / "none.json")]).exit_code == 1
