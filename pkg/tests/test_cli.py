import json
import os

import pytest

from occloc.cli import main


def read(path):
    with open(path, "rb") as fh:
        return fh.read()


@pytest.fixture
def fast_scenario(tmp_path):
    path = tmp_path / "scenario.json"
    path.write_text(json.dumps({"duration_s": 5.0, "seed": 3}))
    return str(path)


class TestTrackCommand:
    def test_writes_csv_and_manifest(self, tmp_path, fast_scenario):
        out = tmp_path / "results"
        code = main(["track", "--scenario", fast_scenario, "--out", str(out)])
        assert code == 0
        assert (out / "track.csv").exists()
        manifest = json.loads((out / "manifest.json").read_text())
        assert manifest["command"] == "track"
        assert manifest["seed"] == 3
        assert manifest["outputs"] == ["track.csv"]

    def test_missing_scenario_exits_2(self, tmp_path, capsys):
        code = main(["track", "--scenario", "/no/such/file.json", "--out", str(tmp_path)])
        assert code == 2
        assert "/no/such/file.json" in capsys.readouterr().err

    def test_invalid_field_exits_2(self, tmp_path, capsys):
        bad = tmp_path / "bad.json"
        bad.write_text(json.dumps({"camera": {"fov_full_angle_deg": 200}}))
        code = main(["track", "--scenario", str(bad), "--out", str(tmp_path / "o")])
        assert code == 2
        assert "fov" in capsys.readouterr().err

    def test_manifest_replay_is_byte_identical(self, tmp_path, fast_scenario):
        out_a, out_b = tmp_path / "a", tmp_path / "b"
        assert main(["track", "--scenario", fast_scenario, "--out", str(out_a)]) == 0
        assert main(["track", "--scenario", str(out_a / "manifest.json"), "--out", str(out_b)]) == 0
        assert read(out_a / "track.csv") == read(out_b / "track.csv")

    def test_plot_flag_writes_svg(self, tmp_path, fast_scenario):
        out = tmp_path / "o"
        assert main(["track", "--scenario", fast_scenario, "--out", str(out), "--plot"]) == 0
        svg = (out / "track.svg").read_text()
        assert svg.startswith("<svg")


class TestSeedPrecedence:
    def test_flag_overrides_file(self, tmp_path, fast_scenario):
        out = tmp_path / "o"
        main(["track", "--scenario", fast_scenario, "--out", str(out), "--seed", "99"])
        assert json.loads((out / "manifest.json").read_text())["seed"] == 99

    def test_env_seed_when_file_silent(self, tmp_path, monkeypatch):
        scenario = tmp_path / "s.json"
        scenario.write_text(json.dumps({"duration_s": 5.0}))
        monkeypatch.setenv("OCC_SEED", "41")
        out = tmp_path / "o"
        main(["track", "--scenario", str(scenario), "--out", str(out)])
        assert json.loads((out / "manifest.json").read_text())["seed"] == 41

    def test_file_seed_beats_env(self, tmp_path, monkeypatch, fast_scenario):
        monkeypatch.setenv("OCC_SEED", "41")
        out = tmp_path / "o"
        main(["track", "--scenario", fast_scenario, "--out", str(out)])
        assert json.loads((out / "manifest.json").read_text())["seed"] == 3


class TestOtherCommands:
    def test_ber(self, tmp_path):
        out = tmp_path / "o"
        code = main(["ber", "--out", str(out), "--snir-max", "3", "--bits", "10000"])
        assert code == 0
        lines = (out / "ber.csv").read_text().splitlines()
        assert lines[0] == "snir_db,ber_sim,ber_theory"
        assert len(lines) == 5  # 0..3 dB

    def test_ber_replay_identical(self, tmp_path):
        out_a, out_b = tmp_path / "a", tmp_path / "b"
        main(["ber", "--out", str(out_a), "--snir-max", "3", "--bits", "10000"])
        main(["ber", "--scenario", str(out_a / "manifest.json"), "--out", str(out_b)])
        assert read(out_a / "ber.csv") == read(out_b / "ber.csv")

    def test_range(self, tmp_path):
        out = tmp_path / "o"
        assert main(["range", "--out", str(out), "--points", "50"]) == 0
        lines = (out / "range.csv").read_text().splitlines()
        assert lines[0] == "d_m,eta,regime"
        assert len(lines) == 51

    def test_filtercmp(self, tmp_path):
        out = tmp_path / "o"
        scenario = tmp_path / "s.json"
        scenario.write_text(
            json.dumps({"duration_s": 6.0, "noise": {"distance_sigma_cm": 5.0}})
        )
        code = main(
            ["filtercmp", "--scenario", str(scenario), "--out", str(out), "--ensemble", "3"]
        )
        assert code == 0
        lines = (out / "filtercmp.csv").read_text().splitlines()
        assert lines[0] == "t_s,err_kf_norm,err_raw_norm"
        assert len(lines) == 6  # ticks 0..4 score against the next truth

    def test_validate_ok(self, capsys):
        assert main(["validate"]) == 0
        assert "scenario OK" in capsys.readouterr().out

    def test_validate_reports_gap(self, tmp_path, capsys):
        # a sparse explicit layout cannot cover the room
        scenario = tmp_path / "s.json"
        scenario.write_text(json.dumps({"luminaires": [[75, 75], [225, 75], [75, 225]]}))
        assert main(["validate", "--scenario", str(scenario)]) == 2
        assert "visibility" in capsys.readouterr().err
