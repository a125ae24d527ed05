"""Command-line interface tests, all in-process through main(argv).

Exit codes are part of the contract: 0 success, 1 for configuration or
usage problems, 2 for numerical failures.
"""

import json
import math

import numpy as np
import pytest

from pmbfuse import cli
from pmbfuse.cli import main


def write_points(path, points):
    path.write_text(json.dumps(points))
    return str(path)


def tiny_args(tmp_path, extra=()):
    return [
        "simulate",
        "--override", "scenario.steps=6",
        "--override", "scenario.runs=1",
        "--override", "scenario.variants=dpmb-to-gci",
        "--override", "scenario.fusion_period=3",
        "--quiet",
        "--output", str(tmp_path / "out"),
        *extra,
    ]


class TestArgumentHandling:
    def test_no_arguments_is_usage_error(self, capsys):
        with pytest.raises(SystemExit) as exc:
            main([])
        assert exc.value.code == 1
        assert "usage" in capsys.readouterr().err

    def test_unknown_subcommand(self, capsys):
        with pytest.raises(SystemExit) as exc:
            main(["frobnicate"])
        assert exc.value.code == 1


class TestGospaCommand:
    def test_identical_sets(self, tmp_path, capsys):
        a = write_points(tmp_path / "a.json", [[0.0, 0.0], [5.0, 5.0]])
        assert main(["gospa", a, a]) == 0
        out = capsys.readouterr().out
        assert "total         0.0" in out

    def test_single_missed_object(self, tmp_path, capsys):
        truth = write_points(tmp_path / "t.json", [[1.0, 2.0]])
        est = write_points(tmp_path / "e.json", [])
        assert main(["gospa", truth, est]) == 0
        out = capsys.readouterr().out
        assert f"total         {math.sqrt(50.0)!r}" in out
        assert "missed        50.0" in out

    def test_points_key_wrapper_accepted(self, tmp_path, capsys):
        truth = tmp_path / "t.json"
        truth.write_text(json.dumps({"points": [[0.0, 0.0]]}))
        est = write_points(tmp_path / "e.json", [[0.0, 0.0]])
        assert main(["gospa", str(truth), est]) == 0

    def test_missing_file(self, tmp_path, capsys):
        a = write_points(tmp_path / "a.json", [[0.0, 0.0]])
        assert main(["gospa", str(tmp_path / "nope.json"), a]) == 1
        assert "cannot read" in capsys.readouterr().err

    def test_malformed_json(self, tmp_path, capsys):
        bad = tmp_path / "bad.json"
        bad.write_text("{not json")
        a = write_points(tmp_path / "a.json", [[0.0, 0.0]])
        assert main(["gospa", str(bad), a]) == 1
        assert "not valid JSON" in capsys.readouterr().err

    def test_wrong_shape(self, tmp_path, capsys):
        bad = write_points(tmp_path / "bad.json", [[[1.0]]])
        a = write_points(tmp_path / "a.json", [[0.0]])
        assert main(["gospa", bad, a]) == 1

    def test_bad_cutoff(self, tmp_path, capsys):
        a = write_points(tmp_path / "a.json", [[0.0, 0.0]])
        assert main(["gospa", a, a, "--cutoff", "-1"]) == 1
        assert "cutoff" in capsys.readouterr().err

    def test_numerical_failure_maps_to_exit_2(self, tmp_path, capsys, monkeypatch):
        def boom(args):
            raise np.linalg.LinAlgError("synthetic failure")

        monkeypatch.setattr(cli, "_cmd_gospa", boom)
        a = write_points(tmp_path / "a.json", [[0.0, 0.0]])
        assert main(["gospa", a, a]) == 2
        assert "numerical failure" in capsys.readouterr().err


class TestFuseDemoCommand:
    def test_bundled_demo(self, capsys):
        assert main(["fuse-demo"]) == 0
        out = capsys.readouterr().out
        assert "fused 3 + 3 components into 6 tracks, 34 global hypotheses" in out
        assert "(1.1, 2.1) (1.2, 2.2)" in out
        assert "heaviest hypothesis components" in out

    def test_omega_one_rejected(self, capsys):
        assert main(["fuse-demo", "--omega", "1.0"]) == 1
        err = capsys.readouterr().err
        assert "omega" in err and "strictly between" in err

    def test_bad_k_rejected(self, capsys):
        assert main(["fuse-demo", "--k", "0"]) == 1

    def test_output_document(self, tmp_path, capsys):
        out = tmp_path / "fused.json"
        assert main(["fuse-demo", "--output", str(out)]) == 0
        doc = json.loads(out.read_text())
        assert doc["n_partners"] == 3
        assert len(doc["tracks"]) == 6
        assert len(doc["globals"]) == 34
        assert sum(g["weight"] for g in doc["globals"]) == pytest.approx(1.0, rel=1e-9)

    def test_custom_documents(self, tmp_path, capsys):
        doc = {
            "ppp": [{"weight": 0.5, "mean": [0.0, 0.0], "cov": [[100.0, 0.0], [0.0, 100.0]]}],
            "bernoullis": [{"r": 0.9, "mean": [1.0, 2.0], "cov": [[1.0, 0.0], [0.0, 1.0]]}],
        }
        p1 = tmp_path / "p1.json"
        p1.write_text(json.dumps(doc))
        assert main(["fuse-demo", "--pmb1", str(p1), "--pmb2", str(p1)]) == 0
        out = capsys.readouterr().out
        assert "fused 1 + 1 components into 2 tracks" in out

    def test_missing_document(self, tmp_path, capsys):
        assert main(["fuse-demo", "--pmb1", str(tmp_path / "nope.json")]) == 1
        assert "cannot load PMB document" in capsys.readouterr().err

    def test_gate_excludes_pairings(self, capsys):
        assert main(["fuse-demo", "--gate", "1e-6"]) == 0
        out = capsys.readouterr().out
        assert "1 global hypotheses" in out
        assert "(no pairings)" in out


class TestSimulateCommand:
    def test_tiny_run_writes_outputs(self, tmp_path, capsys):
        assert main(tiny_args(tmp_path)) == 0
        stdout = capsys.readouterr().out
        assert "dpmb-to-gci" in stdout

        out = tmp_path / "out"
        summary = json.loads((out / "summary.json").read_text())
        assert len(summary["results"]) == 1
        entry = summary["results"][0]
        assert entry["label"] == "dpmb-to-gci"
        assert entry["steps"] == 6 and entry["runs"] == 1
        assert len(entry["per_step"]["total"]) == 6

        csv_path = out / "results-dpmb-to-gci.csv"
        lines = csv_path.read_text().strip().splitlines()
        assert lines[0] == "# pmbfuse results v1"
        assert lines[1] == "run,agent,step,total,localisation,missed,false"
        assert len(lines) == 2 + 1 * 2 * 6  # runs x agents x steps
        first = lines[2].split(",")
        assert first[:3] == ["0", "0", "1"]
        float(first[3])  # parseable numbers

    def test_rerun_is_byte_identical(self, tmp_path):
        assert main(tiny_args(tmp_path / "a")) == 0
        assert main(tiny_args(tmp_path / "b")) == 0
        for name in ("out/summary.json", "out/results-dpmb-to-gci.csv"):
            assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()

    def test_user_config_overlays_bundled(self, tmp_path, capsys):
        cfg = tmp_path / "user.cfg"
        cfg.write_text("[scenario]\nsteps = 4\nruns = 1\nvariants = dpmb-to-gci\nfusion_period = 2\n")
        assert main(["simulate", "--config", str(cfg), "--quiet",
                     "--output", str(tmp_path / "out")]) == 0
        summary = json.loads((tmp_path / "out" / "summary.json").read_text())
        assert summary["results"][0]["steps"] == 4

    def test_unknown_config_key(self, tmp_path, capsys):
        cfg = tmp_path / "user.cfg"
        cfg.write_text("[scenario]\nbogus = 1\n")
        assert main(["simulate", "--config", str(cfg), "--quiet"]) == 1
        assert "unknown config key scenario.bogus" in capsys.readouterr().err

    def test_unknown_config_section(self, tmp_path, capsys):
        cfg = tmp_path / "user.cfg"
        cfg.write_text("[bogus]\nx = 1\n")
        assert main(["simulate", "--config", str(cfg), "--quiet"]) == 1
        assert "unknown config section" in capsys.readouterr().err

    def test_missing_config_file(self, tmp_path, capsys):
        assert main(["simulate", "--config", str(tmp_path / "nope.cfg"), "--quiet"]) == 1
        assert "config file not found" in capsys.readouterr().err

    def test_unknown_override_key(self, capsys):
        assert main(["simulate", "--override", "scenario.bogus=1", "--quiet"]) == 1
        assert "unknown config key" in capsys.readouterr().err

    def test_malformed_override(self, capsys):
        assert main(["simulate", "--override", "steps6", "--quiet"]) == 1
        assert "not of the form" in capsys.readouterr().err

    def test_unknown_variant_label(self, capsys):
        assert main(["simulate", "--override", "scenario.variants=bogus-gci", "--quiet"]) == 1
        assert "unknown variant label" in capsys.readouterr().err

    def test_bad_parameter_value(self, capsys):
        assert main(["simulate", "--override", "fusion.omega=1.0", "--quiet"]) == 1
        assert "bad configuration" in capsys.readouterr().err


class TestSweepCommand:
    def test_two_periods(self, tmp_path, capsys):
        args = [
            "sweep",
            "--periods", "2,3",
            "--override", "scenario.steps=6",
            "--override", "scenario.runs=1",
            "--override", "scenario.variants=dpmb-to-gci",
            "--quiet",
            "--output", str(tmp_path),
        ]
        assert main(args) == 0
        stdout = capsys.readouterr().out
        assert "N_f=2" in stdout and "N_f=3" in stdout
        doc = json.loads((tmp_path / "sweep.json").read_text())
        assert doc["periods"] == [2, 3]
        row = doc["overall_rms_gospa"]["dpmb-to-gci"]
        assert set(row) == {"2", "3"}
        assert all(v > 0.0 for v in row.values())

    def test_rejects_bad_periods(self, capsys):
        assert main(["sweep", "--periods", "0", "--quiet"]) == 1
        assert main(["sweep", "--periods", "x", "--quiet"]) == 1
        assert main(["sweep", "--periods", "", "--quiet"]) == 1

    def test_centralised_row_constant_across_periods(self, tmp_path, capsys):
        args = [
            "sweep",
            "--periods", "2,3",
            "--override", "scenario.steps=5",
            "--override", "scenario.runs=1",
            "--override", "scenario.variants=cpmbm",
            "--quiet",
            "--output", str(tmp_path),
        ]
        assert main(args) == 0
        row = json.loads((tmp_path / "sweep.json").read_text())["overall_rms_gospa"]["cpmbm"]
        assert row["2"] == row["3"]
