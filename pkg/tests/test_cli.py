import json

import numpy as np
import pytest
import yaml

from remshare.cli import main
from remshare.optim import PowerProblem, dump_problem


def tiny_config(tmp_path, **scheme_extra):
    raw = {
        "schema_version": 1,
        "scenario": {
            "area_width_m": 100.0,
            "area_height_m": 130.0,
            "building": [[20, 60], [50, 60], [50, 90], [80, 90], [80, 120], [20, 120]],
            "outdoor_region": {"x_min": 0.0, "y_min": 35.0, "x_max": 100.0, "y_max": 60.0},
            "outdoor_bs": [
                {"id": 1, "position": [10.0, 45.0, 10.0]},
                {"id": 2, "position": [90.0, 45.0, 10.0]},
            ],
            "indoor_bs": [
                {"id": 3, "position": [35.0, 68.0, 3.0]},
                {"id": 4, "position": [60.0, 105.0, 3.0]},
            ],
        },
        "users": {"indoor_uniform": 3, "indoor_cluster": 0, "outdoor": 3},
        "scheme": dict({"name": "dynamic", "gamma_db": -15.0}, **scheme_extra),
        "campaign": {"iterations": 1, "horizon_ms": 40, "seed": 11, "fading": "awgn"},
        "sweep": {"gammas_db": [-15.0], "degradation_target": 0.10},
    }
    path = tmp_path / "config.yaml"
    path.write_text(yaml.safe_dump(raw))
    return path


class TestRun:
    def test_minimal_run_outputs(self, tmp_path):
        cfg = tiny_config(tmp_path)
        out = tmp_path / "out"
        assert main(["run", "--config", str(cfg), "--out", str(out)]) == 0
        summary = json.loads((out / "summary.json").read_text())
        assert summary["seed"] == 11
        assert summary["scheme"] == "dynamic"
        assert "config_sha256" in summary
        assert summary["config"]["campaign"]["seed"] == 11
        for name in ("per_ue_rates.csv", "cdf_outdoor.csv", "cdf_indoor.csv"):
            text = (out / name).read_text()
            assert text.startswith("# config_sha256=")
            assert "seed=11" in text.splitlines()[0]

    def test_scheme_override_recorded(self, tmp_path):
        cfg = tiny_config(tmp_path)
        out = tmp_path / "out"
        code = main(["run", "--config", str(cfg), "--out", str(out),
                     "--override", "scheme.name=modified_lsa"])
        assert code == 0
        summary = json.loads((out / "summary.json").read_text())
        assert summary["scheme"] == "modified_lsa"

    def test_byte_identical_outputs_on_rerun(self, tmp_path):
        cfg = tiny_config(tmp_path)
        out1, out2 = tmp_path / "a", tmp_path / "b"
        assert main(["run", "--config", str(cfg), "--out", str(out1)]) == 0
        assert main(["run", "--config", str(cfg), "--out", str(out2)]) == 0
        for name in ("per_ue_rates.csv", "cdf_outdoor.csv", "cdf_indoor.csv", "summary.json"):
            assert (out1 / name).read_bytes() == (out2 / name).read_bytes()

    def test_bad_config_exits_two(self, tmp_path):
        bad = tmp_path / "bad.yaml"
        bad.write_text("schema_version: 99\n")
        assert main(["run", "--config", str(bad), "--out", str(tmp_path / "o")]) == 2

    def test_unparseable_yaml_exits_two(self, tmp_path):
        bad = tmp_path / "bad.yaml"
        bad.write_text("{not: [valid")
        assert main(["run", "--config", str(bad), "--out", str(tmp_path / "o")]) == 2

    def test_unknown_override_path_exits_two(self, tmp_path):
        cfg = tiny_config(tmp_path)
        code = main(["run", "--config", str(cfg), "--out", str(tmp_path / "o"),
                     "--override", "nope.nothing=1"])
        assert code == 2


class TestSweep:
    def test_requires_semi_static_scheme(self, tmp_path):
        cfg = tiny_config(tmp_path)  # scheme dynamic
        assert main(["sweep", "--config", str(cfg), "--out", str(tmp_path / "o")]) == 2

    def test_single_gamma_table_with_baseline_row(self, tmp_path):
        cfg = tiny_config(tmp_path, name="semi_static")
        out = tmp_path / "out"
        assert main(["sweep", "--config", str(cfg), "--out", str(out)]) == 0
        lines = (out / "sweep.csv").read_text().strip().splitlines()
        assert lines[1].split(",")[0] == "gamma_db"
        assert lines[2].split(",")[0] == "indoor_off"
        assert lines[3].split(",")[0] == "-15.0"
        assert len(lines) == 4
        summary = json.loads((out / "sweep_summary.json").read_text())
        assert summary["chosen_gamma_db"] == -15.0


class TestCompare:
    def test_off_scheme_matches_indoor_off_baseline(self, tmp_path):
        cfg = tiny_config(tmp_path)
        out_cmp = tmp_path / "cmp"
        assert main(["compare", "--config", str(cfg), "--out", str(out_cmp),
                     "--schemes", "off"]) == 0
        out_run = tmp_path / "run"
        assert main(["run", "--config", str(cfg), "--out", str(out_run),
                     "--override", "campaign.indoor_enabled=false"]) == 0
        cmp_rows = (out_cmp / "cdf_off_outdoor.csv").read_text().splitlines()[2:]
        run_rows = (out_run / "cdf_outdoor.csv").read_text().splitlines()[2:]
        assert cmp_rows == run_rows

    def test_duplicate_scheme_gives_identical_cdfs(self, tmp_path):
        cfg = tiny_config(tmp_path)
        out = tmp_path / "cmp"
        assert main(["compare", "--config", str(cfg), "--out", str(out),
                     "--schemes", "modified_lsa,modified_lsa"]) == 0
        rows = (out / "cdf_modified_lsa_outdoor.csv").read_text()
        assert rows.count("rate_bps") == 1  # file overwritten with same content
        table = (out / "comparison.csv").read_text().splitlines()
        data = [r for r in table[2:] if r.startswith("modified_lsa,outdoor")]
        assert len(data) == 2 and data[0] == data[1]

    def test_unknown_scheme_exits_two(self, tmp_path):
        cfg = tiny_config(tmp_path)
        assert main(["compare", "--config", str(cfg), "--out", str(tmp_path / "o"),
                     "--schemes", "wat"]) == 2


class TestOracle:
    def test_solves_dumped_problem(self, tmp_path):
        prob = PowerProblem(w=[[1.0, 1.0]], i_max_mw=[1.0], p_max_mw=5.0)
        path = tmp_path / "problem.json"
        dump_problem(prob, path)
        out = tmp_path / "oracle.json"
        assert main(["oracle", "--problem", str(path), "--out", str(out),
                     "--grid", "101"]) == 0
        payload = json.loads(out.read_text())
        assert payload["solver"]["objective"] == pytest.approx(1.0, abs=1e-9)
        assert payload["grid_oracle"]["objective"] == pytest.approx(1.0, abs=0.06)
        assert np.allclose(payload["solver"]["p_tx_mw"], [0.0, 1.0], atol=1e-9)

    def test_missing_problem_file_exits_one(self, tmp_path):
        assert main(["oracle", "--problem", str(tmp_path / "none.json")]) == 1
