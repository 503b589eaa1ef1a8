import json

import numpy as np
import pytest

from kscale.cli import main
from kscale.ingest import sample_path

# a small tree count keeps CLI tests quick; acceptance runs the defaults
FAST = ["--trees", "40"]


def run(capsys, *argv):
    code = main(list(argv))
    out = capsys.readouterr()
    return code, out.out, out.err


class TestValidate:
    def test_bundled_samples_pass(self, capsys):
        code, out, _ = run(capsys, "validate")
        assert code == 0
        assert out.count("OK") == 3

    def test_corrupted_ratio_fails_with_location(self, capsys, tmp_path):
        bad = tmp_path / "ratio.csv"
        bad.write_text("year,ratio\n2000,0.5\n2001,1.7\n")
        code, out, err = run(capsys, "validate", "--ratio", str(bad))
        assert code == 2
        assert "ratio.csv:3" in out

    def test_missing_file(self, capsys, tmp_path):
        code, _, _ = run(capsys, "validate", "--panel", str(tmp_path / "nope.csv"))
        assert code == 2

    def test_json_mode(self, capsys):
        code, out, _ = run(capsys, "validate", "--json")
        doc = json.loads(out)
        assert doc["ok"] is True and len(doc["files"]) == 3


class TestKardashev:
    def test_from_energy(self, capsys):
        code, out, _ = run(capsys, "kardashev", "--ej", "939.72")
        assert code == 0
        assert "0.74741" in out or "0.74742" in out

    def test_from_k(self, capsys):
        code, out, _ = run(capsys, "kardashev", "--k", "1", "--json")
        assert code == 0
        doc = json.loads(out)
        assert doc["power_watts"] == pytest.approx(1e16, rel=1e-12)

    def test_from_watts(self, capsys):
        code, out, _ = run(capsys, "kardashev", "--watts", "1e6", "--json")
        assert json.loads(out)["kardashev_index"] == 0.0

    def test_non_positive_quantity(self, capsys):
        code, _, err = run(capsys, "kardashev", "--ej", "-5")
        assert code == 1

    def test_exactly_one_input(self, capsys):
        assert run(capsys, "kardashev", "--ej", "5", "--k", "1")[0] == 1
        assert run(capsys, "kardashev")[0] == 1

    def test_julian_convention(self, capsys):
        _, civil, _ = run(capsys, "kardashev", "--ej", "600", "--json")
        _, julian, _ = run(capsys, "kardashev", "--ej", "600", "--json",
                           "--year-convention", "julian")
        assert json.loads(civil)["kardashev_index"] > \
            json.loads(julian)["kardashev_index"]


class TestTrain:
    def test_writes_model_and_metrics(self, capsys, tmp_path):
        code, out, _ = run(capsys, "train", "--out", str(tmp_path), *FAST)
        assert code == 0
        doc = json.loads((tmp_path / "train_metrics.json").read_text())
        assert doc["metrics"]["r2"] > 0.9
        assert doc["reference_metrics"]["r2"] == 0.991
        assert doc["reference_metrics"]["rmse"] == 1.05
        assert (tmp_path / "model.json").exists()
        assert "R^2" in out

    def test_deterministic_across_runs(self, capsys, tmp_path):
        run(capsys, "train", "--out", str(tmp_path / "a"), "--seed", "3", *FAST)
        run(capsys, "train", "--out", str(tmp_path / "b"), "--seed", "3", *FAST)
        a = (tmp_path / "a" / "model.json").read_bytes()
        b = (tmp_path / "b" / "model.json").read_bytes()
        assert a == b

    def test_seed_changes_split_and_metrics(self, capsys, tmp_path):
        _, out1, _ = run(capsys, "train", "--out", str(tmp_path / "a"),
                         "--seed", "1", "--json", *FAST)
        _, out2, _ = run(capsys, "train", "--out", str(tmp_path / "b"),
                         "--seed", "2", "--json", *FAST)
        m1, m2 = json.loads(out1), json.loads(out2)
        assert m1["metrics"]["r2"] != m2["metrics"]["r2"]
        assert m1["seed"] == 1 and m2["seed"] == 2

    def test_bad_holdout(self, capsys, tmp_path):
        code, _, _ = run(capsys, "train", "--out", str(tmp_path),
                         "--holdout", "1.5")
        assert code == 1


class TestShap:
    def test_ranking_csv(self, capsys, tmp_path):
        run(capsys, "train", "--out", str(tmp_path), *FAST)
        code, out, _ = run(capsys, "shap", "--model", str(tmp_path / "model.json"),
                           "--out", str(tmp_path), "--max-rows", "48")
        assert code == 0
        lines = [l for l in (tmp_path / "shap_summary.csv").read_text().splitlines()
                 if not l.startswith("#")]
        assert lines[0] == "feature,mean_abs_shap,rank"
        assert len(lines) == 1 + 10  # one row per feature
        assert lines[1].startswith("gdp_usd2015,")
        assert "gdp_usd2015" in out

    def test_empty_panel_is_data_error(self, capsys, tmp_path):
        empty = tmp_path / "panel.csv"
        from kscale.ingest import PANEL_COLUMNS
        empty.write_text(",".join(PANEL_COLUMNS) + "\n")
        code, _, _ = run(capsys, "shap", "--panel", str(empty),
                         "--out", str(tmp_path), *FAST)
        assert code == 2

    def test_feature_guard_exit_code(self, capsys, tmp_path):
        # hand-built model with more features than the enumeration guard allows
        doc = {"schema_version": 1, "kind": "kscale-forest",
               "feature_names": [f"f{i}" for i in range(21)],
               "hyper": {"n_trees": 1, "mtry": 1, "min_leaf": 1,
                         "max_depth": None, "seed": 0},
               "oob_rmse": 0.0,
               "trees": [{"feature": [-1], "threshold": [0.0], "left": [-1],
                          "right": [-1], "value": [1.0], "cover": [5]}]}
        model_path = tmp_path / "big.json"
        model_path.write_text(json.dumps(doc))
        panel = sample_path("panel.csv")
        code, _, err = run(capsys, "shap", "--model", str(model_path),
                           "--panel", str(panel), "--out", str(tmp_path),
                           "--method", "enumeration", "--max-rows", "2")
        assert code == 4


class TestArima:
    def test_forecast_files(self, capsys, tmp_path):
        code, out, _ = run(capsys, "arima", "--out", str(tmp_path))
        assert code == 0
        fc = (tmp_path / "ratio_forecast.csv").read_text().splitlines()
        data = [l for l in fc if not l.startswith("#")]
        assert data[0] == "year,point,lower95,upper95"
        assert len(data) == 1 + 40  # 2021..2060
        first = data[1].split(",")
        last = data[-1].split(",")
        assert int(first[0]) == 2021 and int(last[0]) == 2060
        # declining point path and widening interval
        assert float(last[1]) < float(first[1])
        w_first = float(first[3]) - float(first[2])
        w_last = float(last[3]) - float(last[2])
        assert w_last > w_first
        ident = (tmp_path / "ratio_identification.csv").read_text().splitlines()
        assert any(l.startswith("lag,acf,pacf") for l in ident)

    def test_order_override(self, capsys, tmp_path):
        code, out, _ = run(capsys, "arima", "--out", str(tmp_path),
                           "--order", "0,1,0", "--json")
        assert code == 0
        doc = json.loads(out)
        assert doc["order"] == {"p": 0, "d": 1, "q": 0}

    def test_zero_horizon_is_usage_error(self, capsys, tmp_path):
        code, _, _ = run(capsys, "arima", "--out", str(tmp_path), "--horizon", "0")
        assert code == 1

    def test_bad_order_text(self, capsys, tmp_path):
        code, _, _ = run(capsys, "arima", "--out", str(tmp_path), "--order", "9,9")
        assert code == 1


class TestPipeline:
    def test_end_to_end_outputs(self, capsys, tmp_path):
        code, out, _ = run(capsys, "pipeline", "--out", str(tmp_path / "r"),
                           "--fusion", *FAST)
        assert code == 0
        table = [l for l in (tmp_path / "r" / "table1.csv").read_text().splitlines()
                 if not l.startswith("#")]
        assert table[0] == ("year,energy_ssp126_ej,energy_ssp245_ej,"
                            "energy_ssp370_ej,energy_ssp585_ej,k")
        years = [int(l.split(",")[0]) for l in table[1:]]
        assert years == list(range(2025, 2061, 5))
        final = table[-1].split(",")
        assert 800.0 < float(final[1]) < 1100.0
        assert 0.74 < float(final[5]) < 0.76
        traj = [l for l in
                (tmp_path / "r" / "k_trajectory.csv").read_text().splitlines()
                if not l.startswith("#")]
        assert traj[0] == "year,k_with_fusion,k_baseline"
        assert len(traj) == 1 + 41  # 2060..2100
        manifest = json.loads((tmp_path / "r" / "run_manifest.json").read_text())
        assert manifest["seed"] == 0 and "config_hash" in manifest

    def test_byte_identical_reruns_across_jobs(self, capsys, tmp_path):
        for sub, jobs in (("a", "1"), ("b", "4")):
            workdir = tmp_path / sub
            code, _, _ = run(capsys, "pipeline", "--out", str(workdir / "out"),
                             "--fusion", "--jobs", jobs, *FAST)
            assert code == 0
        for name in ("table1.csv", "k_trajectory.csv", "run_manifest.json"):
            a = (tmp_path / "a" / "out" / name).read_bytes()
            b = (tmp_path / "b" / "out" / name).read_bytes()
            assert a == b, name


class TestFusionCommand:
    def test_endpoints(self, capsys, tmp_path):
        code, out, _ = run(capsys, "fusion", "--out", str(tmp_path), "--json")
        assert code == 0
        doc = json.loads(out)
        assert doc["k_end_with_fusion"] == pytest.approx(0.7719, abs=5e-4)
        assert doc["k_end_baseline"] == pytest.approx(0.7534, abs=5e-4)

    def test_bad_growth_pair(self, capsys, tmp_path):
        code, _, _ = run(capsys, "fusion", "--out", str(tmp_path),
                         "--growth-fusion", "0.001", "--growth-baseline", "0.01")
        assert code == 1


class TestExitCodes:
    def test_unknown_option_is_usage(self, capsys):
        assert run(capsys, "kardashev", "--frobnicate")[0] == 1

    def test_unknown_command_is_usage(self, capsys):
        assert run(capsys, "transmogrify")[0] == 1

    def test_config_file_and_flag_precedence(self, capsys, tmp_path):
        cfg = tmp_path / "cfg.json"
        cfg.write_text(json.dumps({"seed": 7, "trees": 25}))
        _, out, _ = run(capsys, "train", "--config", str(cfg),
                        "--out", str(tmp_path), "--json")
        doc = json.loads(out)
        assert doc["seed"] == 7 and doc["n_trees"] == 25
        _, out2, _ = run(capsys, "train", "--config", str(cfg), "--seed", "9",
                         "--out", str(tmp_path), "--json")
        assert json.loads(out2)["seed"] == 9

    def test_unknown_config_key(self, capsys, tmp_path):
        cfg = tmp_path / "cfg.json"
        cfg.write_text(json.dumps({"tress": 25}))
        code, _, _ = run(capsys, "train", "--config", str(cfg),
                         "--out", str(tmp_path))
        assert code == 2
