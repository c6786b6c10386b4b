import json

import numpy as np
import pytest

from delaypred.cli import (EXIT_CONFIG, EXIT_DIVERGED, EXIT_INFEASIBLE, EXIT_OK, main)

from conftest import REF_GAIN_R0


def write_plant(tmp_path, name="plant.json"):
    doc = {"A": [[0.0, 1.0], [3.2, -1.4]], "B_u": [[0.0], [1.0]],
           "B_w": [[0.0], [1.0]], "C": [[1.0, 0.0], [0.0, 1.0]],
           "D_w": [[0.0], [0.0]], "d": 5}
    path = tmp_path / name
    path.write_text(json.dumps(doc))
    return path


def write_experiment(tmp_path, overrides=None, name="exp.json"):
    write_plant(tmp_path)
    doc = {
        "plant": "plant.json",
        "r": 0,
        "design": {"zeta_a": 1.0, "zeta_b": 0.0, "minimize_gamma": True},
        "sim": {
            "K": [[-3.14, 1.5]],
            "disturbance": {"kind": "constant", "value": 1.6},
            "horizon": 100,
            "method": "modified",
            "x0": [1.5, 1.0],
        },
    }
    for key, value in (overrides or {}).items():
        if value is None:
            doc.pop(key, None)
        else:
            doc[key] = value
    path = tmp_path / name
    path.write_text(json.dumps(doc))
    return path


class TestDesignCommand:
    def test_design_writes_certificate_and_report(self, tmp_path, capsys):
        cfg = write_experiment(tmp_path)
        out = tmp_path / "out"
        assert main(["design", "--config", str(cfg), "--out", str(out)]) == EXIT_OK
        cert = json.loads((out / "certificate.json").read_text())
        assert cert["gamma"] > 0
        report = json.loads((out / "verification_report.json").read_text())
        assert report["passed"] is True
        assert "gamma" in capsys.readouterr().out

    def test_missing_plant_file_is_config_error(self, tmp_path):
        cfg = write_experiment(tmp_path, overrides={"plant": "nope.json"})
        assert main(["design", "--config", str(cfg), "--out", str(tmp_path / "o")]) == EXIT_CONFIG

    def test_infeasible_exit_code(self, tmp_path):
        plant = {"A": [[2.0, 0.0], [0.0, 0.5]], "B_u": [[1.0], [1.0]],
                 "B_w": [[0.0], [1.0]], "C": [[0.0, 1.0]], "D_w": [[0.0]], "d": 3}
        cfg = write_experiment(tmp_path, overrides={"plant": plant, "sim": None})
        assert main(["design", "--config", str(cfg), "--out", str(tmp_path / "o")]) == EXIT_INFEASIBLE

    def test_supplied_gain_verification_only(self, tmp_path):
        cfg = write_experiment(tmp_path, overrides={
            "design": None, "gain_L": REF_GAIN_R0.tolist(), "region": [1.0, 0.0]})
        out = tmp_path / "out"
        assert main(["design", "--config", str(cfg), "--out", str(out)]) == EXIT_OK
        assert not (out / "certificate.json").exists()
        report = json.loads((out / "verification_report.json").read_text())
        assert report["schur_stable"] is True
        assert report["in_band"] is True

    def test_design_and_gain_mutually_exclusive(self, tmp_path):
        cfg = write_experiment(tmp_path, overrides={"gain_L": REF_GAIN_R0.tolist()})
        assert main(["design", "--config", str(cfg), "--out", str(tmp_path / "o")]) == EXIT_CONFIG


class TestSimulateCommand:
    def test_simulate_writes_trace_and_metrics(self, tmp_path):
        cfg = write_experiment(tmp_path)
        out = tmp_path / "out"
        assert main(["simulate", "--config", str(cfg), "--out", str(out)]) == EXIT_OK
        assert (out / "trace_modified.csv").exists()
        metrics = json.loads((out / "metrics.json").read_text())
        assert metrics["peak_pred_err_norm"] < 100.0
        # the design ran on the fly and left its certificate
        assert (out / "certificate.json").exists()

    def test_error_column_empty_for_zero_disturbance(self, tmp_path):
        cfg = write_experiment(tmp_path, overrides={
            "gain_L": REF_GAIN_R0.tolist(), "design": None,
            "sim": {"K": [[-3.14, 1.5]],
                    "disturbance": {"kind": "constant", "value": 0.0},
                    "horizon": 100, "method": "modified", "x0": [0.0, 0.0]}})
        out = tmp_path / "out"
        assert main(["simulate", "--config", str(cfg), "--out", str(out)]) == EXIT_OK
        metrics = json.loads((out / "metrics.json").read_text())
        assert metrics["peak_pred_err_norm"] < 1e-10

    def test_horizon_shorter_than_delay_rejected(self, tmp_path):
        cfg = write_experiment(tmp_path, overrides={
            "sim": {"K": [[-3.14, 1.5]], "disturbance": {"kind": "constant", "value": 1.6},
                    "horizon": 3, "method": "modified", "x0": [1.5, 1.0]}})
        assert main(["simulate", "--config", str(cfg), "--out", str(tmp_path / "o")]) == EXIT_CONFIG

    def test_exact_method_rejected(self, tmp_path):
        cfg = write_experiment(tmp_path, overrides={
            "sim": {"K": [[-3.14, 1.5]], "disturbance": {"kind": "constant", "value": 1.6},
                    "horizon": 50, "method": "exact", "x0": [1.5, 1.0]}})
        assert main(["simulate", "--config", str(cfg), "--out", str(tmp_path / "o")]) == EXIT_CONFIG

    def test_divergence_exit_code(self, tmp_path):
        cfg = write_experiment(tmp_path, overrides={
            "design": None,
            "sim": {"K": [[10.0, 10.0]], "disturbance": {"kind": "constant", "value": 0.0},
                    "horizon": 2000, "method": "classical", "x0": [1.5, 1.0]}})
        assert main(["simulate", "--config", str(cfg), "--out", str(tmp_path / "o")]) == EXIT_DIVERGED


class TestCompareCommand:
    def test_compare_orders_methods(self, tmp_path, capsys):
        cfg = write_experiment(tmp_path)
        out = tmp_path / "out"
        code = main(["compare", "--config", str(cfg), "--out", str(out),
                     "--methods", "modified,wu1,wu2"])
        assert code == EXIT_OK
        metrics = json.loads((out / "metrics.json").read_text())
        assert metrics["modified"]["peak_pred_err_norm"] < metrics["wu1"]["peak_pred_err_norm"]
        assert metrics["modified"]["peak_pred_err_norm"] < metrics["wu2"]["peak_pred_err_norm"]
        for m in ("modified", "wu1", "wu2"):
            assert (out / f"trace_{m}.csv").exists()
        assert "peak_pred_err" in capsys.readouterr().out

    def test_classical_vs_proposed_steady_errors(self, tmp_path):
        # constant disturbance: the classical prediction keeps a steady
        # error while the observer-based one drives it to zero
        cfg = write_experiment(tmp_path, overrides={
            "sim": {"K": [[-3.14, 1.5]], "disturbance": {"kind": "constant", "value": 1.6},
                    "horizon": 200, "method": "proposed", "x0": [1.5, 1.0]}})
        out = tmp_path / "out"
        assert main(["compare", "--config", str(cfg), "--out", str(out),
                     "--methods", "classical,proposed"]) == EXIT_OK
        metrics = json.loads((out / "metrics.json").read_text())
        assert metrics["classical"]["steady_rms_pred_err_norm"] > 1e-2
        assert metrics["proposed"]["steady_rms_pred_err_norm"] < 1e-8

    def test_empty_methods_usage_error(self, tmp_path):
        cfg = write_experiment(tmp_path)
        assert main(["compare", "--config", str(cfg), "--out", str(tmp_path / "o"),
                     "--methods", " , "]) == EXIT_CONFIG

    def test_oracle_needs_flag(self, tmp_path):
        cfg = write_experiment(tmp_path)
        out = tmp_path / "o"
        assert main(["compare", "--config", str(cfg), "--out", str(out),
                     "--methods", "exact,modified"]) == EXIT_CONFIG
        assert main(["compare", "--config", str(cfg), "--out", str(out),
                     "--methods", "exact,modified", "--with-oracle"]) == EXIT_OK


class TestBoundCommand:
    def test_bound_curve_dominates_measurement(self, tmp_path):
        cfg = write_experiment(tmp_path)
        out = tmp_path / "out"
        assert main(["bound", "--config", str(cfg), "--out", str(out)]) == EXIT_OK
        report = json.loads((out / "bound_report.json").read_text())
        assert report["mu"] == pytest.approx(40.0)
        assert report["delta"] == pytest.approx(0.0, abs=1e-12)
        rows = (out / "bound_curve.csv").read_text().splitlines()[1:]
        for row in rows:
            _, bound, measured = row.split(",")
            assert float(measured) <= float(bound) + 1e-9

    def test_bound_needs_certificate(self, tmp_path):
        cfg = write_experiment(tmp_path, overrides={
            "design": None, "gain_L": REF_GAIN_R0.tolist()})
        assert main(["bound", "--config", str(cfg), "--out", str(tmp_path / "o")]) == EXIT_CONFIG

    def test_bound_flat_for_zero_residual(self, tmp_path):
        cfg = write_experiment(tmp_path)
        out = tmp_path / "out"
        main(["bound", "--config", str(cfg), "--out", str(out)])
        rows = (out / "bound_curve.csv").read_text().splitlines()[1:]
        bounds = {row.split(",")[1] for row in rows}
        assert len(bounds) == 1  # constant disturbance: flat sqrt(epsilon) line

    def test_high_order_reports_zero_mu(self, tmp_path):
        cfg = write_experiment(tmp_path, overrides={
            "r": 4,
            "sim": {"K": [[-3.14, 1.5]],
                    "disturbance": {"kind": "sinusoid", "amplitude": 0.6,
                                    "rate": 0.21485917317405873},
                    "horizon": 120, "method": "modified", "x0": [1.5, 1.0]}})
        out = tmp_path / "out"
        assert main(["bound", "--config", str(cfg), "--out", str(out)]) == EXIT_OK
        report = json.loads((out / "bound_report.json").read_text())
        assert report["mu"] == 0.0


class TestIdempotency:
    def test_rerun_overwrites_identical_outputs(self, tmp_path):
        cfg = write_experiment(tmp_path)
        out = tmp_path / "out"
        assert main(["design", "--config", str(cfg), "--out", str(out)]) == EXIT_OK
        first = (out / "certificate.json").read_bytes()
        assert main(["design", "--config", str(cfg), "--out", str(out)]) == EXIT_OK
        assert (out / "certificate.json").read_bytes() == first

    def test_seed_recorded_in_echo(self, tmp_path):
        cfg = write_experiment(tmp_path)
        out = tmp_path / "out"
        assert main(["design", "--config", str(cfg), "--out", str(out),
                     "--seed", "42"]) == EXIT_OK
        echo = json.loads((out / "config_echo.json").read_text())
        assert echo["seed"] == 42


class TestRepoConfigs:
    def test_checked_in_experiment_runs(self, tmp_path):
        # the shipped demo experiment must stay valid end to end
        from pathlib import Path
        cfg = Path(__file__).resolve().parents[1] / "configs" / "experiment_constant.json"
        out = tmp_path / "out"
        assert main(["design", "--config", str(cfg), "--out", str(out)]) == EXIT_OK

    def test_certificate_reuse_via_reference(self, tmp_path):
        cfg = write_experiment(tmp_path)
        out1 = tmp_path / "design_out"
        assert main(["design", "--config", str(cfg), "--out", str(out1)]) == EXIT_OK
        cfg2 = write_experiment(tmp_path, overrides={
            "design": None, "certificate": str(out1 / "certificate.json")}, name="exp2.json")
        out2 = tmp_path / "sim_out"
        assert main(["simulate", "--config", str(cfg2), "--out", str(out2)]) == EXIT_OK
