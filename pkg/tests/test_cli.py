"""End-to-end tests of the command line layer.

The commands run in process through ``cli.main`` so assertions can reach
stderr and artifacts cheaply; one subprocess test covers the module
entry point.  Reference values in ``modes.csv`` are pinned against the
big-float relaxation oracle, independent of the package's own special
functions.
"""

from __future__ import annotations

import csv
import json
import subprocess
import sys

import numpy as np
import pytest

from fracstep import cli
from fracstep.errors import NumericError

from oracles import relaxation_oracle


def write_config(path, payload):
    path.write_text(json.dumps(payload), encoding="utf-8")
    return str(path)


def reference_config(**run):
    return {
        "problem": {
            "schedule": {"breakpoints": [0.0, 1.0], "orders": [0.5]},
            "operator": {"diffusion": 1.0, "reaction": 0.0, "length": 1.0},
            "initial": {"kind": "modes", "coefficients": [1.0]},
            "source": {"kind": "zero"},
        },
        "run": {"cells": 64, "quad": 16, **run},
    }


def two_segment_config(**run):
    return {
        "problem": {
            "schedule": {"breakpoints": [0.0, 0.5, 1.0],
                         "orders": [0.3, 0.8]},
            "operator": {"diffusion": 1.0, "reaction": 0.0, "length": 1.0},
            "initial": {"kind": "modes", "coefficients": [1.0, 0.5]},
            "source": {"kind": "zero"},
        },
        "run": {"cells": 48, "quad": 16, **run},
    }


def read_csv(path):
    with open(path, newline="") as handle:
        rows = list(csv.reader(handle))
    header, body = rows[0], rows[1:]
    return header, np.array([[float(c) for c in row] for row in body])


class TestSolve:
    def test_reference_mode_matches_oracle(self, tmp_path):
        cfg = write_config(tmp_path / "c.json",
                           reference_config(time_points=9))
        assert cli.main(["solve", "--config", cfg,
                         "--out", str(tmp_path / "out")]) == 0
        header, body = read_csv(tmp_path / "out" / "modes.csv")
        assert header == ["t", "n", "u_n"]
        lam = np.pi ** 2
        for t, n, u in body:
            assert n == 1.0
            expected = float(relaxation_oracle(0.5, lam, t))
            assert abs(u - expected) <= 1e-8

    def test_zero_data_writes_zero_field(self, tmp_path):
        payload = reference_config(space_points=5, time_points=5)
        payload["problem"]["initial"] = {"kind": "zero", "num_modes": 3}
        cfg = write_config(tmp_path / "c.json", payload)
        assert cli.main(["solve", "--config", cfg,
                         "--out", str(tmp_path / "out")]) == 0
        _, sol = read_csv(tmp_path / "out" / "solution.csv")
        assert sol.shape == (25, 3)
        assert np.all(sol[:, 2] == 0.0)
        _, modes = read_csv(tmp_path / "out" / "modes.csv")
        assert np.all(modes[:, 2] == 0.0)

    def test_solution_grid_layout(self, tmp_path):
        cfg = write_config(tmp_path / "c.json",
                           reference_config(space_points=4, time_points=3))
        assert cli.main(["solve", "--config", cfg,
                         "--out", str(tmp_path / "out")]) == 0
        _, sol = read_csv(tmp_path / "out" / "solution.csv")
        # x varies fastest inside each time block
        assert sol.shape == (12, 3)
        assert np.allclose(sol[:4, 1], 0.0)
        assert np.allclose(sol[:4, 0], np.linspace(0.0, 1.0, 4))
        assert np.allclose(sol[-4:, 1], 1.0)

    def test_csv_17_digits_lf_endings(self, tmp_path):
        cfg = write_config(tmp_path / "c.json",
                           reference_config(time_points=3))
        assert cli.main(["solve", "--config", cfg,
                         "--out", str(tmp_path / "out")]) == 0
        blob = (tmp_path / "out" / "modes.csv").read_bytes()
        assert b"\r" not in blob
        text = blob.decode()
        cell = text.splitlines()[2].split(",")[2]
        assert float(cell) != 0.0
        # round-trips exactly through the printed representation
        assert format(float(cell), ".17g") == cell

    def test_meta_records_versions_and_echo(self, tmp_path):
        payload = reference_config(time_points=3)
        cfg = write_config(tmp_path / "c.json", payload)
        assert cli.main(["solve", "--config", cfg, "--out",
                         str(tmp_path / "out"), "--deterministic"]) == 0
        meta = json.loads((tmp_path / "out" / "meta.json").read_text())
        assert meta["config"] == payload
        assert meta["threads"] == 1
        assert meta["deterministic"] is True
        for key in ("python", "numpy", "scipy", "fracstep"):
            assert meta["versions"][key]
        assert meta["timings"]["total_seconds"] > 0.0

    def test_round_trip_from_meta_echo_is_byte_identical(self, tmp_path):
        cfg = write_config(tmp_path / "c.json",
                           two_segment_config(time_points=7))
        assert cli.main(["solve", "--config", cfg,
                         "--out", str(tmp_path / "a")]) == 0
        meta = json.loads((tmp_path / "a" / "meta.json").read_text())
        echo = write_config(tmp_path / "echo.json", meta["config"])
        assert cli.main(["solve", "--config", echo,
                         "--out", str(tmp_path / "b")]) == 0
        for name in ("solution.csv", "modes.csv"):
            assert (tmp_path / "a" / name).read_bytes() == \
                (tmp_path / "b" / name).read_bytes()


class TestConfigErrors:
    def test_malformed_json_exits_2_no_outputs(self, tmp_path, capsys):
        bad = tmp_path / "bad.json"
        bad.write_text('{"problem": ', encoding="utf-8")
        out = tmp_path / "out"
        assert cli.main(["solve", "--config", str(bad),
                         "--out", str(out)]) == 2
        diag = json.loads(capsys.readouterr().err)
        assert diag["error"] == "config"
        assert "JSON" in diag["message"]
        assert not out.exists()

    def test_unknown_key_rejected_with_pointer(self, tmp_path, capsys):
        payload = reference_config()
        payload["problem"]["surprise"] = 1
        cfg = write_config(tmp_path / "c.json", payload)
        assert cli.main(["solve", "--config", cfg,
                         "--out", str(tmp_path / "out")]) == 2
        diag = json.loads(capsys.readouterr().err)
        assert diag["pointer"] == "/problem"
        assert "surprise" in diag["message"]

    def test_order_out_of_range_pointer(self, tmp_path, capsys):
        payload = reference_config()
        payload["problem"]["schedule"]["orders"] = [1.5]
        cfg = write_config(tmp_path / "c.json", payload)
        assert cli.main(["solve", "--config", cfg,
                         "--out", str(tmp_path / "out")]) == 2
        diag = json.loads(capsys.readouterr().err)
        assert diag["pointer"].startswith("/problem/schedule/orders")

    def test_missing_file_exits_2(self, tmp_path, capsys):
        assert cli.main(["solve", "--config",
                         str(tmp_path / "nope.json"),
                         "--out", str(tmp_path / "out")]) == 2
        assert json.loads(capsys.readouterr().err)["error"] == "config"

    def test_misaligned_oracle_grid_exits_2(self, tmp_path, capsys):
        payload = reference_config()
        payload["problem"]["schedule"] = {
            "breakpoints": [0.0, 1.0 / 3.0, 1.0], "orders": [0.3, 0.8]}
        payload["problem"]["initial"]["coefficients"] = [1.0]
        cfg = write_config(tmp_path / "c.json", payload)
        assert cli.main(["oracle", "--config", cfg,
                         "--out", str(tmp_path / "out")]) == 2
        diag = json.loads(capsys.readouterr().err)
        assert diag["pointer"] == "/run/oracle_step_exponent"

    def test_ml_window_order_checked(self, tmp_path, capsys):
        cfg = write_config(tmp_path / "c.json", reference_config(
            ml_z_min=-1.0, ml_z_max=-2.0))
        assert cli.main(["ml-eval", "--config", cfg,
                         "--out", str(tmp_path / "out")]) == 2
        diag = json.loads(capsys.readouterr().err)
        assert diag["pointer"] == "/run/ml_z_min"

    def test_bad_thread_count_exits_2(self, tmp_path, capsys):
        cfg = write_config(tmp_path / "c.json", reference_config())
        assert cli.main(["solve", "--config", cfg, "--out",
                         str(tmp_path / "out"), "--threads", "0"]) == 2
        assert json.loads(capsys.readouterr().err)["error"] == "config"


class TestConfigSources:
    def test_polynomial_profile_and_derivative(self):
        from fracstep.config import build_run_config
        payload = reference_config()
        payload["problem"]["source"] = {
            "kind": "separable", "coefficients": [2.0],
            "time_profile": {"kind": "polynomial",
                             "coefficients": [1.0, -0.5, 0.25]}}
        src = build_run_config(payload).problem.source
        ts = np.array([0.0, 0.3, 1.0])
        assert np.allclose(src.mode_values(1, ts),
                           2.0 * (1.0 - 0.5 * ts + 0.25 * ts ** 2),
                           rtol=1e-15)
        assert np.allclose(src.mode_derivative(1, ts),
                           2.0 * (-0.5 + 0.5 * ts), rtol=1e-15)

    def test_power_profile_and_derivative(self):
        from fracstep.config import build_run_config
        payload = reference_config()
        payload["problem"]["source"] = {
            "kind": "separable", "coefficients": [3.0],
            "time_profile": {"kind": "power", "scale": 1.5,
                             "exponent": 0.2}}
        src = build_run_config(payload).problem.source
        ts = np.array([0.25, 1.0])
        assert np.allclose(src.mode_values(1, ts), 4.5 * ts ** 0.2,
                           rtol=1e-15)
        assert np.allclose(src.mode_derivative(1, ts),
                           0.9 * ts ** -0.8, rtol=1e-15)
        # unbounded but integrable at the left endpoint: sampled as inf
        assert np.isposinf(src.mode_derivative(1, np.array([0.0]))[0])

    def test_zero_source_builds_none(self):
        from fracstep.config import build_run_config
        assert build_run_config(reference_config()).problem.source is None

    def test_coefficient_count_mismatch_pointer(self, tmp_path, capsys):
        payload = reference_config()
        payload["problem"]["source"] = {
            "kind": "separable", "coefficients": [1.0, 2.0],
            "time_profile": {"kind": "polynomial", "coefficients": [1.0]}}
        cfg = write_config(tmp_path / "c.json", payload)
        assert cli.main(["solve", "--config", cfg,
                         "--out", str(tmp_path / "out")]) == 2
        diag = json.loads(capsys.readouterr().err)
        assert diag["pointer"] == "/problem/source/coefficients"

    def test_sourced_solve_matches_library(self, tmp_path):
        payload = reference_config(time_points=6)
        payload["problem"]["source"] = {
            "kind": "separable", "coefficients": [0.7],
            "time_profile": {"kind": "polynomial",
                             "coefficients": [1.0, 0.5]}}
        cfg = write_config(tmp_path / "c.json", payload)
        assert cli.main(["solve", "--config", cfg,
                         "--out", str(tmp_path / "out")]) == 0
        _, modes = read_csv(tmp_path / "out" / "modes.csv")

        from fracstep.operator import OperatorSpec
        from fracstep.schedule import OrderSchedule
        from fracstep.solver import ProblemSpec, SeparableSource, solve
        from fracstep.special import reset_ml_accelerator
        # the CLI ran cold; match its evaluation path exactly
        reset_ml_accelerator()
        spec = ProblemSpec(
            schedule=OrderSchedule((0.0, 1.0), (0.5,)),
            operator=OperatorSpec(),
            initial_coefficients=(1.0,),
            source=SeparableSource(
                (0.7,),
                lambda t: 1.0 + 0.5 * np.asarray(t, dtype=float),
                lambda t: np.full_like(np.asarray(t, dtype=float), 0.5)))
        field = solve(spec, n_cells=64, n_quad=16)
        ts = np.linspace(0.0, 1.0, 6)
        assert np.array_equal(modes[:, 2], field.mode_trajectory(1, ts))


class TestNumericExit:
    def test_runtime_failure_exits_3(self, tmp_path, capsys, monkeypatch):
        def explode(cfg):
            raise NumericError("synthetic failure", mode=1, segment=0)

        monkeypatch.setattr(cli, "_solve_field", explode)
        cfg = write_config(tmp_path / "c.json", reference_config())
        out = tmp_path / "out"
        assert cli.main(["solve", "--config", cfg,
                         "--out", str(out)]) == 3
        diag = json.loads(capsys.readouterr().err)
        assert diag["error"] == "numeric"
        assert "synthetic failure" in diag["message"]
        assert not (out / "meta.json").exists()
        assert not (out / "solution.csv").exists()


class TestOracle:
    def test_oracle_matches_direct_l1(self, tmp_path):
        cfg = write_config(tmp_path / "c.json",
                           reference_config(oracle_step_exponent=6))
        assert cli.main(["oracle", "--config", cfg,
                         "--out", str(tmp_path / "out")]) == 0
        header, body = read_csv(tmp_path / "out" / "oracle.csv")
        assert header == ["t", "n", "u_n"]
        assert body.shape == (65, 3)
        assert body[0, 2] == 1.0
        # direct march through the library must agree exactly
        from fracstep.l1 import L1Grid, solve_mode_l1
        from fracstep.schedule import OrderSchedule
        sched = OrderSchedule((0.0, 1.0), (0.5,))
        grid = L1Grid.for_schedule(sched, 2.0 ** -6)
        u = solve_mode_l1(np.pi ** 2, lambda t: np.zeros_like(t),
                          sched, 1.0, grid)
        assert np.array_equal(body[:, 2], u)

    def test_oracle_field_written_on_request(self, tmp_path):
        cfg = write_config(tmp_path / "c.json", reference_config(
            oracle_step_exponent=5, oracle_spatial_points=31))
        assert cli.main(["oracle", "--config", cfg,
                         "--out", str(tmp_path / "out")]) == 0
        header, body = read_csv(tmp_path / "out" / "oracle_field.csv")
        assert header == ["x", "t", "u"]
        assert body.shape == (33 * 33, 3)
        boundary = body[(body[:, 0] == 0.0) | (body[:, 0] == 1.0)]
        assert np.all(boundary[:, 2] == 0.0)

    def test_no_field_file_by_default(self, tmp_path):
        cfg = write_config(tmp_path / "c.json",
                           reference_config(oracle_step_exponent=5))
        assert cli.main(["oracle", "--config", cfg,
                         "--out", str(tmp_path / "out")]) == 0
        assert not (tmp_path / "out" / "oracle_field.csv").exists()


class TestCompare:
    def test_zero_data_zero_discrepancy(self, tmp_path):
        payload = reference_config(compare_step_exponents=[4, 5])
        payload["problem"]["initial"] = {"kind": "zero", "num_modes": 2}
        cfg = write_config(tmp_path / "c.json", payload)
        assert cli.main(["compare", "--config", cfg,
                         "--out", str(tmp_path / "out")]) == 0
        _, body = read_csv(tmp_path / "out" / "compare.csv")
        assert np.all(body[:, 1:] == 0.0)

    def test_discrepancy_decreases_with_step(self, tmp_path):
        cfg = write_config(tmp_path / "c.json", two_segment_config(
            compare_step_exponents=[5, 7, 9]))
        assert cli.main(["compare", "--config", cfg,
                         "--out", str(tmp_path / "out")]) == 0
        header, body = read_csv(tmp_path / "out" / "compare.csv")
        assert header == ["step", "max_discrepancy", "rms_discrepancy"]
        assert body.shape == (3, 3)
        assert np.all(np.diff(body[:, 0]) < 0.0)
        assert np.all(np.diff(body[:, 1]) < 0.0)
        assert np.all(np.diff(body[:, 2]) < 0.0)
        assert np.all(body[:, 2] <= body[:, 1])


class TestVerify:
    def test_report_artifacts(self, tmp_path):
        cfg = write_config(tmp_path / "c.json",
                           two_segment_config(verify_quad=16))
        assert cli.main(["verify", "--config", cfg,
                         "--out", str(tmp_path / "out")]) == 0
        payload = json.loads((tmp_path / "out" / "verify.json").read_text())
        report = payload["report"]
        assert report["junction_gaps"] == [0.0]
        assert report["residual_max"] <= 1e-3
        assert report["source_rates"][0] is None
        assert -0.15 > report["derivative_rates"][1] > -0.3
        limit = payload["initial_limit"]
        assert limit["deviations"] == sorted(limit["deviations"],
                                             reverse=True)
        assert limit["initial_norm"] == pytest.approx(np.sqrt(1.25))

        with open(tmp_path / "out" / "rate_samples.csv", newline="") as fh:
            rows = list(csv.reader(fh))
        assert rows[0] == ["kind", "segment", "offset", "norm"]
        kinds = {row[0] for row in rows[1:]}
        assert kinds == {"derivative", "source_rate"}
        norms = [float(row[3]) for row in rows[1:] if row[0] == "derivative"]
        assert all(v > 0.0 for v in norms)


class TestMlEval:
    def test_table_matches_library(self, tmp_path):
        cfg = write_config(tmp_path / "c.json", reference_config(
            ml_alpha=0.3, ml_beta=0.3, ml_z_min=-50.0, ml_z_max=0.0,
            ml_count=11))
        assert cli.main(["ml-eval", "--config", cfg,
                         "--out", str(tmp_path / "out")]) == 0
        header, body = read_csv(tmp_path / "out" / "ml.csv")
        assert header == ["alpha", "beta", "z", "value"]
        assert body.shape == (11, 4)
        from fracstep.special import ml_values, reset_ml_accelerator
        reset_ml_accelerator()
        expected = ml_values(0.3, 0.3, np.linspace(-50.0, 0.0, 11))
        assert np.array_equal(body[:, 3], expected)


def test_module_entry_point(tmp_path):
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps(reference_config(time_points=3)))
    proc = subprocess.run(
        [sys.executable, "-m", "fracstep.cli", "solve",
         "--config", str(cfg), "--out", str(tmp_path / "out")],
        capture_output=True, text=True)
    assert proc.returncode == 0, proc.stderr
    assert (tmp_path / "out" / "solution.csv").exists()
