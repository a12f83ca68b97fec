import json
import os

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

import levypim as lp
from levypim.cli import cli
from levypim.config import ExperimentConfig, parse_config, serialize_config
from levypim.csvio import emit_trajectory_csv, parse_trajectory_csv
from levypim.errors import ConfigError, ParameterError
from levypim.svgplot import emit_svg_plot
from levypim.systems import Trajectory

BASE_CFG = """[system]
name = paper_example
alpha1 = 1.5

[pim]
macro_dt = 0.001
micro_count = 100
horizon = 0.05

[analysis]
p = 1.4
paths = 6

[run]
master_seed = 777
output_dir = {out}
"""


@pytest.fixture
def cfg_file(tmp_path):
    path = tmp_path / "exp.cfg"
    path.write_text(BASE_CFG.format(out=tmp_path / "out"))
    return str(path)


class TestConfig:
    def test_round_trip_semantic_identity(self, cfg_file):
        cfg = parse_config(open(cfg_file).read())
        text = serialize_config(cfg)
        cfg2 = parse_config(text)
        for f in ("name", "alpha1", "macro_dt", "micro_count", "horizon",
                  "p", "paths", "master_seed", "output_dir"):
            assert getattr(cfg, f) == getattr(cfg2, f), f

    def test_unknown_key_named_with_line(self):
        text = "[system]\nname = paper_example\nalpa1 = 1.5\n"
        with pytest.raises(ConfigError) as err:
            parse_config(text)
        assert err.value.key == "alpa1"
        assert err.value.line == 3

    def test_unknown_section_rejected(self):
        with pytest.raises(ConfigError) as err:
            parse_config("[systum]\nname = paper_example\n")
        assert err.value.key == "systum"

    def test_bad_value_type_named(self):
        with pytest.raises(ConfigError) as err:
            parse_config("[pim]\nmacro_dt = tiny\n")
        assert err.value.key == "macro_dt"

    def test_constraints_revalidated(self):
        with pytest.raises(ConfigError):
            parse_config("[analysis]\np = 2.5\n")
        with pytest.raises(ParameterError):
            parse_config("[pim]\nmacro_dt = -0.1\n")
        with pytest.raises(ConfigError):
            parse_config("[system]\nname = no_such_system\n")

    def test_defaults_follow_worked_example(self):
        cfg = ExperimentConfig().validate()
        assert (cfg.x0, cfg.y0) == (10.0, 10.0)
        assert cfg.macro_dt == 1e-3 and cfg.micro_count == 100
        sched = cfg.schedule()
        assert sched.micro_dt == 1e-3 / 100
        assert cfg.horizon == 1.0 and cfg.paths == 1000

    @given(st.floats(1e-4, 0.5), st.integers(1, 500), st.integers(0, 2 ** 32))
    @settings(max_examples=40, deadline=None)
    def test_round_trip_fuzz(self, macro_dt, count, seed):
        cfg = ExperimentConfig(macro_dt=macro_dt, micro_count=count,
                               horizon=max(1.0, 2 * macro_dt),
                               master_seed=seed)
        cfg2 = parse_config(serialize_config(cfg))
        assert cfg2.macro_dt == macro_dt
        assert cfg2.micro_count == count
        assert cfg2.master_seed == seed


class TestTrajectoryCsv:
    def test_round_trip_bitwise(self, tmp_path):
        t = Trajectory(np.arange(3) * 0.1,
                       np.array([1.0, np.pi, 1.0 / 3.0]))
        dest = tmp_path / "t.csv"
        emit_trajectory_csv(t, 7, dest)
        pid, back = parse_trajectory_csv(dest)
        assert pid == 7
        assert np.array_equal(back.times, t.times)
        assert np.array_equal(back.states, t.states)

    def test_two_point_trajectory_three_lines(self, tmp_path):
        t = Trajectory(np.array([0.0, 0.5]), np.array([1.0, 2.0]))
        dest = tmp_path / "t.csv"
        emit_trajectory_csv(t, 0, dest)
        assert len(dest.read_text().strip().split("\n")) == 3

    def test_multidim_columns(self, tmp_path):
        t = Trajectory(np.array([0.0, 0.5]), np.array([[1.0, 2.0], [3.0, 4.0]]))
        dest = tmp_path / "t.csv"
        emit_trajectory_csv(t, 0, dest)
        lines = dest.read_text().strip().split("\n")
        assert lines[0] == "path_id,step,t,value,value_dim2"
        assert lines[1].split(",")[3:] == ["1", "2"]


class TestSvg:
    def test_constant_series_is_horizontal(self, tmp_path):
        dest = tmp_path / "p.svg"
        emit_svg_plot([("c", [0.0, 1.0, 2.0], [0.5, 0.5, 0.5])], dest)
        text = dest.read_text()
        seg = text.split('<polyline points="')[1].split('"')[0]
        ys = {pt.split(",")[1] for pt in seg.split()}
        assert len(ys) == 1

    def test_empty_series_rejected_before_write(self, tmp_path):
        dest = tmp_path / "p.svg"
        with pytest.raises(ParameterError):
            emit_svg_plot([], dest)
        with pytest.raises(ParameterError):
            emit_svg_plot([("e", [], [])], dest)
        assert not dest.exists()

    def test_convergence_plot_slope_label_matches_fit(self, tmp_path):
        table = [(1, 0.3324), (2, 0.1711), (3, 0.0759), (4, 0.0444), (5, 0.0270)]
        slope, _ = lp.fit_log2_slope(table)
        ls = [l for l, _ in table]
        ys = [float(np.log2(e)) for _, e in table]
        c = np.mean(ys) - slope * np.mean(ls)
        dest = tmp_path / "conv.svg"
        emit_svg_plot([("log2 E_p", ls, ys)], dest,
                      fit_line=([1, 5], [c + slope, c + 5 * slope],
                                f"slope={slope:.2f}"))
        label = dest.read_text().split("slope=")[1].split("<")[0]
        assert abs(float(label) - slope) <= 0.01


class TestCli:
    def test_compare_outputs_and_row_count(self, tmp_path):
        # unit horizon with the worked-example macro step: 1001 grid points
        cfgtext = BASE_CFG.format(out=tmp_path / "out").replace(
            "horizon = 0.05", "horizon = 1.0").replace("paths = 6", "paths = 3")
        cfg = tmp_path / "c.cfg"
        cfg.write_text(cfgtext)
        assert cli(["compare", "--config", str(cfg)]) == 0
        out = tmp_path / "out"
        for name in ("pim_slow.csv", "effective.csv", "path_errors.csv",
                     "compare.svg", "manifest.cfg"):
            assert (out / name).exists()
        rows = (out / "pim_slow.csv").read_text().strip().split("\n")
        assert len(rows) - 1 == 1001

    def test_manifest_rerun_byte_identical_any_threads(self, cfg_file, tmp_path):
        assert cli(["compare", "--config", cfg_file]) == 0
        manifest = str(tmp_path / "out" / "manifest.cfg")
        assert cli(["compare", "--config", manifest, "--out",
                    str(tmp_path / "r1"), "--threads", "1"]) == 0
        assert cli(["compare", "--config", manifest, "--out",
                    str(tmp_path / "r2"), "--threads", "8"]) == 0
        for name in ("pim_slow.csv", "effective.csv", "path_errors.csv",
                     "compare.svg"):
            a = (tmp_path / "r1" / name).read_bytes()
            b = (tmp_path / "r2" / name).read_bytes()
            assert a == b, name

    def test_convergence_report_and_slope(self, cfg_file, tmp_path):
        assert cli(["convergence", "--config", cfg_file, "--lmax", "3",
                    "--paths", "4"]) == 0
        report = (tmp_path / "out" / "error_report.csv").read_text().strip()
        lines = report.split("\n")
        assert lines[0] == "l,macro_dt,micro_dt,M,K,accepted,E_p,stderr"
        assert len([l for l in lines if not l.startswith("#")]) - 1 == 3
        assert lines[-1].startswith("# log2_slope=")
        assert (tmp_path / "out" / "convergence.svg").exists()

    def test_weak_report(self, cfg_file, tmp_path):
        assert cli(["weak", "--config", cfg_file, "--paths", "12"]) == 0
        text = (tmp_path / "out" / "weak_report.csv").read_text()
        assert text.startswith("phi,weak_error,stderr")
        assert len(text.strip().split("\n")) == 4

    def test_sample_stable_outputs(self, tmp_path):
        out = str(tmp_path / "ss")
        assert cli(["sample-stable", "--alpha", "1.5", "--n", "500",
                    "--dt", "1.0", "--seed", "3", "--out", out]) == 0
        assert os.path.exists(os.path.join(out, "samples.csv"))
        assert os.path.exists(os.path.join(out, "samples.ecf.csv"))
        rows = open(os.path.join(out, "samples.csv")).read().strip().split("\n")
        assert len(rows) - 1 == 500

    def test_simulate_commands(self, cfg_file, tmp_path):
        assert cli(["simulate-pim", "--config", cfg_file]) == 0
        assert cli(["simulate-full", "--config", cfg_file]) == 0
        assert cli(["simulate-effective", "--config", cfg_file]) == 0
        out = tmp_path / "out"
        # the averaged run can consume the projective run's recorded noise
        assert cli(["simulate-effective", "--config", cfg_file, "--noise-log",
                    str(out / "noise_log.csv")]) == 0

    def test_config_error_exit_code_and_record(self, tmp_path, capsys):
        bad = tmp_path / "bad.cfg"
        bad.write_text("[system]\nnam = x\n")
        assert cli(["compare", "--config", str(bad)]) == 2
        record = json.loads(capsys.readouterr().err.strip().split("\n")[-1])
        assert record["exit_code"] == 2
        assert "nam" in record["message"]

    def test_budget_exit_code(self, cfg_file, tmp_path, capsys):
        text = open(cfg_file).read() + "\n[analysis]\nbudget = 100\n"
        # configparser forbids duplicate sections; rewrite cleanly
        cfg2 = tmp_path / "b.cfg"
        cfg2.write_text(BASE_CFG.format(out=tmp_path / "out").replace(
            "paths = 6", "paths = 2\nbudget = 100"))
        assert cli(["convergence", "--config", str(cfg2), "--lmax", "4"]) == 4
        record = json.loads(capsys.readouterr().err.strip().split("\n")[-1])
        assert record["exit_code"] == 4

    def test_numerical_failure_exit_code(self, tmp_path, capsys):
        cfgtext = BASE_CFG.format(out=tmp_path / "out").replace(
            "name = paper_example", "name = expanding_fast").replace(
            "micro_count = 100", "micro_count = 5000\nmicro_dt = 0.001")
        cfg = tmp_path / "e.cfg"
        cfg.write_text(cfgtext)
        assert cli(["simulate-pim", "--config", str(cfg)]) == 3
        record = json.loads(capsys.readouterr().err.strip().split("\n")[-1])
        assert record["exit_code"] == 3

    def test_manifest_records_provenance(self, cfg_file, tmp_path):
        assert cli(["simulate-pim", "--config", cfg_file]) == 0
        manifest = (tmp_path / "out" / "manifest.cfg").read_text()
        for key in ("version", "command", "backend", "created",
                    "rejected_paths", "threads"):
            assert key in manifest
        assert "command = simulate-pim" in manifest
