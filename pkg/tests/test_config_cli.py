"""Config parsing, serialization, output routing, and the CLI front end."""

import dataclasses
import os

import numpy as np
import pytest

from meairl import (ConfigError, EnvSpec, ExperimentConfig, RunSpec,
                    TrainingConfig, TrainingRecord, build_env,
                    parse_config_text, serialize_config)
from meairl.cli import (SUMMARY_CSV_HEADER, AggregateRow, aggregate,
                        attainment_threshold, main, median_steps,
                        render_steps, resolve_out_dir, summary_csv_text)
from meairl.training import CSV_HEADER, EvalRow


class TestConfigParsing:
    def test_empty_text_gives_defaults(self):
        cfg = parse_config_text("")
        assert serialize_config(cfg) == serialize_config(ExperimentConfig())

    def test_round_trip_object_identity(self):
        cfg = ExperimentConfig(
            env=EnvSpec(name="pointmass", noise_std=0.25),
            train=TrainingConfig(total_steps=500, pretrain_steps=100,
                                 algorithm="bc_none", disc_hidden=(32, 32),
                                 use_synthetic=False, seed=4),
            run=RunSpec(seeds=(5, 6), out_dir="/tmp/x", label="demo",
                        expert_threshold=-40.0))
        assert parse_config_text(serialize_config(cfg)) == cfg

    def test_canonical_serialization_is_stable(self):
        text = serialize_config(ExperimentConfig())
        assert serialize_config(parse_config_text(text)) == text

    def test_section_values_applied(self):
        cfg = parse_config_text(
            "[env]\nname = gridworld\nwidth = 4\nslip_prob = 0.2\n"
            "[train]\ntotal_steps = 1000\npretrain_steps = 50\n"
            "use_synthetic = false\n"
            "[run]\nseeds = 3,4,5\n")
        assert cfg.env.width == 4
        assert cfg.env.slip_prob == 0.2
        assert cfg.train.total_steps == 1000
        assert cfg.train.use_synthetic is False
        assert cfg.run.seeds == (3, 4, 5)

    def test_unknown_section_reports_line(self):
        with pytest.raises(ConfigError, match="line 2"):
            parse_config_text("[env]\n[nonsense]\n")

    def test_unknown_key_reports_line(self):
        with pytest.raises(ConfigError, match="line 3"):
            parse_config_text("[env]\nwidth = 5\nbogus = 1\n")

    def test_duplicate_key_rejected(self):
        with pytest.raises(ConfigError, match="duplicate"):
            parse_config_text("[env]\nwidth = 5\nwidth = 6\n")

    def test_bad_value_reports_line_and_key(self):
        with pytest.raises(ConfigError, match="line 2.*width"):
            parse_config_text("[env]\nwidth = tall\n")

    def test_key_outside_section_rejected(self):
        with pytest.raises(ConfigError, match="line 1"):
            parse_config_text("width = 5\n")

    def test_bad_bool_rejected(self):
        with pytest.raises(ConfigError, match="use_synthetic"):
            parse_config_text("[train]\nuse_synthetic = yes\n")

    def test_line_without_equals_rejected(self):
        with pytest.raises(ConfigError, match="line 2"):
            parse_config_text("[env]\nwidth\n")

    def test_comments_and_blanks_ignored(self):
        cfg = parse_config_text("# comment\n\n[env]\n# inner\nwidth = 6\n")
        assert cfg.env.width == 6

    def test_env_validation_is_config_error(self):
        with pytest.raises(ConfigError):
            parse_config_text("[env]\nname = mountaincar\n")
        with pytest.raises(ConfigError):
            parse_config_text("[env]\nslip_prob = 1.5\n")
        with pytest.raises(ConfigError):
            parse_config_text("[env]\ndiscount = 1.0\n")

    def test_empty_seed_list_rejected(self):
        with pytest.raises(ConfigError, match="seed"):
            parse_config_text("[run]\nseeds = \n")


class TestBuildEnv:
    def test_gridworld(self):
        env = build_env(EnvSpec(name="gridworld", width=4, height=3,
                                slip_prob=0.1, goal_reward=2.0, discount=0.9,
                                horizon=25))
        assert env.name == "gridworld4x3"
        assert env.episode_horizon == 25
        assert env.mdp.n_states == 12
        assert env.mdp.discount == 0.9

    def test_pointmass(self):
        env = build_env(EnvSpec(name="pointmass", noise_std=0.2))
        assert env.name == "pointmass"
        assert env.dynamics_noise_std == 0.2


class TestOutputRouting:
    def test_cli_flag_wins(self, tmp_path, monkeypatch):
        monkeypatch.setenv("MEAIRL_OUT", str(tmp_path / "envvar"))
        out = resolve_out_dir(str(tmp_path / "cli"), str(tmp_path / "cfg"), "lbl")
        assert out == str(tmp_path / "cli" / "lbl")
        assert os.path.isdir(out)

    def test_config_wins_over_env(self, tmp_path, monkeypatch):
        monkeypatch.setenv("MEAIRL_OUT", str(tmp_path / "envvar"))
        out = resolve_out_dir("", str(tmp_path / "cfg"), "")
        assert out == str(tmp_path / "cfg")

    def test_env_var_used_when_unconfigured(self, tmp_path, monkeypatch):
        monkeypatch.setenv("MEAIRL_OUT", str(tmp_path / "envvar"))
        out = resolve_out_dir("", "", "run1")
        assert out == str(tmp_path / "envvar" / "run1")
        assert os.path.isdir(out)


def record_from(steps, returns):
    rows = [EvalRow(s, float(r), 0.0, 0.0, 0.0, 0.0, 0.0)
            for s, r in zip(steps, returns)]
    return TrainingRecord(rows=rows)


class TestAggregate:
    def test_constant_at_expert_attains_first_step(self):
        record = record_from([1000, 2000, 3000], [5.0, 5.0, 5.0])
        summary = aggregate([record], expert_return=5.0)
        assert summary.steps_to_expert == 1000

    def test_all_below_expert_gives_none(self):
        record = record_from([1000, 2000], [1.0, 2.0])
        summary = aggregate([record], expert_return=5.0)
        assert summary.steps_to_expert is None
        assert render_steps(summary.steps_to_expert) == "X"

    def test_hand_mean_and_std(self):
        records = [record_from([10, 20], [1.0, 7.0]),
                   record_from([10, 20], [3.0, 9.0]),
                   record_from([10, 20], [5.0, 11.0])]
        summary = aggregate(records, expert_return=9.0)
        assert np.array_equal(summary.steps, [10, 20])
        assert np.array_equal(summary.return_mean, [3.0, 9.0])
        want_std = float(np.std([1.0, 3.0, 5.0]))
        assert np.allclose(summary.return_std, [want_std, want_std])
        assert summary.steps_to_expert == 20

    def test_mismatched_grids_rejected(self):
        a = record_from([10, 20], [1.0, 2.0])
        b = record_from([10, 30], [1.0, 2.0])
        with pytest.raises(ValueError, match="grid"):
            aggregate([a, b], expert_return=0.0)

    def test_accepts_csv_paths(self, tmp_path):
        record = record_from([100], [4.0])
        path = tmp_path / "r.csv"
        record.to_csv(path)
        summary = aggregate([str(path)], expert_return=4.0)
        assert summary.steps_to_expert == 100

    def test_empty_rejected(self):
        with pytest.raises(ValueError):
            aggregate([], expert_return=0.0)


class TestSummaryTable:
    def test_csv_text_and_median(self):
        rows = [AggregateRow("meairl", 0, 5.0, 6.0, 3000),
                AggregateRow("meairl", 1, 4.0, 5.0, None),
                AggregateRow("meairl", 2, 5.5, 6.5, 1000),
                AggregateRow("bc_none", 0, 1.0, 1.0, None)]
        text = summary_csv_text(rows)
        lines = text.strip().split("\n")
        assert lines[0] == SUMMARY_CSV_HEADER
        assert lines[2].endswith(",X")
        assert median_steps(rows, "meairl") == 3000.0
        assert median_steps(rows, "bc_none") == float("inf")

    def test_attainment_threshold_orientation(self):
        assert attainment_threshold(10.0) == 9.0
        assert attainment_threshold(-10.0) == -11.0


MICRO_CONFIG = """\
[env]
name = gridworld
width = 3
height = 3
slip_prob = 0.1
goal_reward = 5.0
discount = 0.9
horizon = 20

[train]
total_steps = 300
pretrain_steps = 100
eval_period = 100
eval_episodes = 2
batch_size = 32

[run]
seeds = 0,1
expert_episodes = 20
expert_seed = 7
"""


class TestCliExitCodes:
    def test_malformed_config_exits_two(self, tmp_path, capsys):
        path = tmp_path / "bad.cfg"
        path.write_text("[env]\nbogus = 1\n")
        code = main(["train", "--config", str(path), "--out", str(tmp_path / "o")])
        assert code == 2
        assert "line 2" in capsys.readouterr().err

    def test_missing_config_exits_two(self, tmp_path, capsys):
        code = main(["train", "--config", str(tmp_path / "absent.cfg"),
                     "--out", str(tmp_path / "o")])
        assert code == 2

    def test_verify_invariance_passes(self, tmp_path, capsys):
        code = main(["verify-invariance", "--cases", "10",
                     "--alignment-cases", "5", "--out", str(tmp_path)])
        assert code == 0
        out = capsys.readouterr().out
        assert "invariance" in out
        report = tmp_path / "invariance_report.txt"
        assert report.exists()
        assert "PASS" in report.read_text()

    def test_verify_bounds_passes(self, tmp_path, capsys):
        code = main(["verify-bounds", "--instances", "20",
                     "--out", str(tmp_path)])
        assert code == 0
        reward_csv = (tmp_path / "bounds_reward.csv").read_text()
        assert reward_csv.startswith(
            "instance_id,gamma,n_states,eps_T,observed_gap,bound,ratio")
        assert (tmp_path / "bounds_performance.csv").exists()


class TestCliTrain:
    def test_train_twice_is_byte_identical(self, tmp_path, capsys):
        cfg_path = tmp_path / "micro.cfg"
        cfg_path.write_text(MICRO_CONFIG)
        demos = tmp_path / "demos.txt"
        outputs = []
        for name in ("a", "b"):
            out = tmp_path / name
            code = main(["train", "--config", str(cfg_path), "--seed", "0",
                         "--demos", str(demos), "--out", str(out)])
            assert code == 0
            csv = out / "train_meairl_seed0.csv"
            assert csv.exists()
            outputs.append(csv.read_bytes())
            assert (out / "resolved.cfg").exists()
        assert outputs[0] == outputs[1]

    def test_train_writes_header_and_resolved_config(self, tmp_path, capsys):
        cfg_path = tmp_path / "micro.cfg"
        cfg_path.write_text(MICRO_CONFIG)
        out = tmp_path / "run"
        code = main(["train", "--config", str(cfg_path), "--algorithm",
                     "bc_none", "--out", str(out),
                     "--demos", str(tmp_path / "demos.txt")])
        assert code == 0
        text = (out / "train_bc_none_seed0.csv").read_text()
        assert text.split("\n")[0] == CSV_HEADER
        resolved = parse_config_text((out / "resolved.cfg").read_text())
        assert resolved.train.algorithm == "bc_none"

    def test_compare_emits_tables(self, tmp_path, capsys):
        cfg_path = tmp_path / "micro.cfg"
        cfg_path.write_text(MICRO_CONFIG)
        out = tmp_path / "cmp"
        code = main(["compare", "--config", str(cfg_path),
                     "--algorithms", "meairl,bc_none", "--out", str(out),
                     "--demos", str(tmp_path / "demos.txt")])
        assert code == 0
        summary = (out / "summary.csv").read_text().strip().split("\n")
        assert summary[0] == SUMMARY_CSV_HEADER
        assert len(summary) == 1 + 4  # 2 algorithms x 2 seeds
        for alg in ("meairl", "bc_none"):
            for seed in (0, 1):
                assert (out / f"{alg}_seed{seed}.csv").exists()
        agg = (out / "aggregate.csv").read_text().strip().split("\n")
        assert agg[0] == "algorithm,final_return_mean,final_return_std,steps_to_target"
        assert len(agg) == 3
        printed = capsys.readouterr().out
        assert "median steps to target" in printed

    def test_expert_subcommand_writes_demos(self, tmp_path, capsys):
        cfg_path = tmp_path / "micro.cfg"
        cfg_path.write_text(MICRO_CONFIG)
        out = tmp_path / "exp"
        demos = tmp_path / "d.txt"
        code = main(["expert", "--config", str(cfg_path), "--out", str(out),
                     "--demos", str(demos)])
        assert code == 0
        assert demos.exists()
        first = demos.read_text().split("\n")[0]
        assert first.startswith("#")
        assert "gridworld3x3" in first
