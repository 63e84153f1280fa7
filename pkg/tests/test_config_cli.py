"""Configuration round trips, seed fan-out, CLI wiring, output determinism."""

import json
import os

import numpy as np
import pytest

import isinglab as il
from isinglab import cli
from isinglab.config import ExperimentConfig, GeneratorSpec, StrategySpec
from isinglab.errors import ConfigError
from isinglab.experiments import ExperimentOutcome, read_csv, run_experiment
from isinglab.presets import PRESET_NAMES, preset_config
from isinglab.seeds import child_seed, spawn_rng


def tiny_sweep_config(**overrides):
    base = dict(
        kind="spectral-sweep",
        strategies=[StrategySpec(kind="uniform"), StrategySpec(kind="local_flip")],
        temperatures=[1.0],
        generator=GeneratorSpec(n_values=[3, 4], count=2, seed=5),
        master_seed=7,
    )
    base.update(overrides)
    return ExperimentConfig(**base)


class TestSeeds:
    def test_deterministic(self):
        assert child_seed(5, "a", 1) == child_seed(5, "a", 1)

    def test_distinct_paths(self):
        seeds = {child_seed(5, "a", i) for i in range(100)}
        seeds |= {child_seed(5, "b", i) for i in range(100)}
        assert len(seeds) == 200

    def test_path_typing_matters(self):
        assert child_seed(5, "1") != child_seed(5, 1)

    def test_streams_independent(self):
        a = spawn_rng(5, "x").random(4)
        b = spawn_rng(5, "y").random(4)
        assert not np.allclose(a, b)


class TestConfig:
    def test_json_round_trip(self, tmp_path):
        config = tiny_sweep_config()
        path = tmp_path / "config.json"
        path.write_text(config.to_json())
        loaded = ExperimentConfig.from_json_file(path)
        assert loaded.to_dict() == config.to_dict()
        assert loaded.config_hash() == config.config_hash()

    def test_hash_changes_with_content(self):
        a = tiny_sweep_config()
        b = tiny_sweep_config(master_seed=8)
        assert a.config_hash() != b.config_hash()

    def test_validation_errors(self):
        with pytest.raises(ConfigError):
            tiny_sweep_config(kind="annealing-run").validate()
        with pytest.raises(ConfigError):
            tiny_sweep_config(temperatures=[]).validate()
        with pytest.raises(ConfigError):
            tiny_sweep_config(temperatures=[-1.0]).validate()
        with pytest.raises(ConfigError):
            ExperimentConfig(
                kind="chain-ensemble",
                strategies=[StrategySpec(kind="uniform")],
                temperatures=[1.0],
                generator=GeneratorSpec(n_values=[4], count=1, seed=0),
                steps=0,
            ).validate()
        with pytest.raises(ConfigError):
            tiny_sweep_config(generator=None).validate()  # no instance source

    def test_strategy_spec_validation(self):
        with pytest.raises(ConfigError):
            StrategySpec.from_dict({"kind": "cg_multiple_groups"})
        with pytest.raises(ConfigError):
            StrategySpec.from_dict({"kind": "uniform", "shots": 3})
        spec = StrategySpec.from_dict({"kind": "cg_multiple_groups", "q": "sqrt_n"})
        assert spec.q_values(8) == [2, 3]
        assert spec.q_values(9) == [3]
        assert spec.label(3) == "cg_multiple_groups_q3"

    def test_generator_counts(self):
        gen = GeneratorSpec(n_values=[4, 9], count=3, count_overrides={9: 1}, seed=2)
        instances = gen.instances()
        assert len(instances) == 4
        assert len({i.instance_id for i in instances}) == 4
        again = gen.instances()
        assert all(
            np.array_equal(a.couplings, b.couplings) for a, b in zip(instances, again)
        )


class TestPresets:
    def test_all_presets_build(self):
        for name in PRESET_NAMES:
            for scale in ("desk", "paper"):
                config = preset_config(name, scale=scale)
                config.validate()

    def test_alias_equivalence(self):
        assert preset_config("gap-vs-n").to_dict() == preset_config("fig3").to_dict()

    def test_unknown_preset(self):
        with pytest.raises(ConfigError):
            preset_config("fig9")

    def test_seed_override(self):
        assert preset_config("fig3", seed=123).master_seed == 123


class TestGenerateCommand:
    def test_deterministic_files(self, tmp_path):
        a_dir = tmp_path / "a"
        b_dir = tmp_path / "b"
        assert cli.main([
            "generate", "--n", "4", "--count", "3", "--seed", "9", "--out", str(a_dir),
        ]) == 0
        assert cli.main([
            "generate", "--n", "4", "--count", "3", "--seed", "9", "--out", str(b_dir),
        ]) == 0
        names = sorted(os.listdir(a_dir))
        assert len(names) == 3
        for name in names:
            assert (a_dir / name).read_bytes() == (b_dir / name).read_bytes()

    def test_round_trip_instance(self, tmp_path):
        cli.main(["generate", "--n", "5", "--count", "1", "--seed", "4", "--out", str(tmp_path)])
        files = [f for f in os.listdir(tmp_path) if f.endswith(".ising")]
        inst = il.load_instance(tmp_path / files[0])
        assert inst.n == 5
        assert np.array_equal(inst.couplings, inst.couplings.T)


class TestSweepCli:
    def test_end_to_end_and_rerun_identical(self, tmp_path):
        config = tiny_sweep_config()
        cfg_path = tmp_path / "config.json"
        cfg_path.write_text(config.to_json())
        out1 = tmp_path / "run1"
        out2 = tmp_path / "run2"
        assert cli.main(["spectral-sweep", "--config", str(cfg_path), "--out", str(out1)]) == 0
        assert cli.main(["spectral-sweep", "--config", str(cfg_path), "--out", str(out2)]) == 0
        for name in ("gaps.csv", "gap_summary.csv"):
            assert (out1 / name).read_bytes() == (out2 / name).read_bytes()

    def test_worker_count_does_not_change_results(self, tmp_path):
        config = tiny_sweep_config()
        out1 = tmp_path / "w1"
        out2 = tmp_path / "w2"
        run_experiment(config, out1)
        config.workers = 2
        run_experiment(config, out2)
        assert (out1 / "gaps.csv").read_text() == (out2 / "gaps.csv").read_text()

    def test_kind_mismatch_is_config_error(self, tmp_path):
        cfg_path = tmp_path / "config.json"
        cfg_path.write_text(tiny_sweep_config().to_json())
        assert cli.main(["chain-ensemble", "--config", str(cfg_path), "--out", str(tmp_path)]) == 2

    def test_invalid_config_exit_code(self, tmp_path):
        cfg_path = tmp_path / "broken.json"
        cfg_path.write_text("{not json")
        assert cli.main(["spectral-sweep", "--config", str(cfg_path), "--out", str(tmp_path)]) == 2

    def test_partial_failure_exit_code(self, tmp_path):
        # n = 11 exceeds the spectral cap: those cells fail, the rest succeed
        config = tiny_sweep_config(
            generator=GeneratorSpec(n_values=[4, 11], count=1, seed=3)
        )
        cfg_path = tmp_path / "config.json"
        cfg_path.write_text(config.to_json())
        out = tmp_path / "out"
        assert cli.main(["spectral-sweep", "--config", str(cfg_path), "--out", str(out)]) == 4
        _, _, error_rows = read_csv(out / "errors.csv")
        assert len(error_rows) == 2
        _, _, gap_rows = read_csv(out / "gaps.csv")
        assert len(gap_rows) == 2  # the n = 4 cells survived

    def test_meta_line_embeds_hash(self, tmp_path):
        config = tiny_sweep_config()
        run_experiment(config, tmp_path)
        meta, _, _ = read_csv(tmp_path / "gaps.csv")
        assert f"config={config.config_hash()}" in meta
        assert f"master_seed={config.master_seed}" in meta
        assert "isinglab=" in meta

    def test_resource_only_failure_exit_code(self, tmp_path):
        # every cell hits the spectral cap: exit 3 rather than partial failure
        config = tiny_sweep_config(generator=GeneratorSpec(n_values=[11], count=1, seed=3))
        cfg_path = tmp_path / "config.json"
        cfg_path.write_text(config.to_json())
        out = tmp_path / "out"
        assert cli.main(["spectral-sweep", "--config", str(cfg_path), "--out", str(out)]) == 3

    def test_single_temperature_sweep_matches_spectral(self, tmp_path):
        # a one-point temperature grid reduces to the spectral sweep's rows
        spectral_cfg = tiny_sweep_config()
        temp_cfg = tiny_sweep_config(kind="temperature-sweep")
        out_a = tmp_path / "a"
        out_b = tmp_path / "b"
        run_experiment(spectral_cfg, out_a)
        run_experiment(temp_cfg, out_b)
        _, header_a, rows_a = read_csv(out_a / "gaps.csv")
        _, header_b, rows_b = read_csv(out_b / "gaps.csv")
        assert header_a == header_b
        assert rows_a == rows_b


class TestChainEnsembleCli:
    def test_small_ensemble_outputs(self, tmp_path):
        config = ExperimentConfig(
            kind="chain-ensemble",
            strategies=[
                StrategySpec(kind="local_flip"),
                StrategySpec(kind="cg_multiple_groups", q=2, steps=50),
            ],
            temperatures=[1.0],
            generator=GeneratorSpec(n_values=[4], count=1, seed=6),
            steps=200,
            chains=2,
            master_seed=11,
            write_traces=True,
        )
        outcome = run_experiment(config, tmp_path)
        assert outcome.errors == []
        _, header, rows = read_csv(tmp_path / "discovery.csv")
        assert header == ["strategy", "chain", "found_at", "steps", "acceptance_rate"]
        assert len(rows) == 4
        _, _, ens = read_csv(tmp_path / "ensemble.csv")
        assert {r[0] for r in ens} == {"local_flip", "cg_multiple_groups_q2"}
        _, _, levels = read_csv(tmp_path / "levels.csv")
        assert len(levels) == 10
        trace_files = os.listdir(tmp_path / "traces")
        assert len(trace_files) == 4

    def test_multiple_instances_rejected(self, tmp_path):
        config = ExperimentConfig(
            kind="chain-ensemble",
            strategies=[StrategySpec(kind="local_flip")],
            temperatures=[1.0],
            generator=GeneratorSpec(n_values=[4], count=2, seed=6),
            steps=10,
        )
        with pytest.raises(ConfigError):
            run_experiment(config, tmp_path)

    def test_16_spin_energy_approaches_exact_from_above(self, tmp_path):
        # ensemble mean cumulative energy of 4-groups-of-4 chains descends
        # toward the enumerated Boltzmann mean without undershooting it
        config = ExperimentConfig(
            kind="chain-ensemble",
            strategies=[StrategySpec(kind="cg_multiple_groups", q=4, n_g=4)],
            temperatures=[1.0],
            generator=GeneratorSpec(n_values=[16], count=1, seed=16),
            steps=2_000,
            chains=10,
            master_seed=160,
            output_stride=10,
        )
        outcome = run_experiment(config, tmp_path)
        assert outcome.errors == []
        _, _, oracle_rows = read_csv(tmp_path / "oracle.csv")
        exact_energy = float(oracle_rows[0][2])
        _, header, rows = read_csv(tmp_path / "ensemble.csv")
        idx = {name: i for i, name in enumerate(header)}
        steps = np.array([int(r[idx["step"]]) for r in rows])
        means = np.array([float(r[idx["mean_cumulative_E"]]) for r in rows])
        order = np.argsort(steps)
        means = means[order]
        assert means[-1] > exact_energy  # approaches from above
        assert means[-1] - exact_energy < 0.2 * (means[0] - exact_energy)


class TestProposalStatsCli:
    def test_outputs(self, tmp_path):
        config = ExperimentConfig(
            kind="proposal-stats",
            strategies=[StrategySpec(kind="local_flip"), StrategySpec(kind="uniform")],
            temperatures=[1.0],
            generator=GeneratorSpec(n_values=[5], count=1, seed=8),
            steps=2_000,
            master_seed=13,
        )
        assert run_experiment(config, tmp_path).errors == []
        _, header, rows = read_csv(tmp_path / "proposal_stats.csv")
        assert header == ["strategy", "metric", "value", "cumulative_probability"]
        local_hamming = [r for r in rows if r[0] == "local_flip" and r[1] == "hamming"]
        assert len(local_hamming) == 1
        assert float(local_hamming[0][2]) == 1.0
        assert float(local_hamming[0][3]) == 1.0


class TestFitCli:
    def test_fit_from_summary(self, tmp_path):
        config = ExperimentConfig(
            kind="spectral-sweep",
            strategies=[StrategySpec(kind="uniform")],
            temperatures=[1.0],
            generator=GeneratorSpec(n_values=[3, 4, 5], count=2, seed=9),
            master_seed=17,
        )
        run_experiment(config, tmp_path)
        out = tmp_path / "refit.csv"
        assert cli.main([
            "fit", "--gap-summary", str(tmp_path / "gap_summary.csv"), "--out", str(out),
        ]) == 0
        _, header, rows = read_csv(out)
        assert header == ["strategy", "T", "a", "k", "k_err", "k_qef"]
        assert rows and rows[0][0] == "uniform"
        original = read_csv(tmp_path / "fits.csv")[2]
        assert rows == original


class TestReproduceCli:
    def test_writes_config_and_dispatches(self, tmp_path, monkeypatch):
        calls = {}

        def fake_run(config, out_dir):
            calls["kind"] = config.kind
            calls["out"] = out_dir
            return ExperimentOutcome(completed=1, errors=[])

        monkeypatch.setattr(cli, "run_experiment", fake_run)
        assert cli.main([
            "reproduce", "--preset", "fig3", "--scale", "desk", "--out", str(tmp_path),
        ]) == 0
        assert calls["kind"] == "spectral-sweep"
        saved = json.loads((tmp_path / "config.json").read_text())
        assert saved["kind"] == "spectral-sweep"
        assert ExperimentConfig.from_dict(saved).config_hash() == \
            preset_config("fig3").config_hash()

    def test_emulator_mode_override(self, tmp_path):
        config = tiny_sweep_config(
            strategies=[StrategySpec(kind="qemcmc_full", samples_per_row=3)],
            generator=GeneratorSpec(n_values=[3], count=1, seed=4),
        )
        cfg_path = tmp_path / "config.json"
        cfg_path.write_text(config.to_json())
        out = tmp_path / "out"
        assert cli.main([
            "spectral-sweep", "--config", str(cfg_path), "--out", str(out),
            "--emulator-mode", "trotter", "--trotter-slices", "8",
        ]) == 0
        meta, _, rows = read_csv(out / "gaps.csv")
        assert len(rows) == 1
