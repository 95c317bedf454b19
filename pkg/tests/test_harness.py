"""Harness tests: regret accounting, seeding, parallel invariance, tunings,
assumption checks, and result emission."""

import json
import math

import numpy as np
import pytest

from pwbandits import load_env
from pwbandits.environments import reward_matrix
from pwbandits.harness import (
    ExperimentConfig,
    PolicySpec,
    check_assumptions,
    default_tunings,
    emit_results,
    load_experiment_config,
    record_times,
    rep_seed,
    run_experiment,
    run_single,
    splitmix64,
    _run_generic,
)
from pwbandits.policies import Policy

from conftest import make_env


class _OracleTap(Policy):
    """Test helper: always plays the true best arm."""

    name = "oracle-tap"

    def __init__(self, env):
        self.env = env

    def choose(self, t):
        return self.env.oracle_mean(t)[0]

    def update(self, arm, reward, t):
        return None


class _AlwaysFirst(Policy):
    name = "always-first"

    def choose(self, t):
        return 0

    def update(self, arm, reward, t):
        return None


def _drive(env, policy, seed=0, stride=10):
    rng = np.random.default_rng(seed)
    rewards = reward_matrix(env, rng)
    return _run_generic(
        policy, rewards, env.mean_table(), env.opt_means(), record_times(env.horizon, stride), False
    )


class TestRunSingle:
    def test_oracle_tap_has_zero_regret(self, problems_dir):
        env = load_env(problems_dir / "pb1")
        curve = _drive(env, _OracleTap(env))
        assert curve.final_regret == 0.0
        assert np.all(curve.cum_regret == 0.0)

    def test_always_worst_arm_pays_full_gap(self):
        env = make_env(2, 500, [1], [[0.0, 1.0]])
        curve = _drive(env, _AlwaysFirst())
        assert curve.final_regret == pytest.approx(500.0)

    def test_curves_non_decreasing(self, problems_dir):
        env = load_env(problems_dir / "pb2")
        for name in ("klucb", "glr-klucb-local", "ts"):
            c = run_single(env, name, None, 3)
            assert np.all(np.diff(c.cum_regret) >= -1e-12)
            assert c.cum_regret[-1] == pytest.approx(c.final_regret)

    def test_record_times_include_horizon(self):
        assert record_times(100, 10)[-1] == 100
        assert list(record_times(95, 10)) == [10, 20, 30, 40, 50, 60, 70, 80, 90, 95]
        assert list(record_times(5, 10)) == [5]


class TestSeeding:
    def test_splitmix_is_deterministic_and_spreads(self):
        vals = {splitmix64(r) for r in range(1000)}
        assert len(vals) == 1000
        assert splitmix64(1) == splitmix64(1)

    def test_rep_seeds_distinct(self):
        seeds = {rep_seed(42, r) for r in range(1000)}
        assert len(seeds) == 1000


def _small_config(problems_dir, reps=6, parallelism=1):
    return ExperimentConfig(
        environment=str(problems_dir / "pb1"),
        roster=[
            PolicySpec("glr-klucb-local", {"stride_n": 10, "stride_s": 10}),
            PolicySpec("ts"),
        ],
        repetitions=reps,
        base_seed=2024,
        stride=50,
        parallelism=parallelism,
    )


class TestRunExperiment:
    def test_single_repetition_aggregates_equal_curve(self, problems_dir):
        cfg = _small_config(problems_dir, reps=1)
        res = run_experiment(cfg)
        for algo in res.algorithms:
            single = run_single(
                load_env(problems_dir / "pb1"), algo.name, algo.params, rep_seed(2024, 0), 50
            )
            assert np.array_equal(algo.mean_curve, single.cum_regret)
            assert algo.final_mean == pytest.approx(single.final_regret)

    def test_same_seed_bit_identical(self, problems_dir):
        a = run_experiment(_small_config(problems_dir))
        b = run_experiment(_small_config(problems_dir))
        for x, y in zip(a.algorithms, b.algorithms):
            assert np.array_equal(x.curves, y.curves)

    def test_parallelism_invariant(self, problems_dir):
        serial = run_experiment(_small_config(problems_dir, reps=8, parallelism=1))
        par = run_experiment(_small_config(problems_dir, reps=8, parallelism=8))
        for x, y in zip(serial.algorithms, par.algorithms):
            assert np.array_equal(x.curves, y.curves)
            assert abs(x.final_mean - y.final_mean) <= 1e-9

    def test_unknown_policy_rejected(self, problems_dir):
        cfg = _small_config(problems_dir)
        cfg.roster.append(PolicySpec("nope"))
        with pytest.raises(ValueError, match="unknown policy"):
            run_experiment(cfg)


class TestDefaultTunings:
    def test_global_known(self, problems_dir):
        env = load_env(problems_dir / "pb1")  # T=5000, Upsilon=4
        tun = default_tunings(env, upsilon_known=True, mode="global", alpha0=1.0)
        assert tun.alpha == pytest.approx(math.sqrt(4 * math.log(5000) / 5000))
        assert tun.delta == pytest.approx(1 / math.sqrt(4 * 5000))

    def test_local_known_includes_arm_count(self, problems_dir):
        env = load_env(problems_dir / "pb1")
        tun = default_tunings(env, upsilon_known=True, mode="local", alpha0=1.0)
        assert tun.alpha == pytest.approx(math.sqrt(3 * 4 * math.log(5000) / 5000))
        assert tun.delta == pytest.approx(1 / math.sqrt(3 * 4 * 5000))

    def test_unknown_upsilon(self, problems_dir):
        env = load_env(problems_dir / "pb1")
        for mode in ("local", "global"):
            tun = default_tunings(env, upsilon_known=False, mode=mode)
            assert tun.alpha == pytest.approx(math.sqrt(math.log(5000) / 5000))
            assert tun.delta == pytest.approx(1 / math.sqrt(5000))

    def test_alpha0_zero_disables_exploration(self, problems_dir):
        env = load_env(problems_dir / "pb1")
        assert default_tunings(env, mode="local", alpha0=0.0).alpha == 0.0

    def test_alpha_clamped_below_one(self):
        env = make_env(2, 4, [1, 3], [[0.1, 0.9], [0.9, 0.1]])
        tun = default_tunings(env, mode="local", alpha0=5.0)
        assert tun.alpha < 1.0


class TestCheckAssumptions:
    def test_constructed_pass_case(self):
        env = make_env(2, 200_000, [1, 100_001], [[0.2, 0.7], [0.2, 0.2]])
        report = check_assumptions(env, alpha=0.5, delta=0.1, family="practical")
        assert report.checkable
        assert report.global_ok and report.local_ok

    def test_problem3_violated_with_corollary_tunings(self, problems_dir):
        env = load_env(problems_dir / "pb3")
        tun = default_tunings(env, upsilon_known=True, mode="local", alpha0=1.0)
        report = check_assumptions(env, tun.alpha, tun.delta, "practical")
        assert report.checkable
        assert not report.global_ok
        assert any(not r.ok for r in report.global_records)

    def test_delay_decreases_with_alpha(self, problems_dir):
        env = load_env(problems_dir / "pb1")
        r1 = check_assumptions(env, 0.1, 0.05)
        r2 = check_assumptions(env, 0.2, 0.05)
        for a, b in zip(r1.global_records, r2.global_records):
            assert b.horizon_needed <= a.horizon_needed

    def test_alpha_zero_not_checkable(self, problems_dir):
        env = load_env(problems_dir / "pb1")
        report = check_assumptions(env, 0.0, 0.05)
        assert not report.checkable

    def test_delta_domain(self, problems_dir):
        env = load_env(problems_dir / "pb1")
        with pytest.raises(ValueError):
            check_assumptions(env, 0.1, 1.5)


class TestEmitResults:
    def test_empty_roster_header_only(self, tmp_path, problems_dir):
        cfg = _small_config(problems_dir)
        cfg.roster = []
        res = run_experiment(cfg)
        paths = emit_results(res, tmp_path, "csv")
        curves = (tmp_path / "curves.csv").read_text().splitlines()
        summary = (tmp_path / "summary.csv").read_text().splitlines()
        assert curves == ["algorithm,rep,t,cum_regret"]
        assert summary == [
            "algorithm,mean_final_regret,std_final_regret,mean_restarts,mean_wall_ms"
        ]

    def test_csv_summary_matches_recomputation_from_curves(self, tmp_path, problems_dir):
        res = run_experiment(_small_config(problems_dir, reps=5))
        emit_results(res, tmp_path, "csv")
        rows = (tmp_path / "curves.csv").read_text().splitlines()[1:]
        finals = {}
        last_t = {}
        for row in rows:
            parts = row.split(",")
            name, rep, t, reg = parts[0], int(parts[1]), int(parts[2]), float(parts[3])
            if t >= last_t.get((name, rep), -1):
                last_t[(name, rep)] = t
                finals.setdefault(name, {})[rep] = reg
        summary = (tmp_path / "summary.csv").read_text().splitlines()[1:]
        for line in summary:
            parts = line.split(",")
            vals = np.array([finals[parts[0]][r] for r in sorted(finals[parts[0]])])
            assert float(parts[1]) == pytest.approx(vals.mean(), rel=1e-9)
            assert float(parts[2]) == pytest.approx(vals.std(ddof=1), rel=1e-9)

    def test_json_roundtrip_echoes_config(self, tmp_path, problems_dir):
        res = run_experiment(_small_config(problems_dir, reps=2))
        (path,) = emit_results(res, tmp_path, "json")
        doc = json.loads(path.read_text())
        assert doc["config"] == res.config
        assert [a["name"] for a in doc["algorithms"]] == [a.name for a in res.algorithms]
        assert doc["algorithms"][0]["curves"] == res.algorithms[0].curves.tolist()


class TestExperimentConfigFile:
    def test_loads_with_relative_env_path(self, tmp_path, problems_dir):
        cfg_doc = {
            "environment": str(problems_dir / "pb1"),
            "algorithms": ["klucb", {"name": "glr-klucb-local", "params": {"stride_n": 10}}],
            "repetitions": 3,
            "base_seed": 1,
            "stride": 100,
        }
        p = tmp_path / "exp.json"
        p.write_text(json.dumps(cfg_doc))
        cfg = load_experiment_config(p)
        assert cfg.repetitions == 3
        assert cfg.roster[1].params == {"stride_n": 10}

    def test_validation_errors(self, tmp_path, problems_dir):
        p = tmp_path / "exp.json"
        p.write_text(json.dumps({"environment": str(problems_dir / "pb1"), "algorithms": ["nope"]}))
        with pytest.raises(ValueError):
            load_experiment_config(p)
