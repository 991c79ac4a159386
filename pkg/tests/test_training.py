import copy

import numpy as np
import pytest

from risnoma.env import BS_AGENT, surface_agent_id
from risnoma.training import (
    EPISODE_COLUMNS,
    STEP_COLUMNS,
    HybridSurfaceController,
    PpoController,
    TrainConfig,
    _rng_streams,
    build_controllers,
    build_env,
    evaluate,
    evaluate_controllers,
    load_run,
    train,
)
from tests.conftest import tiny_scenario


def small_cfg(**kw) -> TrainConfig:
    base = dict(
        episodes=2,
        t_env=10,
        hidden=(12,),
        buffer_capacity=500,
        batch_size=8,
        warmup_steps=8,
        eps_decay_steps=50,
        ppo_epochs=2,
        ppo_minibatch=5,
        seed=7,
    )
    base.update(kw)
    return TrainConfig(**base)


class TestConfigValidation:
    def test_rate_out_of_range(self):
        with pytest.raises(ValueError):
            small_cfg(lr_actor=1.5).validate()

    def test_bad_counts(self):
        with pytest.raises(ValueError):
            small_cfg(episodes=0).validate()

    def test_unknown_agent_mode(self):
        with pytest.raises(ValueError):
            small_cfg(agent_mode="sarsa").validate()

    def test_unknown_rate_model(self):
        with pytest.raises(ValueError):
            small_cfg(rate_model="tdma").validate()

    def test_sections_roundtrip(self):
        cfg = small_cfg()
        rebuilt = TrainConfig.from_sections(cfg.to_sections())
        assert rebuilt == cfg


class TestTrainLoop:
    def test_smoke_record_counts(self, scenario):
        res = train(scenario, small_cfg())
        assert res.run_log.n_steps == 20
        assert res.run_log.n_episodes == 2

    def test_same_seed_bitwise_identical_logs(self, scenario):
        a = train(scenario, small_cfg())
        b = train(scenario, small_cfg())
        assert a.run_log.steps_csv() == b.run_log.steps_csv()
        assert a.run_log.episodes_csv() == b.run_log.episodes_csv()

    def test_different_seed_differs(self, scenario):
        a = train(scenario, small_cfg())
        b = train(scenario, small_cfg(seed=8))
        assert a.run_log.steps_csv() != b.run_log.steps_csv()

    def test_log_rows_complete_and_finite(self, scenario):
        res = train(scenario, small_cfg())
        steps = res.run_log.steps[: res.run_log.n_steps]
        assert steps.shape[1] == len(STEP_COLUMNS)
        assert np.all(np.isfinite(steps))
        episodes = res.run_log.episodes[: res.run_log.n_episodes]
        assert episodes.shape[1] == len(EPISODE_COLUMNS)
        assert np.all(np.isfinite(episodes))

    def test_scenario_constants_not_mutated(self, scenario):
        snapshot = copy.deepcopy(scenario)
        train(scenario, small_cfg())
        assert np.array_equal(snapshot.user_centers, scenario.user_centers)
        assert np.array_equal(snapshot.w_min, scenario.w_min)
        assert snapshot.h0 == scenario.h0
        assert snapshot.n_surfaces == scenario.n_surfaces

    def test_random_mode_reproduced_by_env_alone(self, scenario):
        """The random baseline is exactly an env rollout with uniform actions."""
        cfg = small_cfg(agent_mode="random")
        res = train(scenario, cfg)

        env_rng, _, act_rngs, _ = _rng_streams(cfg, scenario.n_surfaces + 1)
        env = build_env(scenario, cfg, env_rng)
        rewards = []
        for _ in range(cfg.episodes):
            env.reset()
            for _ in range(cfg.t_env):
                _, r, _, _ = env.step_physical(env.uniform_random_actions(act_rngs[0]))
                rewards.append(r)
        assert np.allclose(res.run_log.column("reward"), rewards, atol=0)

    def test_controller_types_per_mode(self, scenario):
        cfg = small_cfg()
        env = build_env(scenario, cfg, np.random.default_rng(0))
        ctrl = build_controllers(env, cfg, np.random.default_rng(1))
        assert isinstance(ctrl[surface_agent_id(0)], HybridSurfaceController)
        assert isinstance(ctrl[BS_AGENT], PpoController)

        cfg2 = small_cfg(force_relay_modes=True)
        ctrl2 = build_controllers(build_env(scenario, cfg2, np.random.default_rng(0)),
                                  cfg2, np.random.default_rng(1))
        assert isinstance(ctrl2[surface_agent_id(0)], PpoController)

        cfg3 = small_cfg(agent_mode="random")
        assert build_controllers(build_env(scenario, cfg3, np.random.default_rng(0)),
                                 cfg3, np.random.default_rng(1)) == {}

    def test_epsilon_column_follows_schedule(self, scenario):
        cfg = small_cfg(eps_decay_steps=10)
        res = train(scenario, cfg)
        eps = res.run_log.column("epsilon")
        assert eps[0] == pytest.approx(1.0)
        assert eps[10] == pytest.approx(0.0)

    def test_fraction_mean_helpers(self, scenario):
        res = train(scenario, small_cfg())
        ee = res.run_log.column("ee")
        assert res.run_log.fraction_mean("ee", first=0.1) == pytest.approx(ee[:2].mean())
        assert res.run_log.fraction_mean("ee", last=0.1) == pytest.approx(ee[-2:].mean())


class TestCheckpointing:
    def test_run_layout(self, scenario, tmp_path):
        cfg = small_cfg()
        res = train(scenario, cfg, out_dir=tmp_path, run_id="run_a")
        base = tmp_path / "run_a"
        assert (base / "steps.csv").exists()
        assert (base / "episodes.csv").exists()
        assert (base / "config.cfg").exists()
        assert (base / f"agent_{BS_AGENT}" / "step_20" / "arrays.npz").exists()
        assert (base / f"agent_{surface_agent_id(0)}" / "step_20" / "meta.json").exists()

    def test_roundtrip_evaluation_identical(self, scenario, tmp_path):
        cfg = small_cfg()
        res = train(scenario, cfg, out_dir=tmp_path, run_id="run_b")
        in_memory = evaluate_controllers(res.env, cfg, res.controllers,
                                         n_episodes=2, seed=3)
        reloaded = evaluate(tmp_path / "run_b", n_episodes=2, seed=3)
        assert reloaded == in_memory

    def test_loaded_parameters_bit_exact(self, scenario, tmp_path):
        cfg = small_cfg()
        res = train(scenario, cfg, out_dir=tmp_path, run_id="run_c")
        _, _, _, controllers = load_run(tmp_path / "run_c")
        src = res.controllers[BS_AGENT].ppo
        dst = controllers[BS_AGENT].ppo
        for a, b in zip(src.policy.parameters, dst.policy.parameters):
            assert np.array_equal(a, b)
        for a, b in zip(src.value_net.parameters, dst.value_net.parameters):
            assert np.array_equal(a, b)
        assert src.actor_opt.t == dst.actor_opt.t
        assert all(np.array_equal(a, b) for a, b in zip(src.actor_opt.m, dst.actor_opt.m))


class TestEvaluate:
    def test_single_episode_zero_std(self, scenario, tmp_path):
        cfg = small_cfg()
        train(scenario, cfg, out_dir=tmp_path, run_id="run_d")
        mean, std, per_ep = evaluate(tmp_path / "run_d", n_episodes=1, seed=0)
        assert std == 0.0
        assert per_ep == [mean]

    def test_fresh_agent_matches_neutral_policy_distribution(self, scenario):
        cfg = small_cfg()
        env = build_env(scenario, cfg, np.random.default_rng(0))
        controllers = build_controllers(env, cfg, np.random.default_rng(1))
        mean1, _, _ = evaluate_controllers(env, cfg, controllers, n_episodes=2, seed=5)
        env2 = build_env(scenario, cfg, np.random.default_rng(0))
        controllers2 = build_controllers(env2, cfg, np.random.default_rng(1))
        mean2, _, _ = evaluate_controllers(env2, cfg, controllers2, n_episodes=2, seed=5)
        assert mean1 == mean2
