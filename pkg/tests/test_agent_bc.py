"""Behavior cloning: demo filtering, training, memorization."""

import numpy as np
import pytest

from cogabench.agent.bc import BCConfig, filter_demos, train_bc
from cogabench.agent.net import NetConfig, load_checkpoint
from cogabench.env import make
from cogabench.errors import ConfigurationError, DataError

MINI = NetConfig(conv_channels=(2, 3), pool_after=frozenset({1, 2}),
                 fc_sizes=(6, 5), instr_dim=4, input_scale=21)


def expert_trajectory(env, seed):
    obs = env.reset(seed=seed)
    traj = []
    while True:
        action = env.scripted_expert()
        res = env.step(action)
        traj.append({
            "pixels": obs.pixels,
            "instruction": obs.instruction,
            "action": action,
            "reward": res.reward,
            "done": res.done,
        })
        if res.done:
            return traj
        obs = res.observation


def fake_traj(total_reward):
    return [{"pixels": None, "instruction": "", "action": None,
             "reward": total_reward, "done": True}]


class TestFilterDemos:
    def test_threshold_keeps_good_trajectories(self):
        demos = [fake_traj(r) for r in
                 [0.9, 0.5, 1.0, 0.79, 0.8, 0.85, -1.0, 0.9, 0.95, 0.81]]
        kept = filter_demos(demos, threshold=0.8)
        assert len(kept) == 7

    def test_sums_rewards_within_trajectory(self):
        traj = [{"reward": 0.5, "done": False}, {"reward": 0.4, "done": True}]
        assert filter_demos([traj], threshold=0.8) == [traj]
        assert filter_demos([traj], threshold=0.95) == []


class TestBCConfig:
    def test_validation(self):
        with pytest.raises(ConfigurationError):
            BCConfig(epochs=0)
        with pytest.raises(ConfigurationError):
            BCConfig(lr=-1.0)


class TestTrainBC:
    def test_all_filtered_raises_data_error(self):
        demos = [fake_traj(0.1) for _ in range(10)]
        with pytest.raises(DataError, match="10"):
            train_bc(demos, "click-test", MINI, BCConfig(epochs=1), seed=0)

    def test_memorizes_repeated_demo(self, tmp_path):
        env = make("click-test")
        traj = expert_trajectory(env, seed=424242)
        assert sum(t["reward"] for t in traj) >= 0.8
        demos = [traj] * 100
        # single epoch so best-epoch restore cannot pick an earlier net
        cfg = BCConfig(lr=3e-2, epochs=1, batch=4, eval_episodes=2)
        rep = train_bc(demos, "click-test", MINI, cfg, seed=0, out_dir=tmp_path)
        assert rep.counters["demos_total"] == 100
        assert rep.counters["demos_kept"] == 100
        assert len(rep.rows) == 1
        assert rep.method == "bc"

        from cogabench.agent.encoder import embed_instruction
        from cogabench.agent.net import encode_obs

        net, _ = load_checkpoint(tmp_path / "model.ckpt", MINI)
        rec = traj[0]
        out = net.q_single(encode_obs(MINI, rec["pixels"]),
                           embed_instruction(rec["instruction"], MINI.instr_dim))
        assert int(np.argmax(out.q_type[0])) == int(rec["action"].action_type)
        assert int(np.argmax(out.q_bin[0])) == rec["action"].bin

    def test_best_epoch_is_kept(self, tmp_path):
        env = make("click-test")
        demos = [expert_trajectory(env, seed=7000 + i) for i in range(5)]
        cfg = BCConfig(lr=1e-3, epochs=3, batch=8, eval_episodes=3)
        rep = train_bc(demos, "click-test", MINI, cfg, seed=1)
        best = max(r["eval_success"] for r in rep.rows)
        assert rep.counters["best_success"] == best

    def test_mixed_demos_are_filtered_before_training(self):
        env = make("click-test")
        good = [expert_trajectory(env, seed=8000 + i) for i in range(3)]
        bad = [fake_traj(0.0) for _ in range(4)]
        cfg = BCConfig(lr=1e-3, epochs=1, batch=8, eval_episodes=2)
        rep = train_bc(good + bad, "click-test", MINI, cfg, seed=2)
        assert rep.counters["demos_total"] == 7
        assert rep.counters["demos_kept"] == 3
