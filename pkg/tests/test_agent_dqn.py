"""Double-DQN targets, soft updates, and the training loop."""

import csv

import numpy as np
import pytest

from cogabench.actions import N_JOINT
from cogabench.affordance.core import ActionMask, AffordanceSet
from cogabench.agent.dqn import (
    TrainConfig,
    TrainReport,
    desk_train_config,
    epsilon_at,
    evaluate_greedy,
    huber,
    huber_grad,
    soft_update,
    td_targets,
    train_rl,
)
from cogabench.agent.net import NetConfig, QNetwork, load_checkpoint
from cogabench.agent.replay import SampleBatch
from cogabench.errors import ConfigurationError, ScriptExecutionError, TrainingError

MINI = NetConfig(conv_channels=(2, 3), pool_after=frozenset({1, 2}),
                 fc_sizes=(6, 5), instr_dim=4, input_scale=21)


def zeroed_net(type_bias=None, bin_bias=None):
    """All-zero net whose Q values equal its head biases for any input."""
    net = QNetwork(MINI, np.random.default_rng(0))
    for p in net.params.values():
        p[...] = 0.0
    if type_bias is not None:
        net.params["head_type_b"][...] = type_bias
    if bin_bias is not None:
        for b, v in bin_bias.items():
            net.params["head_bin_b"][b] = v
    return net


def hand_batch(rewards, dones, next_masks, actions=None):
    n = len(rewards)
    obs = np.zeros((n, 1, *MINI.input_hw), dtype=np.uint8)
    return SampleBatch(
        indices=np.arange(n),
        obs=obs,
        instr=np.zeros((n, MINI.instr_dim)),
        actions=np.array(actions if actions is not None else [0] * n, dtype=np.int64),
        rewards=np.array(rewards, dtype=np.float64),
        dones=np.array(dones, dtype=bool),
        next_obs=obs.copy(),
        next_masks=np.stack(next_masks),
        weights=np.ones(n),
    )


def allow(flats):
    m = np.zeros(N_JOINT, dtype=bool)
    m[list(flats)] = True
    return m


class TestTdTargets:
    def test_terminal_target_is_reward(self):
        online = zeroed_net(type_bias=[5.0, 0, 0, 0])
        target = zeroed_net(type_bias=[7.0, 0, 0, 0])
        batch = hand_batch([-1.0], [True], [allow([0])])
        y = td_targets(batch, online, target, gamma=0.9)
        assert y[0] == pytest.approx(-1.0, abs=1e-12)

    def test_masked_argmax_differs_from_unmasked(self):
        # online prefers (type 1, bin 5) globally, but the mask only allows
        # type 3 with bins {7, 9}; the target net prices the masked pick
        online = zeroed_net(type_bias=[0, 1.0, 0, 0],
                            bin_bias={5: 2.0, 7: 0.5, 9: 0.2})
        target = zeroed_net(type_bias=[0.1, 0.2, 0.3, 0.4],
                            bin_bias={5: 0.6, 7: 1.0})
        mask = allow([3 * 1024 + 7, 3 * 1024 + 9])
        unmasked_star = 1 * 1024 + 5
        assert not mask[unmasked_star]
        batch = hand_batch([0.25], [False], [mask])
        y = td_targets(batch, online, target, gamma=0.9)
        # a* = (3, 7): boot = 0.4 + 1.0
        assert y[0] == pytest.approx(0.25 + 0.9 * 1.4, abs=1e-6)

    def test_empty_mask_row_falls_back_to_unmasked_argmax(self):
        online = zeroed_net(type_bias=[0, 1.0, 0, 0], bin_bias={5: 2.0})
        target = zeroed_net(type_bias=[0.1, 0.2, 0.3, 0.4], bin_bias={5: 0.6})
        batch = hand_batch([0.0], [False], [np.zeros(N_JOINT, dtype=bool)])
        y = td_targets(batch, online, target, gamma=0.5)
        # fallback a* = (1, 5): boot = 0.2 + 0.6
        assert y[0] == pytest.approx(0.5 * 0.8, abs=1e-6)

    def test_two_row_batch_mixes_terminal_and_masked(self):
        online = zeroed_net(type_bias=[0, 1.0, 0, 0],
                            bin_bias={5: 2.0, 7: 0.5})
        target = zeroed_net(type_bias=[0.1, 0.2, 0.3, 0.4],
                            bin_bias={7: 1.0})
        batch = hand_batch(
            rewards=[-1.0, 0.25],
            dones=[True, False],
            next_masks=[allow([0]), allow([3 * 1024 + 7])],
        )
        y = td_targets(batch, online, target, gamma=0.9)
        np.testing.assert_allclose(y, [-1.0, 0.25 + 0.9 * 1.4], atol=1e-6)


class TestHuber:
    def test_values_and_grad(self):
        d = np.array([-3.0, -0.5, 0.0, 0.5, 3.0])
        np.testing.assert_allclose(huber(d), [2.5, 0.125, 0.0, 0.125, 2.5])
        np.testing.assert_allclose(huber_grad(d), [-1.0, -0.5, 0.0, 0.5, 1.0])

    def test_delta_scales_transition(self):
        assert huber(np.array([4.0]), delta=2.0)[0] == pytest.approx(2.0 * (4 - 1.0))
        assert huber_grad(np.array([4.0]), delta=2.0)[0] == 2.0


class TestSoftUpdate:
    def params_of(self, net):
        return {k: v.copy() for k, v in net.params.items()}

    def test_tau_endpoints_and_midpoint(self):
        rng = np.random.default_rng(3)
        online = QNetwork(MINI, rng)
        for tau, check in [
            (0.0, lambda t0, o, t1: np.testing.assert_array_equal(t1, t0)),
            (1.0, lambda t0, o, t1: np.testing.assert_array_equal(t1, o)),
            (0.5, lambda t0, o, t1: np.testing.assert_allclose(t1, (t0 + o) / 2, atol=1e-7)),
        ]:
            target = QNetwork(MINI, np.random.default_rng(4))
            before = self.params_of(target)
            soft_update(target, online, tau)
            for k in online.params:
                check(before[k], online.params[k], target.params[k])


class TestEpsilonSchedule:
    def test_endpoints(self):
        cfg = TrainConfig(eps_start=0.6, eps_end=0.01, eps_decay=300.0)
        assert epsilon_at(cfg, 0) == pytest.approx(0.6)
        assert epsilon_at(cfg, 10_000_000) == pytest.approx(0.01, abs=1e-9)

    def test_monotone_decreasing(self):
        cfg = TrainConfig()
        eps = [epsilon_at(cfg, t) for t in range(0, 5000, 250)]
        assert all(a > b for a, b in zip(eps, eps[1:]))


class TestTrainConfig:
    def test_validation(self):
        with pytest.raises(ConfigurationError):
            TrainConfig(gamma=1.0)
        with pytest.raises(ConfigurationError):
            TrainConfig(tau=1.5)
        with pytest.raises(ConfigurationError):
            TrainConfig(empty_mask_policy="explode")
        with pytest.raises(ConfigurationError):
            TrainConfig(batch=0)

    def test_desk_overrides(self):
        cfg = desk_train_config(gamma=0.5)
        assert cfg.gamma == 0.5
        assert cfg.batch == 32


class TestReport:
    def test_success_at_and_csv_roundtrip(self, tmp_path):
        rep = TrainReport(task="click-test", method="coga", seed=0)
        rep.rows = [
            {"step_budget": 10, "eval_success": 0.5, "epsilon": 0.25, "loss_mean": 0.125},
            {"step_budget": 20, "eval_success": 0.75, "epsilon": 0.1, "loss_mean": 0.0625},
        ]
        assert rep.success_at(20) == 0.75
        with pytest.raises(KeyError):
            rep.success_at(15)
        path = rep.to_csv(tmp_path / "r.csv")
        with open(path, newline="") as f:
            rows = list(csv.reader(f))
        assert rows[0] == ["step_budget", "eval_success", "epsilon", "loss_mean"]
        assert rows[1] == ["10", "0.500000", "0.250000", "0.125000"]
        assert rows[2] == ["20", "0.750000", "0.100000", "0.062500"]


def tiny_cfg(**kw):
    base = dict(lr=1e-3, batch=8, buffer=64, steps_per_update=8,
                eps_decay=20.0, total_steps=24, eval_budgets=(24,),
                eval_episodes=4, tau=0.01)
    base.update(kw)
    return TrainConfig(**base)


class EmptyProvider:
    kind = "empty"
    identity = "empty"

    def query(self, obs):
        return AffordanceSet()

    __call__ = query


class BrokenProvider:
    kind = "broken"
    identity = "broken"

    def query(self, obs):
        raise ScriptExecutionError("synthetic failure")

    __call__ = query


class TestTrainLoop:
    def test_same_seed_reproduces_report(self):
        a = train_rl("click-test", None, MINI, tiny_cfg(), seed=3)
        b = train_rl("click-test", None, MINI, tiny_cfg(), seed=3)
        assert a.rows == b.rows
        assert a.counters == b.counters
        assert a.final_step == b.final_step == 24

    def test_method_defaults(self):
        rep = train_rl("click-test", None, MINI, tiny_cfg(), seed=0)
        assert rep.method == "rl"
        rep = train_rl("click-test", EmptyProvider(), MINI,
                       tiny_cfg(empty_mask_policy="fallback"), seed=0)
        assert rep.method == "coga"

    def test_unmasked_run_counts_episodes(self):
        rep = train_rl("click-test", None, MINI, tiny_cfg(), seed=1)
        assert rep.counters.get("episodes", 0) >= 1
        assert rep.rows[0]["step_budget"] == 24
        # all-true masks never trip the safety assertion
        assert rep.counters.get("mask_violations", 0) == 0

    def test_fail_episode_burns_every_step_on_empty_masks(self):
        cfg = tiny_cfg(total_steps=12, eval_budgets=(12,), eval_episodes=3,
                       empty_mask_policy="fail_episode")
        rep = train_rl("click-test", EmptyProvider(), MINI, cfg, seed=0)
        # 12 training aborts plus 3 aborted eval episodes
        assert rep.counters["empty_mask_aborts"] == 15
        assert rep.counters.get("successes", 0) == 0
        assert rep.rows[0]["eval_success"] == 0.0

    def test_fallback_policy_keeps_training_on_empty_masks(self):
        cfg = tiny_cfg(total_steps=12, eval_budgets=(12,), eval_episodes=2)
        rep = train_rl("click-test", EmptyProvider(), MINI, cfg, seed=0)
        assert rep.counters["empty_mask_fallback"] > 0
        assert rep.counters.get("empty_mask_aborts", 0) == 0

    def test_provider_failure_fail_run_raises(self):
        with pytest.raises(TrainingError, match="provider failed"):
            train_rl("click-test", BrokenProvider(), MINI, tiny_cfg(), seed=0)

    def test_provider_failure_full_mask_continues(self):
        cfg = tiny_cfg(total_steps=12, eval_budgets=(12,), eval_episodes=2,
                       provider_failure="full_mask")
        rep = train_rl("click-test", BrokenProvider(), MINI, cfg, seed=0)
        assert rep.counters["provider_failures"] > 0
        assert rep.final_step == 12

    def test_out_dir_writes_loadable_checkpoint_and_csv(self, tmp_path):
        cfg = tiny_cfg()
        rep = train_rl("click-test", None, MINI, cfg, seed=2, out_dir=tmp_path)
        assert (tmp_path / "train_report.csv").exists()
        net, step = load_checkpoint(tmp_path / "model.ckpt", MINI)
        assert step == 24
        assert rep.checkpoint == str(tmp_path / "model.ckpt")


class TestEvaluateGreedy:
    def test_deterministic_and_counts_mask_checks(self):
        net = QNetwork(MINI, np.random.default_rng(7))
        cfg = tiny_cfg(eval_episodes=5)
        counters = {}
        a = evaluate_greedy(net, "click-test", None, cfg, counters)
        b = evaluate_greedy(net, "click-test", None, cfg)
        assert a == b
        assert counters.get("mask_violations", 0) == 0
