"""Behavior cloning baseline.

Trains the same Q network as classification: the two heads become
logits over action type and grid bin, fit with cross-entropy against
expert actions.  Trajectories whose episode reward falls below the
filter threshold are dropped before training, so the cloner only sees
demonstrations that actually solved the task reasonably fast.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np

from ..errors import ConfigurationError, DataError
from .dqn import TrainConfig, TrainReport, evaluate_greedy
from .encoder import embed_instruction
from .net import AdamW, NetConfig, QNetwork, clip_global_norm, encode_obs, obs_to_float, save_checkpoint


@dataclass(frozen=True)
class BCConfig:
    lr: float = 1e-4
    epochs: int = 30
    batch: int = 32
    weight_decay: float = 1e-5
    grad_clip: float = 1.0
    filter_threshold: float = 0.8
    eval_episodes: int = 100

    def __post_init__(self):
        for name in ("lr", "epochs", "batch", "eval_episodes"):
            if getattr(self, name) <= 0:
                raise ConfigurationError(f"{name} must be positive")


def filter_demos(demos: list[list[dict]], threshold: float = 0.8) -> list[list[dict]]:
    """Keep trajectories whose summed reward meets the threshold."""
    return [traj for traj in demos
            if sum(tr["reward"] for tr in traj) >= threshold]


def _softmax(z: np.ndarray) -> np.ndarray:
    z = z - z.max(axis=1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=1, keepdims=True)


def train_bc(demos: list[list[dict]], task_id: str, net_cfg: NetConfig,
             cfg: BCConfig, seed: int, out_dir: str | Path | None = None) -> TrainReport:
    """30-epoch cross-entropy fit; greedy eval each epoch; best epoch kept.

    Report rows reuse the RL schema: step_budget holds the epoch number.
    """
    kept = filter_demos(demos, cfg.filter_threshold)
    if not kept:
        raise DataError(
            f"all {len(demos)} demo trajectories fall below the "
            f"{cfg.filter_threshold} reward filter"
        )
    report = TrainReport(task=task_id, method="bc", seed=seed)
    report.counters["demos_total"] = len(demos)
    report.counters["demos_kept"] = len(kept)

    ss = np.random.SeedSequence([0xBC0, seed])
    net_seed, shuf_seed = ss.spawn(2)
    net = QNetwork(net_cfg, np.random.Generator(np.random.PCG64(net_seed)))
    shuf_rng = np.random.Generator(np.random.PCG64(shuf_seed))
    opt = AdamW(net.params, cfg.lr, cfg.weight_decay)

    obs = np.stack([encode_obs(net_cfg, tr["pixels"]) for traj in kept for tr in traj])
    instr = np.stack([
        embed_instruction(tr["instruction"], net_cfg.instr_dim)
        for traj in kept for tr in traj
    ])
    types = np.array([int(tr["action"].action_type) for traj in kept for tr in traj])
    bins = np.array([tr["action"].bin for traj in kept for tr in traj])
    n = len(types)

    eval_cfg = TrainConfig(eval_episodes=cfg.eval_episodes)
    best_success = -1.0
    best_params = None
    for epoch in range(1, cfg.epochs + 1):
        order = shuf_rng.permutation(n)
        losses = []
        for lo in range(0, n, cfg.batch):
            idx = order[lo:lo + cfg.batch]
            x = obs_to_float(obs[idx])
            out, cache = net.forward(x, instr[idx], train=True)
            p_type = _softmax(out.q_type)
            p_bin = _softmax(out.q_bin)
            rows = np.arange(len(idx))
            loss = float(
                -np.mean(np.log(p_type[rows, types[idx]] + 1e-12))
                - np.mean(np.log(p_bin[rows, bins[idx]] + 1e-12))
            )
            losses.append(loss)
            dq_type = p_type.copy()
            dq_type[rows, types[idx]] -= 1.0
            dq_bin = p_bin.copy()
            dq_bin[rows, bins[idx]] -= 1.0
            grads = net.backward(cache, dq_type / len(idx), dq_bin / len(idx))
            clip_global_norm(grads, cfg.grad_clip)
            opt.step(net.params, grads)
        success = evaluate_greedy(net, task_id, None, eval_cfg)
        report.rows.append({
            "step_budget": epoch,
            "eval_success": success,
            "epsilon": 0.0,
            "loss_mean": float(np.mean(losses)),
        })
        if success > best_success:
            best_success = success
            best_params = {k: v.copy() for k, v in net.params.items()}
    net.params = best_params
    report.counters["best_success"] = best_success
    report.final_step = cfg.epochs
    if out_dir is not None:
        out_dir = Path(out_dir)
        out_dir.mkdir(parents=True, exist_ok=True)
        ckpt = out_dir / "model.ckpt"
        save_checkpoint(ckpt, net, cfg.epochs)
        report.checkpoint = str(ckpt)
        report.to_csv(out_dir / "train_report.csv")
    return report
