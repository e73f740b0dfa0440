"""Double-DQN training loop with affordance-masked action selection.

One loop serves both arms of the comparison: pass a provider and the
agent explores and bootstraps under that provider's masks; pass None and
the mask is all-true, which is the plain RL baseline on the identical
code path.

Masks enter in two places. At acting time select_action samples only
allowed pairs.  At learning time the argmax inside the double-DQN target
is restricted to the mask that was observed at o_{t+1} and stored with
the transition, so stale replayed transitions bootstrap through the
affordances that were actually on screen.
"""

from __future__ import annotations

import csv
import hashlib
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from ..actions import Action, N_JOINT
from ..affordance.core import ActionMask, build_mask
from ..env import make
from ..errors import (
    ConfigurationError,
    ProtocolError,
    ScriptExecutionError,
    TrainingError,
)
from .encoder import embed_instruction
from .net import (
    AdamW,
    NetConfig,
    QNetwork,
    clip_global_norm,
    encode_obs,
    obs_to_float,
    save_checkpoint,
)
from .policy import select_action
from .replay import PrioritizedBuffer, SampleBatch, Transition

EVAL_SEED_BASE = 10_000_019
TRAIN_SEED_BASE = 2_000_000_000


@dataclass(frozen=True)
class TrainConfig:
    lr: float = 1e-5
    grad_clip: float = 1.0
    eps_start: float = 0.6
    eps_decay: float = 5000.0
    eps_end: float = 0.01
    batch: int = 64
    buffer: int = 40000
    steps_per_update: int = 50
    gamma: float = 0.9
    tau: float = 1e-5
    weight_decay: float = 1e-5
    total_steps: int = 2000
    eval_budgets: tuple[int, ...] = (250, 500, 1000, 2000)
    eval_episodes: int = 100
    per_alpha: float = 0.6
    per_beta: float = 0.4
    priority_eps: float = 1e-3
    huber_delta: float = 1.0
    soft_epsilon: float = 0.0
    empty_mask_policy: str = "fallback"  # or "fail_episode"
    provider_failure: str = "fail_run"   # or "full_mask"

    def __post_init__(self):
        for name in ("lr", "grad_clip", "eps_decay", "batch", "buffer",
                     "steps_per_update", "total_steps", "eval_episodes",
                     "huber_delta"):
            if getattr(self, name) <= 0:
                raise ConfigurationError(f"{name} must be positive")
        if not 0.0 < self.gamma < 1.0:
            raise ConfigurationError(f"gamma must be in (0,1), got {self.gamma}")
        if not 0.0 <= self.tau <= 1.0:
            raise ConfigurationError(f"tau must be in [0,1], got {self.tau}")
        if self.empty_mask_policy not in ("fallback", "fail_episode"):
            raise ConfigurationError(f"bad empty_mask_policy {self.empty_mask_policy!r}")
        if self.provider_failure not in ("fail_run", "full_mask"):
            raise ConfigurationError(f"bad provider_failure {self.provider_failure!r}")


def desk_train_config(**overrides) -> TrainConfig:
    """Hyperparameters sized for the small net on a CPU.

    Episodes here last one or two steps, so almost every stored
    transition is terminal and the return horizon is short.  A low
    gamma keeps the bootstrap value of a wasted click well below the
    value of a correct one, and the faster target blend plus the short
    exploration schedule suit runs that finish within a few hundred
    updates.
    """
    base = dict(
        lr=1e-3,
        batch=32,
        buffer=4000,
        steps_per_update=4,
        gamma=0.5,
        eps_decay=150.0,
        tau=0.05,
        total_steps=2000,
    )
    base.update(overrides)
    return TrainConfig(**base)


@dataclass
class TrainReport:
    task: str
    method: str
    seed: int
    rows: list[dict] = field(default_factory=list)
    counters: dict = field(default_factory=dict)
    final_step: int = 0
    checkpoint: str | None = None

    def success_at(self, budget: int) -> float:
        for row in self.rows:
            if row["step_budget"] == budget:
                return row["eval_success"]
        raise KeyError(f"no evaluation at budget {budget}")

    def to_csv(self, path: str | Path) -> Path:
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        with open(path, "w", newline="") as f:
            w = csv.writer(f)
            w.writerow(["step_budget", "eval_success", "epsilon", "loss_mean"])
            for row in self.rows:
                w.writerow([
                    row["step_budget"],
                    f"{row['eval_success']:.6f}",
                    f"{row['epsilon']:.6f}",
                    f"{row['loss_mean']:.6f}",
                ])
        return path


def epsilon_at(cfg: TrainConfig, t: int) -> float:
    return cfg.eps_end + (cfg.eps_start - cfg.eps_end) * float(np.exp(-t / cfg.eps_decay))


def huber(d: np.ndarray, delta: float = 1.0) -> np.ndarray:
    a = np.abs(d)
    return np.where(a <= delta, 0.5 * d * d, delta * (a - 0.5 * delta))


def huber_grad(d: np.ndarray, delta: float = 1.0) -> np.ndarray:
    return np.clip(d, -delta, delta)


def soft_update(target: QNetwork, online: QNetwork, tau: float) -> None:
    """target <- tau * online + (1 - tau) * target, in place."""
    for k, p in target.params.items():
        p *= 1.0 - tau
        p += tau * online.params[k]
    for k, s in target.bn_state.items():
        s *= 1.0 - tau
        s += tau * online.bn_state[k]


def td_targets(batch: SampleBatch, online: QNetwork, target: QNetwork,
               gamma: float) -> np.ndarray:
    """Double-DQN targets with the stored next-step masks.

    The online net picks a* among the pairs allowed by next_mask; the
    target net prices it.  A row whose mask allows nothing falls back to
    the unmasked argmax, matching select_action's fallback.
    """
    next_f = obs_to_float(batch.next_obs)
    q_on, _ = online.forward(next_f, batch.instr, train=False)
    q_tg, _ = target.forward(next_f, batch.instr, train=False)
    joint_on = (q_on.q_type[:, :, None] + q_on.q_bin[:, None, :]).reshape(-1, N_JOINT)
    joint_tg = (q_tg.q_type[:, :, None] + q_tg.q_bin[:, None, :]).reshape(-1, N_JOINT)
    masks = batch.next_masks
    empty = ~masks.any(axis=1)
    if empty.any():
        masks = masks.copy()
        masks[empty] = True
    masked = np.where(masks, joint_on, -np.inf)
    a_star = np.argmax(masked, axis=1)
    boot = joint_tg[np.arange(len(a_star)), a_star]
    return batch.rewards + gamma * np.where(batch.dones, 0.0, boot)


def _digest32(label: str) -> int:
    return int.from_bytes(hashlib.blake2s(label.encode(), digest_size=4).digest(), "little")


def _mask_for(provider, obs, cfg: TrainConfig, counters: dict) -> ActionMask:
    if provider is None:
        return ActionMask.all_true()
    try:
        return build_mask(provider(obs))
    except (ScriptExecutionError, ProtocolError) as e:
        if cfg.provider_failure == "full_mask":
            counters["provider_failures"] = counters.get("provider_failures", 0) + 1
            return ActionMask.all_true()
        raise TrainingError(f"affordance provider failed: {e}") from e


def _assert_in_mask(action: Action, mask: ActionMask, counters: dict) -> None:
    # online safety check: a non-empty hard mask must contain the action
    if mask.is_empty():
        return
    if not bool(mask.flat[action.flat]):
        counters["mask_violations"] = counters.get("mask_violations", 0) + 1
        raise TrainingError(
            f"selected action {action} falls outside the active mask"
        )
    counters["mask_checks"] = counters.get("mask_checks", 0) + 1


def evaluate_greedy(net: QNetwork, task_id: str, provider, cfg: TrainConfig,
                    counters: dict | None = None) -> float:
    """Masked greedy success rate over the fixed evaluation episode set."""
    counters = counters if counters is not None else {}
    env = make(task_id)
    net_cfg = net.config
    wins = 0
    for i in range(cfg.eval_episodes):
        obs = env.reset(seed=EVAL_SEED_BASE + i)
        instr = embed_instruction(obs.instruction, net_cfg.instr_dim)
        while True:
            mask = _mask_for(provider, obs, cfg, counters)
            if mask.is_empty() and cfg.empty_mask_policy == "fail_episode":
                counters["empty_mask_aborts"] = counters.get("empty_mask_aborts", 0) + 1
                break
            out = net.q_single(encode_obs(net_cfg, obs.pixels), instr)
            rng = np.random.default_rng(0)  # greedy path draws nothing
            action = select_action(out, mask, 0.0, rng, counters)
            if cfg.soft_epsilon == 0.0:
                _assert_in_mask(action, mask, counters)
            res = env.step(action)
            if res.done:
                wins += int(res.success)
                break
            obs = res.observation
    return wins / cfg.eval_episodes


def _learn_step(online: QNetwork, target: QNetwork, opt: AdamW,
                buffer: PrioritizedBuffer, cfg: TrainConfig,
                per_rng: np.random.Generator) -> float | None:
    batch = buffer.sample(cfg.batch, per_rng)
    if batch is None:
        return None
    y = td_targets(batch, online, target, cfg.gamma)
    x = obs_to_float(batch.obs)
    out, cache = online.forward(x, batch.instr, train=True)
    b_idx = np.arange(cfg.batch)
    t_idx = batch.actions // 1024
    bin_idx = batch.actions % 1024
    q_sel = out.q_type[b_idx, t_idx] + out.q_bin[b_idx, bin_idx]
    delta = q_sel - y
    loss = float(np.mean(batch.weights * huber(delta, cfg.huber_delta)))
    if not np.isfinite(loss):
        raise TrainingError(
            f"non-finite loss (max |q_sel| {np.max(np.abs(q_sel)):.3g}, "
            f"max |y| {np.max(np.abs(y)):.3g})"
        )
    dq = batch.weights * huber_grad(delta, cfg.huber_delta) / cfg.batch
    dq_type = np.zeros_like(out.q_type)
    dq_bin = np.zeros_like(out.q_bin)
    dq_type[b_idx, t_idx] = dq
    dq_bin[b_idx, bin_idx] = dq
    grads = online.backward(cache, dq_type, dq_bin)
    clip_global_norm(grads, cfg.grad_clip)
    opt.step(online.params, grads)
    buffer.update_priorities(batch.indices, np.abs(delta))
    soft_update(target, online, cfg.tau)
    return loss


def train_rl(task_id: str, provider, net_cfg: NetConfig, cfg: TrainConfig,
             seed: int, out_dir: str | Path | None = None,
             method: str | None = None) -> TrainReport:
    """Run the interaction loop for cfg.total_steps env steps.

    Evaluation happens when the step count crosses each budget in
    cfg.eval_budgets (plus the final step), with epsilon frozen at 0.
    Deterministic for a given (task, config, seed).
    """
    ss = np.random.SeedSequence([_digest32("train-rl"), seed])
    net_seed, act_seed, per_seed = ss.spawn(3)
    online = QNetwork(net_cfg, np.random.Generator(np.random.PCG64(net_seed)))
    target = online.copy()
    act_rng = np.random.Generator(np.random.PCG64(act_seed))
    per_rng = np.random.Generator(np.random.PCG64(per_seed))
    opt = AdamW(online.params, cfg.lr, cfg.weight_decay)
    obs_shape = (net_cfg.in_channels, *net_cfg.input_hw)
    buffer = PrioritizedBuffer(cfg.buffer, obs_shape, net_cfg.instr_dim,
                               cfg.per_alpha, cfg.per_beta, cfg.priority_eps)
    method = method if method is not None else ("coga" if provider is not None else "rl")
    report = TrainReport(task=task_id, method=method, seed=seed)
    counters = report.counters
    budgets = sorted(set(b for b in cfg.eval_budgets if b <= cfg.total_steps) | {cfg.total_steps})
    losses: list[float] = []

    env = make(task_id)
    episode = 0

    def fresh_episode():
        nonlocal episode
        obs = env.reset(seed=TRAIN_SEED_BASE + seed * 1_000_000 + episode)
        episode += 1
        instr = embed_instruction(obs.instruction, net_cfg.instr_dim)
        mask = _mask_for(provider, obs, cfg, counters)
        return obs, instr, mask

    obs, instr, mask = fresh_episode()
    t = 0
    while t < cfg.total_steps:
        if mask.is_empty() and cfg.empty_mask_policy == "fail_episode":
            # nothing is sampleable: burn the step and abandon the episode
            counters["empty_mask_aborts"] = counters.get("empty_mask_aborts", 0) + 1
            t += 1
            need_reset = True
        else:
            eps = epsilon_at(cfg, t)
            obs_u8 = encode_obs(net_cfg, obs.pixels)
            out = online.q_single(obs_u8, instr)
            action = select_action(out, mask, eps, act_rng, counters,
                                   soft_epsilon=cfg.soft_epsilon)
            if cfg.soft_epsilon == 0.0:
                _assert_in_mask(action, mask, counters)
            res = env.step(action)
            t += 1
            if res.done:
                next_mask = ActionMask.none()
            else:
                next_mask = _mask_for(provider, res.observation, cfg, counters)
            buffer.push(Transition(obs_u8, instr, action.flat, res.reward,
                                   res.done, encode_obs(net_cfg, res.observation.pixels),
                                   next_mask))
            need_reset = res.done
            if res.done:
                counters["episodes"] = counters.get("episodes", 0) + 1
                counters["successes"] = counters.get("successes", 0) + int(res.success)
            else:
                obs, mask = res.observation, next_mask
            if t % cfg.steps_per_update == 0:
                loss = _learn_step(online, target, opt, buffer, cfg, per_rng)
                if loss is not None:
                    losses.append(loss)
        if need_reset:
            obs, instr, mask = fresh_episode()
        if t in budgets:
            success = evaluate_greedy(online, task_id, provider, cfg, counters)
            report.rows.append({
                "step_budget": t,
                "eval_success": success,
                "epsilon": epsilon_at(cfg, t),
                "loss_mean": float(np.mean(losses)) if losses else 0.0,
            })
            losses = []
    report.final_step = t
    if out_dir is not None:
        out_dir = Path(out_dir)
        out_dir.mkdir(parents=True, exist_ok=True)
        ckpt = out_dir / "model.ckpt"
        save_checkpoint(ckpt, online, t)
        report.checkpoint = str(ckpt)
        report.to_csv(out_dir / "train_report.csv")
    return report
