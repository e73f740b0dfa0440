from .bc import BCConfig, train_bc
from .dqn import TrainConfig, TrainReport, soft_update, td_targets, train_rl
from .encoder import embed_instruction
from .net import AdamW, NetConfig, QNetwork, QOutput, load_checkpoint, save_checkpoint
from .policy import masked_argmax, select_action
from .replay import PrioritizedBuffer, SumTree, Transition

__all__ = [
    "AdamW",
    "BCConfig",
    "NetConfig",
    "PrioritizedBuffer",
    "QNetwork",
    "QOutput",
    "SumTree",
    "TrainConfig",
    "TrainReport",
    "Transition",
    "embed_instruction",
    "load_checkpoint",
    "masked_argmax",
    "save_checkpoint",
    "select_action",
    "soft_update",
    "td_targets",
    "train_bc",
    "train_rl",
]
