"""Q network: convolutional trunk, instruction fusion, and two heads.

The net maps (pixels, instruction embedding) to two value vectors:
``q_type`` over the 4 action types and ``q_bin`` over the 1024 grid
bins.  The joint value of an action is ``q_type[t] + q_bin[b]``, which
keeps the output layer at 1028 units instead of 4096.

Two presets are provided.  ``paper`` is the full-size architecture (five
conv blocks with batch norm); it exists so its parameter budget can be
planned and checkpoints exchanged, but it is far too large to train in
tests.  ``desk`` is a small net with the same topology (two conv blocks,
no batch norm) that trains in seconds on a CPU and is what the bench
harness uses throughout.
"""

from __future__ import annotations

import hashlib
import io
import json
import struct
from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np

from ..actions import N_ACTION_TYPES, N_BINS, SCREEN_H, SCREEN_W
from ..errors import ConfigurationError
from ..vision import to_grayscale
from . import nn
from .encoder import INSTR_DIM

CHECKPOINT_MAGIC = b"CGB1"
CHECKPOINT_VERSION = 1


@dataclass(frozen=True)
class NetConfig:
    conv_channels: tuple[int, ...] = (8, 16)
    pool_after: frozenset[int] = frozenset({1, 2})  # 1-based conv index
    fc_sizes: tuple[int, int] = (128, 64)
    instr_dim: int = INSTR_DIM
    use_batch_norm: bool = False
    input_scale: int = 2
    in_channels: int = 1

    def __post_init__(self):
        if not self.conv_channels:
            raise ConfigurationError("need at least one conv layer")
        if self.input_scale < 1:
            raise ConfigurationError(f"bad input_scale {self.input_scale}")
        if self.in_channels not in (1, 3):
            raise ConfigurationError(f"in_channels must be 1 or 3, got {self.in_channels}")
        bad = set(self.pool_after) - set(range(1, len(self.conv_channels) + 1))
        if bad:
            raise ConfigurationError(f"pool_after references missing conv layers: {sorted(bad)}")

    @property
    def input_hw(self) -> tuple[int, int]:
        s = self.input_scale
        return (SCREEN_H + s - 1) // s, (SCREEN_W + s - 1) // s

    @property
    def trunk_hw(self) -> tuple[int, int]:
        h, w = self.input_hw
        for i in range(1, len(self.conv_channels) + 1):
            if i in self.pool_after:
                h, w = h // 2, w // 2
        return h, w

    @property
    def flat_dim(self) -> int:
        h, w = self.trunk_hw
        return self.conv_channels[-1] * h * w

    def digest(self) -> str:
        blob = json.dumps(
            {
                "conv_channels": list(self.conv_channels),
                "pool_after": sorted(self.pool_after),
                "fc_sizes": list(self.fc_sizes),
                "instr_dim": self.instr_dim,
                "use_batch_norm": self.use_batch_norm,
                "input_scale": self.input_scale,
                "in_channels": self.in_channels,
            },
            sort_keys=True,
        ).encode()
        return hashlib.sha256(blob).hexdigest()[:16]

    def plan(self) -> list[tuple[str, tuple[int, ...]]]:
        """Parameter names and shapes, in network order."""
        out = []
        c_in = self.in_channels
        for i, c_out in enumerate(self.conv_channels, start=1):
            out.append((f"conv{i}_w", (c_out, c_in, 3, 3)))
            out.append((f"conv{i}_b", (c_out,)))
            if self.use_batch_norm:
                out.append((f"bn{i}_gamma", (c_out,)))
                out.append((f"bn{i}_beta", (c_out,)))
            c_in = c_out
        h1, h2 = self.fc_sizes
        out.append(("fc1_w", (self.flat_dim, h1)))
        out.append(("fc1_b", (h1,)))
        out.append(("fc2_w", (h1 + self.instr_dim, h2)))
        out.append(("fc2_b", (h2,)))
        out.append(("head_type_w", (h2, N_ACTION_TYPES)))
        out.append(("head_type_b", (N_ACTION_TYPES,)))
        out.append(("head_bin_w", (h2, N_BINS)))
        out.append(("head_bin_b", (N_BINS,)))
        return out

    def total_params(self) -> int:
        return sum(int(np.prod(shape)) for _, shape in self.plan())


def desk_config(**overrides) -> NetConfig:
    return NetConfig(**overrides)


def paper_config() -> NetConfig:
    return NetConfig(
        conv_channels=(32, 64, 128, 256, 512),
        pool_after=frozenset({2, 4, 5}),
        fc_sizes=(1024, 384),
        instr_dim=384,
        use_batch_norm=True,
        input_scale=1,
        in_channels=3,
    )


class QOutput(NamedTuple):
    q_type: np.ndarray  # (B, 4)
    q_bin: np.ndarray   # (B, 1024)

    def joint(self) -> np.ndarray:
        """(B, 4, 1024) additive joint values."""
        return self.q_type[:, :, None] + self.q_bin[:, None, :]


def encode_obs(config: NetConfig, pixels: np.ndarray) -> np.ndarray:
    """Full-res RGB uint8 (H, W, 3) -> network-input uint8 (C, h, w)."""
    if pixels.shape != (SCREEN_H, SCREEN_W, 3):
        raise ConfigurationError(f"bad observation shape {pixels.shape}")
    s = config.input_scale
    if config.in_channels == 1:
        gray = to_grayscale(pixels)
        return np.ascontiguousarray(gray[::s, ::s][None, :, :])
    return np.ascontiguousarray(pixels.transpose(2, 0, 1)[:, ::s, ::s])


def obs_to_float(batch_u8: np.ndarray, dtype=np.float32) -> np.ndarray:
    """uint8 (B, C, h, w) -> float in [0, 1]."""
    return batch_u8.astype(dtype) / dtype(255.0)


class QNetwork:
    """float32 by default; pass dtype=np.float64 when exactness matters
    more than speed (finite-difference checks, hand-value tests)."""

    instr_gain = 8.0

    def __init__(self, config: NetConfig, rng: np.random.Generator | None = None,
                 dtype=np.float32):
        self.config = config
        self.dtype = np.dtype(dtype).type
        self.params: dict[str, np.ndarray] = {}
        self.bn_state: dict[str, np.ndarray] = {}
        rng = rng if rng is not None else np.random.default_rng(0)
        for name, shape in config.plan():
            if name.endswith("_b") or name.endswith("_beta"):
                self.params[name] = np.zeros(shape, dtype=self.dtype)
            elif name.endswith("_gamma"):
                self.params[name] = np.ones(shape, dtype=self.dtype)
            elif name.startswith("conv"):
                fan_in = shape[1] * shape[2] * shape[3]
                self.params[name] = nn.he_init(rng, shape, fan_in).astype(self.dtype)
            else:
                fan_in = shape[0]
                self.params[name] = nn.he_init(rng, shape, fan_in).astype(self.dtype)
        # The instruction block enters fc2 as a unit-norm vector next to ~h1
        # ReLU features, so at fan-in init its influence on the Qs (and the
        # gradient coupling back onto it) starts negligible. Boosting those
        # columns is equivalent to a fixed input gain and lets short runs
        # condition on the instruction early instead of plateauing at the
        # instruction-blind policy.
        h1 = config.fc_sizes[0]
        self.params["fc2_w"][h1:] *= self.instr_gain
        if config.use_batch_norm:
            for i, c in enumerate(config.conv_channels, start=1):
                self.bn_state[f"bn{i}_mean"] = np.zeros(c, dtype=self.dtype)
                self.bn_state[f"bn{i}_var"] = np.ones(c, dtype=self.dtype)

    def forward(self, x: np.ndarray, instr: np.ndarray, train: bool = False):
        """x: (B, C, h, w) in [0, 1]; instr: (B, instr_dim)."""
        cfg = self.config
        p = self.params
        x = np.asarray(x, dtype=self.dtype)
        instr = np.asarray(instr, dtype=self.dtype)
        caches = []
        h = x
        for i in range(1, len(cfg.conv_channels) + 1):
            h, c_conv = nn.conv_forward(h, p[f"conv{i}_w"], p[f"conv{i}_b"])
            c_bn = None
            if cfg.use_batch_norm:
                h, c_bn = nn.batchnorm_forward(
                    h, p[f"bn{i}_gamma"], p[f"bn{i}_beta"],
                    self.bn_state[f"bn{i}_mean"], self.bn_state[f"bn{i}_var"],
                    train,
                )
            h, c_relu = nn.relu_forward(h)
            c_pool = None
            if i in cfg.pool_after:
                h, c_pool = nn.maxpool_forward(h)
            caches.append((c_conv, c_bn, c_relu, c_pool))
        bsz = x.shape[0]
        flat = h.reshape(bsz, -1)
        h1_pre, c_fc1 = nn.linear_forward(flat, p["fc1_w"], p["fc1_b"])
        h1, c_relu1 = nn.relu_forward(h1_pre)
        z = np.concatenate([h1, instr], axis=1)
        h2_pre, c_fc2 = nn.linear_forward(z, p["fc2_w"], p["fc2_b"])
        h2, c_relu2 = nn.relu_forward(h2_pre)
        q_type, c_ht = nn.linear_forward(h2, p["head_type_w"], p["head_type_b"])
        q_bin, c_hb = nn.linear_forward(h2, p["head_bin_w"], p["head_bin_b"])
        cache = (caches, c_fc1, c_relu1, c_fc2, c_relu2, c_ht, c_hb,
                 h.shape, h1.shape[1])
        return QOutput(q_type, q_bin), cache

    def backward(self, cache, dq_type: np.ndarray, dq_bin: np.ndarray) -> dict[str, np.ndarray]:
        cfg = self.config
        (caches, c_fc1, c_relu1, c_fc2, c_relu2, c_ht, c_hb,
         trunk_shape, h1_dim) = cache
        dq_type = np.asarray(dq_type, dtype=self.dtype)
        dq_bin = np.asarray(dq_bin, dtype=self.dtype)
        grads: dict[str, np.ndarray] = {}
        dh2_a, grads["head_type_w"], grads["head_type_b"] = nn.linear_backward(dq_type, c_ht)
        dh2_b, grads["head_bin_w"], grads["head_bin_b"] = nn.linear_backward(dq_bin, c_hb)
        dh2 = nn.relu_backward(dh2_a + dh2_b, c_relu2)
        dz, grads["fc2_w"], grads["fc2_b"] = nn.linear_backward(dh2, c_fc2)
        dh1 = nn.relu_backward(dz[:, :h1_dim], c_relu1)
        dflat, grads["fc1_w"], grads["fc1_b"] = nn.linear_backward(dh1, c_fc1)
        dh = dflat.reshape(trunk_shape)
        for i in range(len(cfg.conv_channels), 0, -1):
            c_conv, c_bn, c_relu, c_pool = caches[i - 1]
            if c_pool is not None:
                dh = nn.maxpool_backward(dh, c_pool)
            dh = nn.relu_backward(dh, c_relu)
            if c_bn is not None:
                dh, dgamma, dbeta = nn.batchnorm_backward(dh, c_bn)
                grads[f"bn{i}_gamma"] = dgamma
                grads[f"bn{i}_beta"] = dbeta
            dh, dw, db = nn.conv_backward(dh, c_conv, need_dx=i > 1)
            grads[f"conv{i}_w"] = dw
            grads[f"conv{i}_b"] = db
        return grads

    def q_single(self, obs_u8: np.ndarray, instr_vec: np.ndarray) -> QOutput:
        """Eval-mode forward for one encoded observation."""
        x = obs_to_float(obs_u8[None])
        out, _ = self.forward(x, instr_vec[None], train=False)
        return out

    def copy(self) -> "QNetwork":
        other = QNetwork.__new__(QNetwork)
        other.config = self.config
        other.dtype = self.dtype
        other.params = {k: v.copy() for k, v in self.params.items()}
        other.bn_state = {k: v.copy() for k, v in self.bn_state.items()}
        return other


def clip_global_norm(grads: dict[str, np.ndarray], max_norm: float) -> float:
    """Scale all gradients in place so their joint L2 norm is <= max_norm."""
    total = 0.0
    for g in grads.values():
        total += float(np.sum(g * g))
    norm = float(np.sqrt(total))
    if norm > max_norm and norm > 0.0:
        scale = max_norm / norm
        for g in grads.values():
            g *= scale
    return norm


class AdamW:
    """Adam with decoupled weight decay."""

    def __init__(self, params: dict[str, np.ndarray], lr: float,
                 weight_decay: float = 1e-5,
                 betas: tuple[float, float] = (0.9, 0.999), eps: float = 1e-8):
        self.lr = lr
        self.weight_decay = weight_decay
        self.beta1, self.beta2 = betas
        self.eps = eps
        self.t = 0
        self.m = {k: np.zeros_like(v) for k, v in params.items()}
        self.v = {k: np.zeros_like(v) for k, v in params.items()}

    def step(self, params: dict[str, np.ndarray], grads: dict[str, np.ndarray]):
        self.t += 1
        b1, b2 = self.beta1, self.beta2
        bc1 = 1.0 - b1 ** self.t
        bc2 = 1.0 - b2 ** self.t
        for k, p in params.items():
            g = grads[k]
            self.m[k] = b1 * self.m[k] + (1.0 - b1) * g
            self.v[k] = b2 * self.v[k] + (1.0 - b2) * (g * g)
            mhat = self.m[k] / bc1
            vhat = self.v[k] / bc2
            p -= self.lr * (mhat / (np.sqrt(vhat) + self.eps) + self.weight_decay * p)


def save_checkpoint(path, net: QNetwork, step: int) -> None:
    """Binary format: magic, u32 header length, JSON header, float32 payload."""
    arrays = []
    payload = io.BytesIO()
    for name in sorted(net.params):
        arr = net.params[name]
        arrays.append([name, list(arr.shape)])
        payload.write(arr.astype("<f4").tobytes())
    for name in sorted(net.bn_state):
        arr = net.bn_state[name]
        arrays.append([name, list(arr.shape)])
        payload.write(arr.astype("<f4").tobytes())
    header = json.dumps(
        {
            "format_version": CHECKPOINT_VERSION,
            "config_digest": net.config.digest(),
            "step": int(step),
            "arrays": arrays,
        },
        sort_keys=True,
    ).encode()
    with open(path, "wb") as f:
        f.write(CHECKPOINT_MAGIC)
        f.write(struct.pack("<I", len(header)))
        f.write(header)
        f.write(payload.getvalue())


def load_checkpoint(path, config: NetConfig, dtype=np.float32) -> tuple[QNetwork, int]:
    with open(path, "rb") as f:
        magic = f.read(4)
        if magic != CHECKPOINT_MAGIC:
            raise ConfigurationError(f"{path}: not a checkpoint file")
        (hlen,) = struct.unpack("<I", f.read(4))
        header = json.loads(f.read(hlen).decode())
        if header.get("format_version") != CHECKPOINT_VERSION:
            raise ConfigurationError(
                f"{path}: unsupported format version {header.get('format_version')}"
            )
        if header["config_digest"] != config.digest():
            raise ConfigurationError(
                f"{path}: checkpoint was written by a different network "
                f"configuration ({header['config_digest']} != {config.digest()})"
            )
        net = QNetwork(config, dtype=dtype)
        for name, shape in header["arrays"]:
            n = int(np.prod(shape))
            raw = f.read(n * 4)
            if len(raw) != n * 4:
                raise ConfigurationError(f"{path}: truncated payload at {name}")
            arr = np.frombuffer(raw, dtype="<f4").astype(net.dtype).reshape(shape)
            if name in net.params:
                net.params[name] = arr
            elif name in net.bn_state:
                net.bn_state[name] = arr
            else:
                raise ConfigurationError(f"{path}: unknown array {name!r}")
    return net, int(header["step"])
