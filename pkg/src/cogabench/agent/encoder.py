"""Instruction text embedding.

The instruction bar text is the only channel that distinguishes some
episodes (e.g. "Click button ONE." vs "Click button TWO."), so the agent
needs a text input alongside pixels.  We use signed feature hashing: each
token flips a deterministic sign into a deterministic bucket.  No
vocabulary, no external model, and the same string always maps to the
same vector on every platform.
"""

from __future__ import annotations

import hashlib
import re

import numpy as np

INSTR_DIM = 64

_TOKEN_RE = re.compile(r"[a-z0-9]+")


def tokenize(text: str) -> list[str]:
    return _TOKEN_RE.findall(text.lower())


def embed_instruction(text: str, dim: int = INSTR_DIM) -> np.ndarray:
    """Hash ``text`` into a fixed L2-normalized vector of length ``dim``.

    Empty or token-free text returns the zero vector.
    """
    if dim < 1:
        raise ValueError(f"dim must be >= 1, got {dim}")
    vec = np.zeros(dim, dtype=np.float64)
    for tok in tokenize(text):
        h = hashlib.blake2s(tok.encode("utf-8"), digest_size=8).digest()
        raw = int.from_bytes(h, "little")
        bucket = raw % dim
        sign = 1.0 if (raw >> 63) & 1 == 0 else -1.0
        vec[bucket] += sign
    norm = float(np.linalg.norm(vec))
    if norm > 0.0:
        vec /= norm
    return vec
