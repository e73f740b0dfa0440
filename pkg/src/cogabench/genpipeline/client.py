"""Chat-with-images clients: mock playback, recorded replay, live HTTP.

Mock and recorded clients are the only ones tests touch; both are fully
deterministic. The live client talks to a chat-completions style endpoint
configured through environment variables and is never exercised in CI.
"""

from __future__ import annotations

import base64
import hashlib
import io
import json
import os
import re
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from ..errors import ConfigurationError, ProtocolError

ENV_URL = "COGA_VLM_URL"
ENV_MODEL = "COGA_VLM_MODEL"
ENV_KEY = "COGA_VLM_KEY"

_REPLY_RE = re.compile(r"^(\d+)_reply\.txt$")


@dataclass
class Exchange:
    prompt: str
    reply: str
    images: tuple[str, ...] = ()


@dataclass
class ChatClient:
    """Base: records every exchange; subclasses implement _answer."""

    exchanges: list[Exchange] = field(default_factory=list)

    def send(self, prompt: str, images: Sequence = ()) -> str:
        reply = self._answer(prompt, images)
        self.exchanges.append(
            Exchange(prompt, reply, tuple(_image_name(im) for im in images))
        )
        return reply

    def _answer(self, prompt: str, images: Sequence) -> str:
        raise NotImplementedError


def _image_name(image) -> str:
    if isinstance(image, (str, Path)):
        return Path(image).name
    arr = np.asarray(image)
    return f"array{arr.shape}"


def _image_png_b64(image) -> str:
    from PIL import Image

    if isinstance(image, (str, Path)):
        raw = Path(image).read_bytes()
    else:
        buf = io.BytesIO()
        Image.fromarray(np.asarray(image, dtype=np.uint8)).save(buf, format="PNG")
        raw = buf.getvalue()
    return base64.b64encode(raw).decode("ascii")


class MockClient(ChatClient):
    """Plays back ``NN_reply.txt`` fixtures in order, keyed by call index."""

    mode = "mock"

    def __init__(self, fixture_dir: str | Path):
        super().__init__()
        self.fixture_dir = Path(fixture_dir)
        replies = {}
        for p in self.fixture_dir.iterdir():
            m = _REPLY_RE.match(p.name)
            if m:
                replies[int(m.group(1))] = p
        if not replies:
            raise ConfigurationError(f"no NN_reply.txt fixtures in {self.fixture_dir}")
        self._replies = [replies[k] for k in sorted(replies)]
        self._cursor = 0

    def _answer(self, prompt: str, images: Sequence) -> str:
        if self._cursor >= len(self._replies):
            raise ProtocolError(
                f"mock fixtures exhausted after {len(self._replies)} replies "
                f"(next prompt started {prompt[:60]!r})"
            )
        reply = self._replies[self._cursor].read_text()
        self._cursor += 1
        return reply


def _prompt_digest(prompt: str) -> str:
    return hashlib.blake2s(prompt.encode("utf-8"), digest_size=16).hexdigest()


class RecordedClient(ChatClient):
    """Replays transcripts keyed by exact prompt text (order-independent)."""

    mode = "recorded"

    def __init__(self, fixture_dir: str | Path):
        super().__init__()
        self.fixture_dir = Path(fixture_dir)
        self._by_digest: dict[str, str] = {}
        for reply_path in self.fixture_dir.iterdir():
            m = _REPLY_RE.match(reply_path.name)
            if not m:
                continue
            prompt_path = self.fixture_dir / f"{m.group(1)}_prompt.txt"
            if not prompt_path.exists():
                raise ConfigurationError(f"{reply_path.name} has no matching prompt file")
            self._by_digest[_prompt_digest(prompt_path.read_text())] = reply_path.read_text()
        if not self._by_digest:
            raise ConfigurationError(f"no prompt/reply fixture pairs in {self.fixture_dir}")

    def _answer(self, prompt: str, images: Sequence) -> str:
        try:
            return self._by_digest[_prompt_digest(prompt)]
        except KeyError:
            raise ProtocolError(
                f"no recorded reply for prompt starting {prompt[:80]!r}"
            ) from None


class LiveClient(ChatClient):
    """Chat-completions endpoint with inline base64 images."""

    mode = "live"

    def __init__(self, url: str | None = None, model: str | None = None,
                 key: str | None = None, timeout: float = 120.0):
        super().__init__()
        self.url = url or os.environ.get(ENV_URL)
        self.model = model or os.environ.get(ENV_MODEL)
        self.key = key or os.environ.get(ENV_KEY)
        self.timeout = timeout
        if not self.url or not self.model:
            raise ConfigurationError(
                f"live client needs {ENV_URL} and {ENV_MODEL} set"
            )

    def _answer(self, prompt: str, images: Sequence) -> str:
        import requests

        content: list[dict] = [{"type": "text", "text": prompt}]
        for im in images:
            content.append({
                "type": "image_url",
                "image_url": {"url": "data:image/png;base64," + _image_png_b64(im)},
            })
        body = {"model": self.model, "messages": [{"role": "user", "content": content}]}
        headers = {"Content-Type": "application/json"}
        if self.key:
            headers["Authorization"] = f"Bearer {self.key}"
        try:
            resp = requests.post(self.url.rstrip("/") + "/chat/completions",
                                 json=body, headers=headers, timeout=self.timeout)
            resp.raise_for_status()
            data = resp.json()
            return data["choices"][0]["message"]["content"]
        except (requests.RequestException, KeyError, IndexError, ValueError) as e:
            raise ProtocolError(f"live chat endpoint failure: {e}") from e


def make_client(mode: str, fixture_dir: str | Path | None = None, **kw) -> ChatClient:
    if mode == "mock":
        if fixture_dir is None:
            raise ConfigurationError("mock client needs a fixture directory")
        return MockClient(fixture_dir)
    if mode == "recorded":
        if fixture_dir is None:
            raise ConfigurationError("recorded client needs a fixture directory")
        return RecordedClient(fixture_dir)
    if mode == "live":
        return LiveClient(**kw)
    raise ConfigurationError(f"unknown client mode {mode!r}")


def save_transcript(path: str | Path, exchanges: Sequence[Exchange]) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w") as f:
        for i, ex in enumerate(exchanges, 1):
            f.write(json.dumps({
                "n": i,
                "prompt": ex.prompt,
                "reply": ex.reply,
                "images": list(ex.images),
            }) + "\n")
    return path
