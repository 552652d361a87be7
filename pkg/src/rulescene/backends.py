"""LLM chat backends: deterministic replay from fixtures, plus a live HTTP
client for OpenAI-style chat completion endpoints.

Replay keys each response by a hash of the whole message transcript, so any
change to prompts or ordering surfaces as a missing fixture instead of a
silently different conversation.
"""

from __future__ import annotations

import hashlib
import json
import os
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Protocol, Sequence

import requests

from .prompts import PromptMessage

API_KEY_ENV = "TARGET_LLM_API_KEY"


class BackendError(Exception):
    pass


class FixtureMissing(BackendError):
    def __init__(self, digest: str, path: Path):
        self.digest = digest
        self.path = path
        super().__init__(f"no recorded response for transcript {digest} ({path})")


class BackendUnavailable(BackendError):
    pass


class MalformedResponse(BackendError):
    pass


def transcript_hash(messages: Sequence[PromptMessage]) -> str:
    """First 16 hex chars of sha256 over the canonical JSON transcript."""
    payload = json.dumps(
        [{"content": m.content, "role": m.role} for m in messages],
        sort_keys=True, separators=(",", ":"), ensure_ascii=True,
    )
    return hashlib.sha256(payload.encode("utf-8")).hexdigest()[:16]


class ChatBackend(Protocol):
    backend_id: str

    def complete(self, messages: Sequence[PromptMessage]) -> str: ...


class ReplayBackend:
    """Looks completions up in a directory of recorded responses."""

    def __init__(self, fixture_dir: str | Path):
        self.fixture_dir = Path(fixture_dir)
        self.backend_id = "replay"

    def complete(self, messages: Sequence[PromptMessage]) -> str:
        digest = transcript_hash(messages)
        path = self.fixture_dir / digest
        if not path.is_file():
            raise FixtureMissing(digest, path)
        return path.read_text("utf-8")


class ScriptedBackend:
    """Serves a fixed queue of responses; for tests and fixture authoring."""

    def __init__(self, responses: Sequence[str]):
        self._queue = list(responses)
        self.calls: list[tuple[PromptMessage, ...]] = []
        self.backend_id = "scripted"

    def complete(self, messages: Sequence[PromptMessage]) -> str:
        self.calls.append(tuple(messages))
        if not self._queue:
            raise BackendUnavailable("scripted backend exhausted")
        return self._queue.pop(0)


class RecordingBackend:
    """Wraps another backend and writes every exchange as a replay fixture."""

    def __init__(self, inner: ChatBackend, out_dir: str | Path):
        self.inner = inner
        self.out_dir = Path(out_dir)
        self.out_dir.mkdir(parents=True, exist_ok=True)
        self.backend_id = f"recording({inner.backend_id})"

    def complete(self, messages: Sequence[PromptMessage]) -> str:
        response = self.inner.complete(messages)
        (self.out_dir / transcript_hash(messages)).write_text(response, "utf-8")
        return response


@dataclass(frozen=True)
class BackendConfig:
    kind: str = "replay"  # replay | http
    fixture_dir: str = "fixtures/llm"
    endpoint: str = "https://api.openai.com/v1/chat/completions"
    model: str = "gpt-4"
    temperature: float = 0.0
    timeout_s: float = 30.0
    max_retries: int = 3

    def __post_init__(self):
        if self.kind not in ("replay", "http"):
            raise ValueError(f"backend kind must be replay or http, got {self.kind!r}")


class HttpBackend:
    """OpenAI-compatible chat completions over HTTP.

    The API key comes from the environment, never from config files. Failed
    requests retry with exponential backoff before giving up.
    """

    def __init__(
        self,
        config: BackendConfig,
        transport: Callable[..., "requests.Response"] | None = None,
        sleeper: Callable[[float], None] = time.sleep,
    ):
        self.config = config
        self._post = transport if transport is not None else requests.post
        self._sleep = sleeper
        self.backend_id = f"http:{config.model}"

    def complete(self, messages: Sequence[PromptMessage]) -> str:
        key = os.environ.get(API_KEY_ENV)
        if not key:
            raise BackendUnavailable(f"set {API_KEY_ENV} to use the http backend")
        body = {
            "model": self.config.model,
            "temperature": self.config.temperature,
            "messages": [{"role": m.role, "content": m.content} for m in messages],
        }
        headers = {"Authorization": f"Bearer {key}"}
        last_error: Exception | None = None
        for attempt in range(self.config.max_retries + 1):
            if attempt:
                self._sleep(0.5 * 2 ** (attempt - 1))
            try:
                resp = self._post(
                    self.config.endpoint, json=body, headers=headers,
                    timeout=self.config.timeout_s,
                )
            except requests.RequestException as e:
                last_error = e
                continue
            if resp.status_code in (429, 500, 502, 503, 504):
                last_error = BackendUnavailable(f"HTTP {resp.status_code}")
                continue
            if resp.status_code != 200:
                raise BackendUnavailable(f"HTTP {resp.status_code}: {resp.text[:200]}")
            try:
                data = resp.json()
                content = data["choices"][0]["message"]["content"]
            except (ValueError, LookupError, TypeError) as e:
                raise MalformedResponse(f"unexpected completion payload: {e}") from e
            if not isinstance(content, str) or not content:
                raise MalformedResponse("completion content empty or not text")
            return content
        raise BackendUnavailable(
            f"gave up after {self.config.max_retries + 1} attempts: {last_error}"
        )


def make_backend(config: BackendConfig, base_dir: str | Path = ".") -> ChatBackend:
    """Instantiate the single active backend described by the config."""
    if config.kind == "replay":
        fixture_dir = Path(config.fixture_dir)
        if not fixture_dir.is_absolute():
            fixture_dir = Path(base_dir) / fixture_dir
        return ReplayBackend(fixture_dir)
    return HttpBackend(config)
