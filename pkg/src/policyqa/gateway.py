"""Completion backends behind one interface.

Three interchangeable backends: ``remote`` speaks an HTTP chat-completion
API, ``replay`` serves recorded responses keyed by a 64-bit hash of the
rendered prompt, and ``echo`` just reflects the question segment back so
upstream modules can be tested with no fixture at all.  Callers cannot tell
them apart except by the backend tag on the response.
"""

from __future__ import annotations

import base64
import logging
import re
import time
from dataclasses import dataclass
from pathlib import Path

import requests

from .errors import (
    AuthFailure,
    FixtureWriteError,
    GatewayError,
    RateLimited,
    ReplayMiss,
    Timeout,
    ValidationError,
)

log = logging.getLogger(__name__)

FNV_OFFSET = 14695981039346656037
FNV_PRIME = 1099511628211
_MASK64 = (1 << 64) - 1

MAX_ATTEMPTS = 3  # 1 request + 2 retries
DEFAULT_BACKOFF_S = (1.0, 2.0)


def prompt_hash(prompt: str) -> str:
    """FNV-1a (64 bit) over the exact prompt bytes, as 16 hex chars."""
    h = FNV_OFFSET
    for b in prompt.encode("utf-8"):
        h ^= b
        h = (h * FNV_PRIME) & _MASK64
    return f"{h:016x}"


@dataclass
class LlmRequest:
    prompt: str
    model_id: str = "gpt-3.5-turbo"
    temperature: float = 0.0
    max_output_tokens: int = 512


@dataclass
class LlmResponse:
    text: str
    prompt_hash: str
    backend: str
    latency_ms: int


class ReplayFixture:
    """Recorded responses, one `prompt_hash<TAB>base64(text)` line per entry."""

    def __init__(self, path: str | Path | None = None) -> None:
        self.path = Path(path) if path else None
        self._entries: dict[str, str] = {}
        if self.path and self.path.exists():
            self._load()

    def _load(self) -> None:
        with open(self.path, encoding="utf-8") as fh:
            for ln, line in enumerate(fh, start=1):
                line = line.rstrip("\n")
                if not line.strip():
                    continue
                key, sep, packed = line.partition("\t")
                if not sep:
                    raise ValidationError(f"{self.path}:{ln}: expected hash<TAB>base64")
                self._entries[key] = base64.b64decode(packed).decode("utf-8")

    def __len__(self) -> int:
        return len(self._entries)

    def __contains__(self, key: str) -> bool:
        return key in self._entries

    def get(self, key: str) -> str | None:
        return self._entries.get(key)

    def record(self, key: str, text: str) -> None:
        self._entries[key] = text

    def save(self, path: str | Path | None = None) -> None:
        target = Path(path) if path else self.path
        if target is None:
            raise FixtureWriteError("no fixture path configured")
        try:
            with open(target, "w", encoding="utf-8") as fh:
                for key, text in self._entries.items():
                    packed = base64.b64encode(text.encode("utf-8")).decode("ascii")
                    fh.write(f"{key}\t{packed}\n")
        except OSError as exc:
            raise FixtureWriteError(str(exc)) from exc


class EchoBackend:
    """Reflects the question segment of the prompt; for tests only."""

    name = "echo"

    _QUOTED = re.compile(r"'([^']*)'")

    def complete_text(self, request: LlmRequest) -> str:
        m = self._QUOTED.search(request.prompt)
        return m.group(1) if m else request.prompt


class ReplayBackend:
    name = "replay"

    def __init__(self, fixture: ReplayFixture) -> None:
        self.fixture = fixture

    def complete_text(self, request: LlmRequest) -> str:
        key = prompt_hash(request.prompt)
        text = self.fixture.get(key)
        if text is None:
            raise ReplayMiss(f"no recorded response for prompt hash {key}")
        return text


class RemoteBackend:
    """Chat-completion API client: one user message, bounded retries."""

    name = "remote"

    def __init__(
        self,
        endpoint_url: str,
        api_key: str = "",
        timeout_s: float = 30.0,
        backoff_s: tuple[float, ...] = DEFAULT_BACKOFF_S,
        session: requests.Session | None = None,
        sleep=time.sleep,
    ) -> None:
        self.endpoint_url = endpoint_url
        self.api_key = api_key
        self.timeout_s = timeout_s
        self.backoff_s = backoff_s
        self.session = session or requests.Session()
        self._sleep = sleep

    def complete_text(self, request: LlmRequest) -> str:
        headers = {"Content-Type": "application/json"}
        if self.api_key:
            headers["Authorization"] = f"Bearer {self.api_key}"
        body = {
            "model": request.model_id,
            "messages": [{"role": "user", "content": request.prompt}],
            "temperature": request.temperature,
            "max_tokens": request.max_output_tokens,
        }
        last_kind = None
        for attempt in range(MAX_ATTEMPTS):
            if attempt:
                self._sleep(self.backoff_s[min(attempt - 1, len(self.backoff_s) - 1)])
            try:
                resp = self.session.post(
                    self.endpoint_url, json=body, headers=headers, timeout=self.timeout_s
                )
            except requests.Timeout:
                last_kind = "timeout"
                log.warning("completion timeout, attempt %d", attempt + 1)
                continue
            except requests.RequestException as exc:
                raise GatewayError(str(exc)) from exc
            if resp.status_code in (401, 403):
                raise AuthFailure(f"API returned {resp.status_code}")
            if resp.status_code == 429 or resp.status_code >= 500:
                last_kind = "rate" if resp.status_code == 429 else "server"
                log.warning("completion got %d, attempt %d", resp.status_code, attempt + 1)
                continue
            try:
                payload = resp.json()
                return payload["choices"][0]["message"]["content"]
            except (ValueError, KeyError, IndexError, TypeError) as exc:
                raise GatewayError(f"unexpected response shape: {exc}") from exc
        if last_kind == "timeout":
            raise Timeout(f"gave up after {MAX_ATTEMPTS} attempts")
        raise RateLimited(f"gave up after {MAX_ATTEMPTS} attempts ({last_kind})")


def complete(request: LlmRequest, backend) -> LlmResponse:
    """Run one completion and stamp it with hash, backend tag, and latency."""
    if not request.prompt:
        raise ValidationError("prompt must be non-empty")
    started = time.monotonic()
    text = backend.complete_text(request)
    latency_ms = int((time.monotonic() - started) * 1000)
    return LlmResponse(
        text=text,
        prompt_hash=prompt_hash(request.prompt),
        backend=backend.name,
        latency_ms=latency_ms,
    )


def record_fixture(request: LlmRequest, response_text: str, fixture: ReplayFixture) -> ReplayFixture:
    """Store a response so replaying the same prompt returns it."""
    fixture.record(prompt_hash(request.prompt), response_text)
    return fixture
