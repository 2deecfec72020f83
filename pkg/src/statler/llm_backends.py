"""A uniform completion contract over scripted, record/replay and live backends.

Every backend exposes ``complete(request) -> CompletionResult``. Metrics and
agents never look at the concrete type, so any suite can run against any
backend. Results are truncated at the first stop sequence by every backend,
which keeps ``finish_reason == "stop"`` honest regardless of the source.
"""

from __future__ import annotations

import contextlib
import contextvars
import hashlib
import json
import os
import threading
import time
from dataclasses import asdict, dataclass
from datetime import datetime, timezone
from pathlib import Path
from typing import Any, Callable, Iterator, Mapping, Protocol, Sequence

import httpx

from .errors import BackendError, CacheMiss, HTTPStatusError, ScriptExhausted, TransportError

FINISH_REASONS = ("stop", "length", "error")
DEFAULT_MODEL = "text-davinci-003"


@dataclass(frozen=True)
class CompletionRequest:
    prompt: str
    stop_sequences: tuple[str, ...] = ()
    max_tokens: int = 512
    temperature: float = 0.0
    model_id: str = DEFAULT_MODEL

    def __post_init__(self) -> None:
        if not self.prompt:
            raise ValueError("prompt must be non-empty")
        if self.max_tokens <= 0:
            raise ValueError("max_tokens must be positive")
        if self.temperature < 0:
            raise ValueError("temperature must be non-negative")
        object.__setattr__(self, "stop_sequences", tuple(self.stop_sequences))
        object.__setattr__(self, "temperature", float(self.temperature))

    def to_json(self) -> dict[str, Any]:
        return {
            "prompt": self.prompt,
            "stop_sequences": list(self.stop_sequences),
            "max_tokens": self.max_tokens,
            "temperature": self.temperature,
            "model_id": self.model_id,
        }

    @classmethod
    def from_json(cls, doc: Mapping[str, Any]) -> "CompletionRequest":
        return cls(
            prompt=doc["prompt"],
            stop_sequences=tuple(doc.get("stop_sequences", ())),
            max_tokens=int(doc.get("max_tokens", 512)),
            temperature=float(doc.get("temperature", 0.0)),
            model_id=doc.get("model_id", DEFAULT_MODEL),
        )


@dataclass(frozen=True)
class CompletionResult:
    text: str
    finish_reason: str = "stop"
    latency_ms: int = 0
    backend_tag: str = ""

    def __post_init__(self) -> None:
        if self.finish_reason not in FINISH_REASONS:
            raise ValueError(f"unknown finish_reason {self.finish_reason!r}")

    def to_json(self) -> dict[str, Any]:
        return asdict(self)

    @classmethod
    def from_json(cls, doc: Mapping[str, Any]) -> "CompletionResult":
        return cls(text=doc["text"], finish_reason=doc.get("finish_reason", "stop"),
                   latency_ms=int(doc.get("latency_ms", 0)), backend_tag=doc.get("backend_tag", ""))


def canonical_request(req: CompletionRequest) -> str:
    """Canonical serialization: fixed field order, shortest round-trip floats."""
    return json.dumps(
        [req.model_id, req.prompt, list(req.stop_sequences), req.max_tokens, repr(req.temperature)],
        ensure_ascii=True,
        separators=(",", ":"),
    )


def request_digest(req: CompletionRequest) -> str:
    return hashlib.sha256(canonical_request(req).encode("ascii")).hexdigest()


def truncate_at_stop(text: str, stops: Sequence[str]) -> tuple[str, bool]:
    """Cut ``text`` at the earliest stop sequence; report whether one was found."""
    cut = min((i for i in (text.find(s) for s in stops if s) if i >= 0), default=-1)
    return (text[:cut], True) if cut >= 0 else (text, False)


class Backend(Protocol):
    tag: str

    def complete(self, req: CompletionRequest) -> CompletionResult: ...


def complete(backend: Backend, req: CompletionRequest) -> CompletionResult:
    """Run one completion and log it to the active transcript store, if any."""
    result = backend.complete(req)
    store = _active_store.get()
    if store is not None:
        ctx = _step_context.get()
        store.append(TranscriptEntry.create(req, result, ctx[0], ctx[1]))
    return result


# --------------------------------------------------------------------------
# transcripts

@dataclass(frozen=True)
class TranscriptEntry:
    digest: str
    request: CompletionRequest
    result: CompletionResult
    ts: str
    episode_id: str | None = None
    step_index: int | None = None

    @classmethod
    def create(cls, req: CompletionRequest, result: CompletionResult,
               episode_id: str | None = None, step_index: int | None = None) -> "TranscriptEntry":
        ts = datetime.now(timezone.utc).isoformat(timespec="milliseconds")
        return cls(request_digest(req), req, result, ts, episode_id, step_index)

    def to_json(self) -> dict[str, Any]:
        return {
            "digest": self.digest,
            "request": self.request.to_json(),
            "result": self.result.to_json(),
            "ts": self.ts,
            "episode_id": self.episode_id,
            "step_index": self.step_index,
        }

    @classmethod
    def from_json(cls, doc: Mapping[str, Any]) -> "TranscriptEntry":
        req = CompletionRequest.from_json(doc["request"])
        digest = doc.get("digest") or request_digest(req)
        if digest != request_digest(req):
            raise ValueError("digest does not match request")
        return cls(digest, req, CompletionResult.from_json(doc["result"]), doc.get("ts", ""),
                   doc.get("episode_id"), doc.get("step_index"))


class TranscriptStore:
    """Append-only JSONL transcript; appends are serialized and fsync'd."""

    def __init__(self, path: str | Path):
        self.path = Path(path)
        self._lock = threading.Lock()
        self._fh = open(self.path, "a", encoding="utf-8")

    def append(self, entry: TranscriptEntry) -> None:
        line = json.dumps(entry.to_json(), ensure_ascii=False, sort_keys=False) + "\n"
        with self._lock:
            self._fh.write(line)
            self._fh.flush()
            os.fsync(self._fh.fileno())

    def close(self) -> None:
        with self._lock:
            if not self._fh.closed:
                self._fh.close()

    def __enter__(self) -> "TranscriptStore":
        return self

    def __exit__(self, *exc: object) -> None:
        self.close()


def record_transcript(store: TranscriptStore, entry: TranscriptEntry) -> None:
    store.append(entry)


def read_transcript(path: str | Path) -> list[TranscriptEntry]:
    out = []
    for lineno, line in enumerate(Path(path).read_text(encoding="utf-8").splitlines(), start=1):
        if not line.strip():
            continue
        try:
            out.append(TranscriptEntry.from_json(json.loads(line)))
        except (ValueError, KeyError, TypeError) as err:
            raise BackendError(f"{path}:{lineno}: malformed transcript entry: {err}") from err
    return out


_active_store: contextvars.ContextVar[TranscriptStore | None] = contextvars.ContextVar(
    "statler_transcript_store", default=None)
_step_context: contextvars.ContextVar[tuple[str | None, int | None]] = contextvars.ContextVar(
    "statler_step_context", default=(None, None))


@contextlib.contextmanager
def transcript_to(store: TranscriptStore | None) -> Iterator[None]:
    """Log every :func:`complete` call made in this context to ``store``."""
    token = _active_store.set(store)
    try:
        yield
    finally:
        _active_store.reset(token)


@contextlib.contextmanager
def step_context(episode_id: str | None, step_index: int | None) -> Iterator[None]:
    token = _step_context.set((episode_id, step_index))
    try:
        yield
    finally:
        _step_context.reset(token)


# --------------------------------------------------------------------------
# scripted

@dataclass(frozen=True)
class ScriptEntry:
    """A queued response, served to the first request whose prompt it matches."""

    text: str
    prefix: str | None = None
    suffix: str | None = None
    contains: str | None = None

    def accepts(self, prompt: str) -> bool:
        return ((self.prefix is None or prompt.startswith(self.prefix))
                and (self.suffix is None or prompt.endswith(self.suffix))
                and (self.contains is None or self.contains in prompt))


class ScriptedBackend:
    """Deterministic oracle backend.

    Responses come from (in order of precedence) an exact digest table, a
    queue of matcher entries (the first accepting entry is consumed), or a
    callable ``fn(request) -> str``.
    """

    tag = "scripted"

    def __init__(self, entries: Sequence[ScriptEntry | str] = (), *,
                 by_digest: Mapping[str, str] | None = None,
                 fn: Callable[[CompletionRequest], str] | None = None):
        self._queue = [e if isinstance(e, ScriptEntry) else ScriptEntry(e) for e in entries]
        self._by_digest = dict(by_digest or {})
        self._fn = fn
        self._lock = threading.Lock()

    @classmethod
    def from_function(cls, fn: Callable[[CompletionRequest], str]) -> "ScriptedBackend":
        return cls(fn=fn)

    @property
    def remaining(self) -> int:
        return len(self._queue)

    def push(self, entry: ScriptEntry | str) -> None:
        with self._lock:
            self._queue.append(entry if isinstance(entry, ScriptEntry) else ScriptEntry(entry))

    def complete(self, req: CompletionRequest) -> CompletionResult:
        text = self._lookup(req)
        text, stopped = truncate_at_stop(text, req.stop_sequences)
        return CompletionResult(text, "stop", 0, self.tag)

    def _lookup(self, req: CompletionRequest) -> str:
        digest = request_digest(req)
        if digest in self._by_digest:
            return self._by_digest[digest]
        with self._lock:
            for i, entry in enumerate(self._queue):
                if entry.accepts(req.prompt):
                    return self._queue.pop(i).text
        if self._fn is not None:
            return self._fn(req)
        raise ScriptExhausted(f"no scripted response accepts request {digest[:12]}")


# --------------------------------------------------------------------------
# replay

class ReplayBackend:
    """Serve cached results by digest; in record mode, fill misses from ``inner``.

    Duplicate digests in a loaded cache resolve to the last entry.
    """

    tag = "replay"

    def __init__(self, cache: Mapping[str, CompletionResult] | None = None, *,
                 inner: Backend | None = None, record_to: TranscriptStore | None = None):
        self._cache: dict[str, CompletionResult] = dict(cache or {})
        self._inner = inner
        self._record_to = record_to
        self._lock = threading.Lock()

    @property
    def strict(self) -> bool:
        return self._inner is None

    def __len__(self) -> int:
        return len(self._cache)

    def complete(self, req: CompletionRequest) -> CompletionResult:
        digest = request_digest(req)
        with self._lock:
            hit = self._cache.get(digest)
        if hit is not None:
            return hit
        if self._inner is None:
            raise CacheMiss(digest)
        result = self._inner.complete(req)
        with self._lock:
            self._cache[digest] = result
        if self._record_to is not None:
            self._record_to.append(TranscriptEntry.create(req, result, *_step_context.get()))
        return result


def load_replay_cache(path: str | Path, *, inner: Backend | None = None,
                      record_to: TranscriptStore | None = None) -> ReplayBackend:
    """Build a replay backend from a transcript file (missing file -> empty cache)."""
    cache: dict[str, CompletionResult] = {}
    p = Path(path)
    if p.exists():
        for entry in read_transcript(p):
            cache[entry.digest] = entry.result
    elif inner is None:
        raise BackendError(f"replay cache {path} does not exist")
    return ReplayBackend(cache, inner=inner, record_to=record_to)


# --------------------------------------------------------------------------
# live

class LiveBackend:
    """HTTP completion client: POST {model, prompt, max_tokens, temperature, stop}."""

    tag = "live"
    RETRYABLE = frozenset({408, 409, 429, 500, 502, 503, 504})

    def __init__(self, url: str | None = None, api_key: str | None = None, *,
                 max_attempts: int = 5, backoff_s: float = 1.0, max_in_flight: int = 4,
                 timeout_s: float = 60.0, client: httpx.Client | None = None,
                 sleep: Callable[[float], None] = time.sleep):
        url = url or os.environ.get("STATLER_API_URL")
        if not url:
            raise BackendError("live backend needs a URL (set STATLER_API_URL)")
        self.url = url
        self.api_key = api_key if api_key is not None else os.environ.get("STATLER_API_KEY")
        self.max_attempts = max_attempts
        self.backoff_s = backoff_s
        self._client = client or httpx.Client(timeout=timeout_s)
        self._slots = threading.BoundedSemaphore(max_in_flight)
        self._sleep = sleep

    def payload(self, req: CompletionRequest) -> dict[str, Any]:
        return {"model": req.model_id, "prompt": req.prompt, "max_tokens": req.max_tokens,
                "temperature": req.temperature, "stop": list(req.stop_sequences)}

    def complete(self, req: CompletionRequest) -> CompletionResult:
        headers = {"Authorization": f"Bearer {self.api_key}"} if self.api_key else {}
        last: BackendError | None = None
        with self._slots:
            for attempt in range(self.max_attempts):
                if attempt:
                    self._sleep(self.backoff_s * 2 ** (attempt - 1))
                start = time.monotonic()
                try:
                    resp = self._client.post(self.url, json=self.payload(req), headers=headers)
                except httpx.HTTPError as err:
                    last = TransportError(f"{type(err).__name__}: {err}")
                    continue
                latency = int((time.monotonic() - start) * 1000)
                if resp.status_code != 200:
                    last = HTTPStatusError(resp.status_code, resp.text[:500])
                    if resp.status_code in self.RETRYABLE:
                        continue
                    raise last
                return self._parse(resp, req, latency)
        assert last is not None
        raise last

    def _parse(self, resp: httpx.Response, req: CompletionRequest, latency: int) -> CompletionResult:
        try:
            choice = resp.json()["choices"][0]
            text = choice["text"]
        except (ValueError, KeyError, IndexError, TypeError) as err:
            raise TransportError(f"unexpected response shape: {err}") from err
        text, stopped = truncate_at_stop(text, req.stop_sequences)
        reason = choice.get("finish_reason") or "stop"
        if stopped or reason not in FINISH_REASONS:
            reason = "stop"
        return CompletionResult(text, reason, latency, self.tag)

    def close(self) -> None:
        self._client.close()
