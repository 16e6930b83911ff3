"""Chat-completion client with record/replay fixtures."""

from __future__ import annotations

import hashlib
import json
import os
import threading
import time
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Callable

import httpx

LIVE, RECORD, REPLAY = "live", "record", "replay"
MODES = (LIVE, RECORD, REPLAY)
DEFAULT_ENDPOINT = "https://api.openai.com/v1/chat/completions"
API_KEY_ENV = "OPTEVAL_API_KEY"
BACKOFF = (1.0, 2.0, 4.0)

MODEL_IDS = {
    "deepseek": "deepseek-math-7b-instruct",
    "llama": "meta-llama/Llama-3.1-8B-Instruct",
    "gpt5": "gpt-5",
}


@dataclass(frozen=True)
class ModelConfig:
    model: str
    temperature: float = 0.1
    max_tokens: int = 800
    endpoint: str = DEFAULT_ENDPOINT
    mode: str = REPLAY

    def __post_init__(self):
        if self.mode not in MODES:
            raise ValueError(f"unknown mode {self.mode!r}")


@dataclass(frozen=True)
class Telemetry:
    latency_ms: float = 0.0
    input_tokens: int | None = 0
    output_tokens: int | None = 0

    def __add__(self, other: "Telemetry") -> "Telemetry":
        def add(a, b):
            return None if a is None or b is None else a + b

        return Telemetry(
            self.latency_ms + other.latency_ms,
            add(self.input_tokens, other.input_tokens),
            add(self.output_tokens, other.output_tokens),
        )


@dataclass(frozen=True)
class Completion:
    text: str
    telemetry: Telemetry


@dataclass
class Transcript:
    messages: list[dict] = field(default_factory=list)
    steps: list[Completion] = field(default_factory=list)

    @property
    def text(self) -> str:
        return self.steps[-1].text if self.steps else ""

    @property
    def telemetry(self) -> Telemetry:
        total = Telemetry()
        for s in self.steps:
            total = total + s.telemetry
        return total


class GatewayError(RuntimeError):
    def __init__(self, message: str, step: int | None = None, transcript: Transcript | None = None):
        super().__init__(message if step is None else f"step {step}: {message}")
        self.step = step
        self.transcript = transcript


class MissingFixtureError(GatewayError):
    def __init__(self, key: str, model: str):
        super().__init__(f"no replay fixture {key} for model {model}")
        self.key = key


class HttpStatusError(GatewayError):
    def __init__(self, status: int, body: str):
        super().__init__(f"HTTP {status}: {body[:200]}")
        self.status = status


def request_key(model: str, messages: list[dict]) -> str:
    payload = json.dumps({"model": model, "messages": messages}, sort_keys=True,
                         separators=(",", ":"), ensure_ascii=False)
    return hashlib.sha256(payload.encode("utf-8")).hexdigest()


def model_dir(model: str) -> str:
    return model.replace("/", "__")


class FixtureStore:
    """One JSON file per exchange under ``<root>/<model>/<hash>.json``."""

    def __init__(self, root: Path | str):
        self.root = Path(root)
        self._write_lock = threading.Lock()

    def path(self, model: str, key: str) -> Path:
        return self.root / model_dir(model) / f"{key}.json"

    def load(self, model: str, messages: list[dict]) -> dict:
        key = request_key(model, messages)
        p = self.path(model, key)
        if not p.is_file():
            raise MissingFixtureError(key, model)
        return json.loads(p.read_text(encoding="utf-8"))

    def save(self, model: str, messages: list[dict], text: str, tel: Telemetry,
             recorded: str | None = None) -> Path:
        key = request_key(model, messages)
        doc = {
            "key": key,
            "model": model,
            "messages": messages,
            "response": text,
            "input_tokens": tel.input_tokens,
            "output_tokens": tel.output_tokens,
            "latency_ms": tel.latency_ms,
            "recorded": recorded or time.strftime("%Y-%m-%dT%H:%M:%SZ", time.gmtime()),
        }
        p = self.path(model, key)
        with self._write_lock:
            p.parent.mkdir(parents=True, exist_ok=True)
            tmp = p.with_suffix(".tmp")
            tmp.write_text(json.dumps(doc, indent=2, ensure_ascii=False) + "\n", encoding="utf-8")
            tmp.replace(p)
        return p


class TokenBucket:
    def __init__(self, rate: float, capacity: float, clock=time.monotonic, sleep=time.sleep):
        self.rate = rate
        self.capacity = capacity
        self.tokens = capacity
        self.clock = clock
        self.sleep = sleep
        self.stamp = clock()
        self.lock = threading.Lock()

    def acquire(self) -> None:
        while True:
            with self.lock:
                now = self.clock()
                self.tokens = min(self.capacity, self.tokens + (now - self.stamp) * self.rate)
                self.stamp = now
                if self.tokens >= 1:
                    self.tokens -= 1
                    return
                wait = (1 - self.tokens) / self.rate
            self.sleep(wait)


class Gateway:
    def __init__(
        self,
        store: FixtureStore | None = None,
        *,
        api_key: str | None = None,
        max_in_flight: int = 2,
        rate_per_s: float = 2.0,
        sleep: Callable[[float], None] = time.sleep,
        timeout: float = 120.0,
        transport: httpx.BaseTransport | None = None,
    ):
        self.store = store
        self.api_key = api_key if api_key is not None else os.environ.get(API_KEY_ENV)
        self.sleep = sleep
        self.timeout = timeout
        self.transport = transport
        self._slots = threading.Semaphore(max_in_flight)
        self._bucket = TokenBucket(rate_per_s, max(1.0, rate_per_s), sleep=sleep)

    def complete(self, cfg: ModelConfig, messages: list[dict]) -> Completion:
        if cfg.mode == REPLAY:
            if self.store is None:
                raise GatewayError("replay mode needs a fixture store")
            doc = self.store.load(cfg.model, messages)
            tel = Telemetry(float(doc["latency_ms"]), doc.get("input_tokens"), doc.get("output_tokens"))
            return Completion(doc["response"], tel)
        result = self._live(cfg, messages)
        if cfg.mode == RECORD:
            if self.store is None:
                raise GatewayError("record mode needs a fixture store")
            self.store.save(cfg.model, messages, result.text, result.telemetry)
        return result

    def _live(self, cfg: ModelConfig, messages: list[dict]) -> Completion:
        body = {
            "model": cfg.model,
            "messages": messages,
            "temperature": cfg.temperature,
            "max_tokens": cfg.max_tokens,
        }
        headers = {"Content-Type": "application/json"}
        if self.api_key:
            headers["Authorization"] = f"Bearer {self.api_key}"
        last: Exception | None = None
        for attempt in range(len(BACKOFF) + 1):
            if attempt:
                self.sleep(BACKOFF[attempt - 1])
            self._bucket.acquire()
            with self._slots:
                try:
                    with httpx.Client(timeout=self.timeout, transport=self.transport) as client:
                        start = time.perf_counter()
                        resp = client.post(cfg.endpoint, json=body, headers=headers)
                        latency = (time.perf_counter() - start) * 1000.0
                except httpx.TransportError as exc:
                    last = exc
                    continue
            if 400 <= resp.status_code < 500:
                raise HttpStatusError(resp.status_code, resp.text)
            if resp.status_code >= 500:
                last = HttpStatusError(resp.status_code, resp.text)
                continue
            return _parse_response(resp.json(), latency)
        raise GatewayError(f"request failed after {len(BACKOFF) + 1} attempts: {last}")

    def run_multistep(self, cfg: ModelConfig, steps: list[str]) -> Transcript:
        """Send each step with the previous exchanges as context."""
        transcript = Transcript()
        for k, content in enumerate(steps, start=1):
            messages = transcript.messages + [{"role": "user", "content": content}]
            try:
                result = self.complete(cfg, messages)
            except GatewayError as exc:
                err = GatewayError(str(exc), step=k, transcript=transcript)
                if isinstance(exc, MissingFixtureError):
                    err.key = exc.key
                raise err from exc
            transcript.messages = messages + [{"role": "assistant", "content": result.text}]
            transcript.steps.append(result)
        return transcript


def _parse_response(doc: dict, latency_ms: float) -> Completion:
    try:
        choice = doc["choices"][0]
    except (KeyError, IndexError, TypeError):
        raise GatewayError("response has no choices") from None
    if isinstance(choice.get("message"), dict):
        text = choice["message"].get("content") or ""
    else:
        text = choice.get("text") or ""
    usage = doc.get("usage") or {}
    return Completion(
        text,
        Telemetry(latency_ms, usage.get("prompt_tokens"), usage.get("completion_tokens")),
    )


def with_mode(cfg: ModelConfig, mode: str) -> ModelConfig:
    return replace(cfg, mode=mode)
