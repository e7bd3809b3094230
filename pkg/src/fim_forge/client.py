"""Client for OpenAI-compatible chat-completions endpoints.

Defaults follow the evaluation setup: greedy decoding (temperature 0,
single sample) and a 512-token output budget.  Transient failures (429,
5xx, timeouts) are retried with exponential backoff and full jitter;
other 4xx responses fail immediately.
"""

import json
import logging
import os
import random
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import requests

log = logging.getLogger(__name__)

__all__ = [
    "API_KEY_ENV_VAR",
    "CompletionError",
    "GenRequest",
    "GenResponse",
    "LlmClient",
]

API_KEY_ENV_VAR = "FIM_FORGE_API_KEY"

_RETRYABLE_STATUSES = frozenset({429, 500, 502, 503, 504})


class CompletionError(RuntimeError):
    """Raised when a request exhausts its retries or the reply is unusable."""

    def __init__(self, message: str, status: int | None = None):
        super().__init__(message)
        self.status = status


@dataclass(frozen=True)
class GenRequest:
    model: str
    prompt: str
    max_tokens: int = 512
    temperature: float = 0.0
    stop: tuple[str, ...] | None = None

    def __post_init__(self) -> None:
        if self.max_tokens < 1:
            raise ValueError("max_tokens must be >= 1")
        if self.temperature < 0:
            raise ValueError("temperature must be >= 0")


@dataclass(frozen=True)
class GenResponse:
    text: str
    finish_reason: str  # stop | length | error
    latency_ms: float


@dataclass
class LlmClient:
    """Synchronous client, shareable across worker threads.

    ``endpoint`` is the API base URL (``.../v1``); the chat-completions
    path is appended unless the endpoint already names it.  The API key
    falls back to the ``FIM_FORGE_API_KEY`` environment variable.
    """

    endpoint: str
    api_key: str | None = None
    max_retries: int = 3
    backoff_base_s: float = 0.5
    timeout_s: float = 60.0
    _rng: random.Random = field(default_factory=random.Random, repr=False)

    @property
    def url(self) -> str:
        base = self.endpoint.rstrip("/")
        if base.endswith("completions"):
            return base
        return base + "/chat/completions"

    def _headers(self) -> dict[str, str]:
        key = self.api_key or os.environ.get(API_KEY_ENV_VAR)
        headers = {"Content-Type": "application/json"}
        if key:
            headers["Authorization"] = f"Bearer {key}"
        return headers

    def complete(self, req: GenRequest) -> GenResponse:
        """Run one request; raises :class:`CompletionError` on failure."""
        payload: dict = {
            "model": req.model,
            "messages": [{"role": "user", "content": req.prompt}],
            "max_tokens": req.max_tokens,
            "temperature": req.temperature,
        }
        if req.stop:
            payload["stop"] = list(req.stop)
        started = time.perf_counter()
        last_error = "request not attempted"
        last_status: int | None = None
        for attempt in range(self.max_retries + 1):
            if attempt:
                delay = self.backoff_base_s * (2 ** (attempt - 1)) * self._rng.random()
                time.sleep(delay)
            if log.isEnabledFor(logging.DEBUG):
                # payload only; auth material lives in headers and is never logged
                log.debug(
                    "POST %s attempt=%d payload=%.2000s",
                    self.url,
                    attempt + 1,
                    json.dumps(payload, ensure_ascii=False),
                )
            try:
                response = requests.post(
                    self.url,
                    json=payload,
                    headers=self._headers(),
                    timeout=self.timeout_s,
                )
            except requests.RequestException as exc:
                last_error, last_status = f"transport error: {exc}", None
                continue
            last_status = response.status_code
            log.debug("response status=%d body=%.2000s", response.status_code, response.text)
            if response.status_code in _RETRYABLE_STATUSES:
                last_error = f"retryable status {response.status_code}"
                continue
            if response.status_code != 200:
                raise CompletionError(
                    f"endpoint returned {response.status_code}",
                    status=response.status_code,
                )
            latency_ms = (time.perf_counter() - started) * 1000.0
            return self._parse_body(response, latency_ms)
        raise CompletionError(
            f"gave up after {self.max_retries + 1} attempts: {last_error}",
            status=last_status,
        )

    @staticmethod
    def _parse_body(response: requests.Response, latency_ms: float) -> GenResponse:
        try:
            data = response.json()
            choice = data["choices"][0]
            if "message" in choice:
                text = choice["message"]["content"]
            else:
                text = choice["text"]
            finish = choice.get("finish_reason") or "stop"
        except (ValueError, LookupError, TypeError) as exc:
            raise CompletionError(f"malformed response body: {exc}", status=200) from exc
        if finish not in ("stop", "length"):
            finish = "stop"
        return GenResponse(text=text, finish_reason=finish, latency_ms=latency_ms)

    def complete_batch(
        self, reqs: list[GenRequest], max_in_flight: int
    ) -> list[GenResponse]:
        """Run requests with bounded concurrency, preserving order.

        Per-request failures land in their slot as ``finish_reason=error``
        responses; the batch itself never aborts.
        """
        if max_in_flight < 1:
            raise ValueError("max_in_flight must be >= 1")

        def run(req: GenRequest) -> GenResponse:
            started = time.perf_counter()
            try:
                return self.complete(req)
            except CompletionError as exc:
                log.debug("request failed: %s", exc)
                return GenResponse(
                    text="",
                    finish_reason="error",
                    latency_ms=(time.perf_counter() - started) * 1000.0,
                )

        with ThreadPoolExecutor(max_workers=max_in_flight) as pool:
            return list(pool.map(run, reqs))
