"""Chat-completion clients: a rate-limited HTTP endpoint and an offline mock.

Both expose complete(prompt, temperature, context) -> reply text. The context
mapping carries per-call identifiers (voter, format, run, attempt); the HTTP
client ignores it, the mock folds it into its seed so distinct runs can
differ while reruns stay byte-identical.
"""

from __future__ import annotations

import hashlib
import json
import random
import threading
import time
import urllib.error
import urllib.request
from dataclasses import dataclass
from typing import Callable, Mapping, Protocol

from repvote import BallotFormat, ElectionInstance

from .prompts import HarnessError


class EndpointError(HarnessError):
    pass


class TransientEndpointError(EndpointError):
    """Worth retrying: rate limits, 5xx, connection resets."""


RETRYABLE_STATUS = (429, 500, 502, 503, 504)


class Endpoint(Protocol):
    def complete(
        self, prompt: str, temperature: float, context: Mapping[str, object]
    ) -> str: ...


@dataclass(frozen=True)
class EndpointConfig:
    base_url: str
    model: str
    api_key: str | None = None
    timeout: float = 60.0
    max_retries: int = 4
    backoff_base: float = 0.5
    requests_per_second: float = 0.0
    max_concurrency: int = 4

    def __post_init__(self) -> None:
        if self.max_retries < 0:
            raise ValueError("max_retries must be >= 0")
        if self.requests_per_second < 0:
            raise ValueError("requests_per_second must be >= 0")
        if self.max_concurrency < 1:
            raise ValueError("max_concurrency must be >= 1")


class ChatEndpoint:
    """POSTs to <base_url>/chat/completions, retrying transient failures.

    ``transport`` and the clock hooks exist for tests; the default transport
    speaks the common chat-completion JSON shape over urllib.
    """

    def __init__(
        self,
        config: EndpointConfig,
        transport: Callable[[dict], dict] | None = None,
        sleep: Callable[[float], None] = time.sleep,
        clock: Callable[[], float] = time.monotonic,
    ) -> None:
        self._config = config
        self._transport = transport or self._http_transport
        self._sleep = sleep
        self._clock = clock
        self._lock = threading.Lock()
        self._next_slot = 0.0

    def complete(
        self, prompt: str, temperature: float, context: Mapping[str, object]
    ) -> str:
        payload = {
            "model": self._config.model,
            "messages": [{"role": "user", "content": prompt}],
            "temperature": temperature,
        }
        attempts = self._config.max_retries + 1
        for attempt in range(attempts):
            self._throttle()
            try:
                return self._extract(self._transport(payload))
            except TransientEndpointError as exc:
                if attempt == attempts - 1:
                    raise EndpointError(f"gave up after {attempts} attempts: {exc}")
                self._sleep(self._config.backoff_base * 2**attempt)
        raise AssertionError("unreachable")

    def _throttle(self) -> None:
        if self._config.requests_per_second <= 0:
            return
        interval = 1.0 / self._config.requests_per_second
        with self._lock:
            now = self._clock()
            wait = self._next_slot - now
            self._next_slot = max(now, self._next_slot) + interval
        if wait > 0:
            self._sleep(wait)

    @staticmethod
    def _extract(response: dict) -> str:
        try:
            content = response["choices"][0]["message"]["content"]
        except (KeyError, IndexError, TypeError):
            raise EndpointError(f"unexpected response shape: {response!r:.200}")
        if not isinstance(content, str):
            raise EndpointError("response content is not text")
        return content

    def _http_transport(self, payload: dict) -> dict:
        url = self._config.base_url.rstrip("/") + "/chat/completions"
        headers = {"Content-Type": "application/json"}
        if self._config.api_key:
            headers["Authorization"] = f"Bearer {self._config.api_key}"
        request = urllib.request.Request(
            url, data=json.dumps(payload).encode("utf-8"), headers=headers
        )
        try:
            with urllib.request.urlopen(request, timeout=self._config.timeout) as resp:
                return json.loads(resp.read().decode("utf-8"))
        except urllib.error.HTTPError as exc:
            if exc.code in RETRYABLE_STATUS:
                raise TransientEndpointError(f"HTTP {exc.code}")
            raise EndpointError(f"HTTP {exc.code}: {exc.reason}")
        except urllib.error.URLError as exc:
            raise TransientEndpointError(f"connection failed: {exc.reason}")
        except json.JSONDecodeError as exc:
            raise EndpointError(f"response is not JSON: {exc}")


class MockEndpoint:
    """Offline replies derived from stable hashes; no network, no state.

    Replies are valid "project_id:points" lists for the instance, varying
    with (prompt, temperature, run, attempt). ``malformed_rate`` injects
    unparseable replies deterministically, for exercising the rejects path.
    """

    def __init__(self, instance: ElectionInstance, malformed_rate: float = 0.0) -> None:
        if not 0 <= malformed_rate <= 1:
            raise ValueError("malformed_rate must be in [0, 1]")
        self._instance = instance
        self._malformed_rate = malformed_rate

    def complete(
        self, prompt: str, temperature: float, context: Mapping[str, object]
    ) -> str:
        key = json.dumps(
            {
                "prompt": hashlib.sha256(prompt.encode("utf-8")).hexdigest(),
                "temperature": temperature,
                "run": context.get("run_index"),
                "attempt": context.get("attempt"),
            },
            sort_keys=True,
        )
        digest = hashlib.sha256(key.encode("utf-8")).digest()
        rng = random.Random(int.from_bytes(digest[:8], "big"))
        if rng.random() < self._malformed_rate:
            ids = self._instance.project_ids
            return f"I like {ids[0]} and maybe {ids[-1]}"
        fmt = BallotFormat.parse(str(context["format"]))
        return self._render(fmt, rng)

    def _render(self, fmt: BallotFormat, rng: random.Random) -> str:
        instance = self._instance
        ids = list(instance.project_ids)
        if fmt is BallotFormat.SINGLE:
            entries = {rng.choice(ids): 1}
        elif fmt is BallotFormat.APPROVAL:
            chosen = rng.sample(ids, rng.randint(1, len(ids)))
            entries = {pid: 1 for pid in sorted(chosen, key=ids.index)}
        elif fmt is BallotFormat.SCORE:
            entries = {pid: rng.randint(1, instance.score_max) for pid in ids}
        else:
            most = min(len(ids), instance.cumulative_points)
            count = rng.randint(min(instance.cumulative_min_projects, most), most)
            chosen = sorted(rng.sample(ids, count), key=ids.index)
            points = [1] * count
            for _ in range(instance.cumulative_points - count):
                points[rng.randrange(count)] += 1
            entries = dict(zip(chosen, points))
        return ", ".join(f"{pid}:{weight}" for pid, weight in entries.items())
