"""Model backends: HTTP clients for remote stages plus in-process mocks.

All model inference sits behind two tiny JSON-over-HTTP calls, one per
stage kind:

    POST {base}/v1/generate      {"id", "prompt", "temperature", "top_p",
                                  "max_new_tokens"}      -> {"id", "text"}
    POST {base}/v1/label_tokens  {"id", "text"}          -> {"id", "tokens":
                                  [{"start", "end", "label"}, ...]}

Offsets in labeling replies index Unicode scalar values of the request
text.  Errors arrive as non-2xx with an {"error": ...} body.  The mocks
implement the same in-process interfaces without sockets; everything
they emit is a pure function of (seed, instance id), so runs repeat
byte for byte.
"""

from __future__ import annotations

import hashlib
import os
import random
import threading
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Callable, Iterable, Mapping, Protocol, Sequence, TypeVar

import httpx

from .align import TokenSpanLabel
from .corpus import InstanceId, MixedTextInstance, tokenize_words, word_strings
from .decoder_post import BREAK_TOKEN
from .errors import (
    BackendError,
    BackendExhaustedError,
    BackendPayloadError,
    BackendRequestError,
    ConfigError,
    IdMismatchError,
)

AUTH_TOKEN_ENV = "TEXTSEAM_AUTH_TOKEN"


@dataclass(frozen=True)
class GenParams:
    """Sampling parameters forwarded to the generation stage."""

    temperature: float = 1.0
    top_p: float = 1.0
    max_new_tokens: int = 512

    def __post_init__(self) -> None:
        if self.temperature < 0:
            raise ConfigError(f"temperature {self.temperature} is negative")
        if not 0 < self.top_p <= 1:
            raise ConfigError(f"top_p {self.top_p} outside (0, 1]")
        if self.max_new_tokens < 1:
            raise ConfigError(f"max_new_tokens {self.max_new_tokens} < 1")


@dataclass(frozen=True)
class BackendEndpoint:
    """Connection settings for one remote stage."""

    base_url: str
    timeout: float = 30.0
    max_in_flight: int = 4
    retry_budget: int = 2
    backoff_base: float = 0.25
    auth_token: str | None = None

    def __post_init__(self) -> None:
        if not self.base_url:
            raise ConfigError("base_url must be non-empty")
        if self.timeout <= 0:
            raise ConfigError(f"timeout {self.timeout} must be positive")
        if self.max_in_flight < 1:
            raise ConfigError(f"max_in_flight {self.max_in_flight} < 1")
        if self.retry_budget < 0:
            raise ConfigError(f"retry_budget {self.retry_budget} is negative")
        if self.backoff_base < 0:
            raise ConfigError(f"backoff_base {self.backoff_base} is negative")

    def resolved_auth_token(self) -> str | None:
        return self.auth_token or os.environ.get(AUTH_TOKEN_ENV) or None


class GenerationBackend(Protocol):
    """A generation stage: prompt in, raw reply text out."""

    name: str

    def generate(self, instance_id: InstanceId, prompt: str, params: GenParams) -> str:
        ...


@dataclass
class BackendStats:
    requests: int = 0
    retries: int = 0
    failures: int = 0


def _rng_for(seed: int, stage: str, instance_id: InstanceId) -> random.Random:
    digest = hashlib.sha256(f"{seed}:{stage}:{instance_id}".encode("utf-8")).digest()
    return random.Random(int.from_bytes(digest[:8], "big"))


def _gold_for(corpus: Mapping[InstanceId, MixedTextInstance], instance_id: InstanceId) -> tuple[MixedTextInstance, int]:
    inst = corpus.get(instance_id)
    if inst is None or inst.gold_boundary is None:
        raise IdMismatchError("oracle backend has no gold boundary for instance", [instance_id])
    return inst, inst.gold_boundary


class OracleGenerationBackend:
    """Mock generation that replies with the true machine suffix."""

    def __init__(self, instances: Iterable[MixedTextInstance], name: str = "oracle-generation"):
        self.name = name
        self._corpus = {i.id: i for i in instances}

    def generate(self, instance_id: InstanceId, prompt: str, params: GenParams) -> str:
        inst, gold = _gold_for(self._corpus, instance_id)
        words = word_strings(inst.text)
        if gold >= len(words):
            return "Answer: None"
        return "Answer: " + " ".join(words[gold:])


_GARBAGE_SHAPES = (
    "",
    "I cannot determine that.",
    "answer",
    "Answer:",
    "The text appears to be entirely consistent in style throughout.",
    "Sure! Here are some thoughts on the text you provided. It reads fine.",
    "{words}",
    "Answer: {words}",
)


class GarbageGenerationBackend:
    """Mock generation that replies with deterministic junk.

    Exercises the unparseable and fallback alignment paths: replies are
    unrelated prose, bare markers, empty strings, or word soup that never
    matches the input text.
    """

    def __init__(self, seed: int, name: str = "garbage-generation"):
        self.name = name
        self._seed = seed

    def generate(self, instance_id: InstanceId, prompt: str, params: GenParams) -> str:
        rng = _rng_for(self._seed, "garbage", instance_id)
        shape = rng.choice(_GARBAGE_SHAPES)
        if "{words}" in shape:
            soup = " ".join(f"zz{rng.randrange(1000)}" for _ in range(rng.randint(3, 12)))
            return shape.format(words=soup)
        return shape


def _chunk_spans(start: int, end: int, rng: random.Random) -> list[tuple[int, int]]:
    # Pseudo-subword pieces of 1..4 characters covering [start, end).
    spans = []
    at = start
    while at < end:
        step = min(rng.randint(1, 4), end - at)
        spans.append((at, at + step))
        at += step
    return spans


def _marker_free_positions(text: str) -> list[tuple[int, int, int, bool]]:
    # Per word: (start, end, marker-free index, is_marker).  The marker
    # itself borrows the index of the word that follows it.
    out = []
    free_index = 0
    for w in tokenize_words(text):
        is_marker = text[w.start:w.end] == BREAK_TOKEN
        out.append((w.start, w.end, free_index, is_marker))
        if not is_marker:
            free_index += 1
    return out


class OracleTokenLabeler:
    """Mock labeler that chunks words into pieces and labels them by gold.

    Inputs may carry a ``<BREAK>`` marker; labels are decided by each
    word's marker-free index against the instance's gold boundary, so the
    marker's position never influences the labels.
    """

    def __init__(self, instances: Iterable[MixedTextInstance], seed: int = 0, name: str = "oracle-labeler"):
        self.name = name
        self._corpus = {i.id: i for i in instances}
        self._seed = seed

    def _boundary_for(self, instance_id: InstanceId, text: str) -> int:
        _, gold = _gold_for(self._corpus, instance_id)
        return gold

    def label_tokens(self, instance_id: InstanceId, text: str) -> list[TokenSpanLabel]:
        boundary = self._boundary_for(instance_id, text)
        rng = _rng_for(self._seed, "label", instance_id)
        tokens: list[TokenSpanLabel] = []
        for start, end, free_index, _ in _marker_free_positions(text):
            label = 1 if free_index >= boundary else 0
            for s, e in _chunk_spans(start, end, rng):
                tokens.append(TokenSpanLabel(start=s, end=e, label=label))
        return tokens


class NoisyOracleTokenLabeler(OracleTokenLabeler):
    """Oracle labeler whose boundary is shifted by a bounded random offset.

    The offset is uniform over [-deviation, +deviation], drawn per
    (seed, instance id) and clamped into the valid boundary range, so two
    labelers with different seeds disagree instance by instance while
    each stays deterministic.
    """

    def __init__(
        self,
        instances: Iterable[MixedTextInstance],
        deviation: int,
        seed: int = 0,
        name: str = "noisy-oracle-labeler",
    ):
        super().__init__(instances, seed=seed, name=name)
        if deviation < 0:
            raise ConfigError(f"deviation {deviation} is negative")
        self.deviation = deviation

    def _boundary_for(self, instance_id: InstanceId, text: str) -> int:
        inst, gold = _gold_for(self._corpus, instance_id)
        rng = _rng_for(self._seed, "noise", instance_id)
        offset = rng.randint(-self.deviation, self.deviation)
        return min(max(gold + offset, 0), inst.word_count())


class ConstantTokenLabeler:
    """Mock labeler that gives every token the same label."""

    def __init__(self, label: int, name: str = "constant-labeler"):
        if label not in (0, 1):
            raise ConfigError(f"constant label must be 0 or 1, got {label}")
        self.name = name
        self._label = label

    def label_tokens(self, instance_id: InstanceId, text: str) -> list[TokenSpanLabel]:
        rng = _rng_for(0, "constant", instance_id)
        tokens = []
        for w in tokenize_words(text):
            for s, e in _chunk_spans(w.start, w.end, rng):
                tokens.append(TokenSpanLabel(start=s, end=e, label=self._label))
        return tokens


class _HttpStage:
    """Shared request/retry machinery for the two HTTP stage clients."""

    def __init__(self, endpoint: BackendEndpoint, name: str):
        self.name = name
        self.endpoint = endpoint
        self.stats = BackendStats()
        self._lock = threading.Lock()
        headers = {}
        token = endpoint.resolved_auth_token()
        if token:
            headers["Authorization"] = f"Bearer {token}"
        self._client = httpx.Client(
            base_url=endpoint.base_url, timeout=endpoint.timeout, headers=headers
        )

    def close(self) -> None:
        self._client.close()

    def _count(self, *, requests: int = 0, retries: int = 0, failures: int = 0) -> None:
        with self._lock:
            self.stats.requests += requests
            self.stats.retries += retries
            self.stats.failures += failures

    def _post(self, path: str, payload: dict) -> dict:
        attempts = self.endpoint.retry_budget + 1
        last: Exception | None = None
        for attempt in range(attempts):
            if attempt:
                _sleep(self.endpoint.backoff_base * (2 ** (attempt - 1)))
                self._count(retries=1)
            self._count(requests=1)
            try:
                response = self._client.post(path, json=payload)
            except httpx.TransportError as exc:
                last = exc
                continue
            if response.status_code >= 500:
                last = BackendRequestError(
                    f"{self.name}: {path} returned {response.status_code}: {_error_body(response)}"
                )
                continue
            if not response.is_success:
                self._count(failures=1)
                raise BackendRequestError(
                    f"{self.name}: {path} returned {response.status_code}: {_error_body(response)}"
                )
            try:
                body = response.json()
            except ValueError as exc:
                self._count(failures=1)
                raise BackendPayloadError(f"{self.name}: {path} returned non-JSON body") from exc
            if not isinstance(body, dict):
                self._count(failures=1)
                raise BackendPayloadError(f"{self.name}: {path} returned a non-object body")
            return body
        self._count(failures=1)
        raise BackendExhaustedError(
            f"{self.name}: {path} still failing after {attempts} attempts: {last}"
        )

    def _check_echo(self, body: dict, instance_id: InstanceId, path: str) -> None:
        if body.get("id") != instance_id:
            raise BackendPayloadError(
                f"{self.name}: {path} echoed id {body.get('id')!r}, expected {instance_id!r}"
            )


def _error_body(response: httpx.Response) -> str:
    try:
        body = response.json()
        if isinstance(body, dict) and "error" in body:
            return str(body["error"])
    except ValueError:
        pass
    return response.text[:200]


def _sleep(seconds: float) -> None:
    if seconds > 0:
        time.sleep(seconds)


class HttpGenerationBackend(_HttpStage):
    """Generation stage over the wire."""

    def generate(self, instance_id: InstanceId, prompt: str, params: GenParams) -> str:
        payload = {
            "id": instance_id,
            "prompt": prompt,
            "temperature": params.temperature,
            "top_p": params.top_p,
            "max_new_tokens": params.max_new_tokens,
        }
        body = self._post("/v1/generate", payload)
        self._check_echo(body, instance_id, "/v1/generate")
        text = body.get("text")
        if not isinstance(text, str):
            raise BackendPayloadError(f"{self.name}: /v1/generate reply has no text field")
        return text


class HttpTokenLabeler(_HttpStage):
    """Labeling stage over the wire."""

    def label_tokens(self, instance_id: InstanceId, text: str) -> list[TokenSpanLabel]:
        body = self._post("/v1/label_tokens", {"id": instance_id, "text": text})
        self._check_echo(body, instance_id, "/v1/label_tokens")
        raw = body.get("tokens")
        if not isinstance(raw, list):
            raise BackendPayloadError(f"{self.name}: /v1/label_tokens reply has no tokens list")
        tokens: list[TokenSpanLabel] = []
        prev_end = -1
        for item in raw:
            if not isinstance(item, dict):
                raise BackendPayloadError(f"{self.name}: token entry is not an object")
            try:
                start, end, label = int(item["start"]), int(item["end"]), int(item["label"])
            except (KeyError, TypeError, ValueError) as exc:
                raise BackendPayloadError(f"{self.name}: token entry {item!r} malformed") from exc
            if not (0 <= start < end <= len(text)) or start < prev_end or label not in (0, 1):
                raise BackendPayloadError(
                    f"{self.name}: token span [{start}, {end}) label {label} invalid for text of length {len(text)}"
                )
            prev_end = end
            tokens.append(TokenSpanLabel(start=start, end=end, label=label))
        return tokens


T = TypeVar("T")
R = TypeVar("R")


def fan_out(
    items: Sequence[T],
    fn: Callable[[T], R],
    max_in_flight: int,
) -> tuple[list[R], list[tuple[T, BackendError]]]:
    """Apply ``fn`` to every item with bounded concurrency.

    Results come back in input order regardless of completion order.
    Backend errors are collected per item rather than aborting the batch;
    any other exception propagates.

    Args:
        items: Work items, order-significant.
        fn: Callable run in worker threads, must be thread-safe.
        max_in_flight: Worker thread count, at least 1.

    Returns:
        (successes in input order, failures as (item, error) in input
        order).
    """
    if max_in_flight < 1:
        raise ConfigError(f"max_in_flight {max_in_flight} < 1")
    successes: list[R] = []
    failures: list[tuple[T, BackendError]] = []
    if not items:
        return successes, failures
    with ThreadPoolExecutor(max_workers=max_in_flight) as pool:
        futures = [pool.submit(fn, item) for item in items]
        for item, future in zip(items, futures):
            try:
                successes.append(future.result())
            except BackendError as exc:
                failures.append((item, exc))
    return successes, failures
