"""Uniform access to model capabilities: embeddings, generation, pair scoring.

Real inference goes over the ubiquitous JSON-over-HTTP protocol (chat
completions + embeddings endpoints) so both local inference servers and
hosted APIs work with the same client. The in-process mocks are pure
functions of their inputs and back the whole test suite.
"""

from __future__ import annotations

import hashlib
import logging
import re
import threading
import time
from dataclasses import dataclass, field
from enum import Enum
from typing import Protocol

import httpx

from .errors import BackendError, BackendTimeout, DimensionMismatch, InvalidConfig
from .retrieval import tokenize

logger = logging.getLogger(__name__)


class Capability(str, Enum):
    Embed = "Embed"
    Generate = "Generate"
    ScorePair = "ScorePair"


@dataclass(frozen=True)
class GenerationParams:
    """Decoding contract: greedy by default so runs are reproducible."""

    temperature: float = 0.0
    max_tokens: int = 512


@dataclass
class BackendConfig:
    base_url: str
    model_name: str
    capability: Capability
    timeout: float = 60.0
    max_concurrent: int = 4
    retries: int = 2
    api_key: str | None = None
    backoff_base: float = 0.5

    def validate(self) -> None:
        if self.timeout <= 0:
            raise InvalidConfig("timeout must be positive")
        if self.max_concurrent < 1:
            raise InvalidConfig("max_concurrent must be at least 1")
        if self.retries < 0:
            raise InvalidConfig("retries must be non-negative")


class EmbeddingBackend(Protocol):
    def embed(self, texts: list[str]) -> list[list[float]]: ...


class GenerationBackend(Protocol):
    def generate(self, prompt: str, params: GenerationParams | None = None) -> str: ...


class PairScorerBackend(Protocol):
    def score_pair(self, query: str, passage: str) -> float: ...


# ---------------------------------------------------------------------------
# HTTP backends
# ---------------------------------------------------------------------------


class HttpBackend:
    """Shared transport: bounded concurrency, retries with exponential backoff.

    Retries apply to timeouts, transport failures and 5xx responses;
    4xx-class protocol errors are never retried.
    """

    def __init__(self, config: BackendConfig, transport: httpx.BaseTransport | None = None):
        config.validate()
        self.config = config
        self._client = httpx.Client(
            base_url=config.base_url, timeout=config.timeout, transport=transport
        )
        self._semaphore = threading.Semaphore(config.max_concurrent)

    def close(self) -> None:
        self._client.close()

    def _headers(self) -> dict[str, str]:
        headers = {"Content-Type": "application/json"}
        if self.config.api_key:
            headers["Authorization"] = f"Bearer {self.config.api_key}"
        return headers

    def _post(self, path: str, payload: dict) -> dict:
        logger.debug("POST %s payload=%s", path, _redact(payload))
        last_error: Exception | None = None
        for attempt in range(self.config.retries + 1):
            if attempt > 0:
                time.sleep(self.config.backoff_base * (2 ** (attempt - 1)))
            try:
                with self._semaphore:
                    response = self._client.post(path, json=payload, headers=self._headers())
            except httpx.TimeoutException as exc:
                last_error = BackendTimeout(f"timeout calling {path}: {exc}")
                continue
            except httpx.TransportError as exc:
                last_error = BackendError(f"transport error calling {path}: {exc}")
                continue
            if response.status_code >= 500:
                last_error = BackendError(f"{path} returned {response.status_code}")
                continue
            if response.status_code >= 400:
                raise BackendError(
                    f"{path} returned {response.status_code}: {response.text[:200]}"
                )
            data = response.json()
            logger.debug("POST %s -> %s", path, _redact(data))
            return data
        raise last_error if last_error is not None else BackendError(f"{path} failed")


def _redact(payload: object) -> object:
    if isinstance(payload, dict):
        return {
            k: "<redacted>" if k.lower() in ("api_key", "authorization") else _redact(v)
            for k, v in payload.items()
        }
    if isinstance(payload, list):
        return [_redact(v) for v in payload]
    return payload


class HttpEmbeddingBackend(HttpBackend):
    @property
    def embedder_id(self) -> str:
        return f"{self.config.base_url}#{self.config.model_name}"

    def embed(self, texts: list[str]) -> list[list[float]]:
        if not texts:
            raise BackendError("embed() requires at least one text")
        data = self._post("/embeddings", {"model": self.config.model_name, "input": list(texts)})
        items = sorted(data["data"], key=lambda item: item.get("index", 0))
        vectors = [item["embedding"] for item in items]
        if len(vectors) != len(texts):
            raise BackendError(f"expected {len(texts)} embeddings, got {len(vectors)}")
        dims = {len(v) for v in vectors}
        if len(dims) != 1:
            raise DimensionMismatch(f"ragged embedding dimensions: {sorted(dims)}")
        return vectors


class HttpGenerationBackend(HttpBackend):
    def generate(self, prompt: str, params: GenerationParams | None = None) -> str:
        if not prompt:
            raise BackendError("generate() requires a non-empty prompt")
        params = params or GenerationParams()
        data = self._post(
            "/chat/completions",
            {
                "model": self.config.model_name,
                "messages": [{"role": "user", "content": prompt}],
                "temperature": params.temperature,
                "max_tokens": params.max_tokens,
            },
        )
        return data["choices"][0]["message"]["content"]


_SCORE_PROMPT = (
    "Rate how relevant the passage is to the query on a scale from 0 to 100.\n"
    "Respond with the number only.\n\nQuery: {query}\n\nPassage: {passage}"
)

_NUMBER_RE = re.compile(r"-?\d+(?:\.\d+)?")


class HttpPairScorerBackend(HttpBackend):
    """Cross-encoder style scoring over HTTP.

    There is no standard wire endpoint for pair scoring: either a dedicated
    `/score` endpoint is used, or a scoring prompt goes through chat
    completions and the returned number is normalized to [0, 1].
    """

    def __init__(
        self,
        config: BackendConfig,
        transport: httpx.BaseTransport | None = None,
        use_score_endpoint: bool = False,
    ):
        super().__init__(config, transport)
        self.use_score_endpoint = use_score_endpoint

    def score_pair(self, query: str, passage: str) -> float:
        if not query or not passage:
            raise BackendError("score_pair() requires non-empty query and passage")
        if self.use_score_endpoint:
            data = self._post(
                "/score",
                {"model": self.config.model_name, "query": query, "passage": passage},
            )
            return float(data["score"])
        data = self._post(
            "/chat/completions",
            {
                "model": self.config.model_name,
                "messages": [
                    {
                        "role": "user",
                        "content": _SCORE_PROMPT.format(query=query, passage=passage),
                    }
                ],
                "temperature": 0.0,
                "max_tokens": 8,
            },
        )
        text = data["choices"][0]["message"]["content"]
        m = _NUMBER_RE.search(text)
        if m is None:
            raise BackendError(f"scorer returned no number: {text[:80]!r}")
        return max(0.0, min(1.0, float(m.group()) / 100.0))


# ---------------------------------------------------------------------------
# Deterministic in-process mocks
# ---------------------------------------------------------------------------


class HashEmbedder:
    """Embedding mock: each component is derived from a hash of (text, index).

    Pure function of the input text and dim; no semantic structure.
    """

    def __init__(self, dim: int = 32):
        if dim < 1:
            raise InvalidConfig("dim must be at least 1")
        self.dim = dim
        self.embedder_id = f"hash-embedder-{dim}"
        self.call_count = 0

    def embed(self, texts: list[str]) -> list[list[float]]:
        if not texts:
            raise BackendError("embed() requires at least one text")
        self.call_count += 1
        return [self._vector(t) for t in texts]

    def _vector(self, text: str) -> list[float]:
        out = []
        for i in range(self.dim):
            digest = hashlib.sha256(f"{text}\x1f{i}".encode("utf-8")).digest()
            value = int.from_bytes(digest[:8], "big") / 2**64
            out.append(value * 2.0 - 1.0)
        return out


@dataclass
class ScriptedGenerator:
    """Generation mock driven by a fixture map.

    Exact prompt matches win; otherwise any fixture key contained in the
    prompt matches (so fixtures can be keyed by the interesting fragment);
    otherwise the fixed fallback is returned.
    """

    responses: dict[str, str] = field(default_factory=dict)
    fallback: str = "UNRESOLVED"
    call_count: int = 0
    prompts: list[str] = field(default_factory=list)

    def generate(self, prompt: str, params: GenerationParams | None = None) -> str:
        self.call_count += 1
        self.prompts.append(prompt)
        if prompt in self.responses:
            return self.responses[prompt]
        for key, value in self.responses.items():
            if key and key in prompt:
                return value
        return self.fallback


class OverlapScorer:
    """Pair-scoring mock: |shared tokens| / |query tokens| (set semantics)."""

    def __init__(self):
        self.call_count = 0

    def score_pair(self, query: str, passage: str) -> float:
        self.call_count += 1
        query_tokens = set(tokenize(query))
        if not query_tokens:
            return 0.0
        return len(query_tokens & set(tokenize(passage))) / len(query_tokens)
