"""Claim-as-query retrieval over manuscript passages.

Four strategies: plain BM25, exact dense nearest-neighbor search over
backend embeddings, and either first stage followed by cross-encoder
reranking. The corpus is a single paper (hundreds of passages), so dense
search is exact; approximate indexing is deliberately out of scope.
"""

from __future__ import annotations

import json
import math
import re
from collections import Counter
from dataclasses import dataclass, field, replace
from enum import Enum
from pathlib import Path

import numpy as np

from .errors import (
    BackendError,
    DimensionMismatch,
    EmptyCorpus,
    InvalidConfig,
    MissingIndex,
)
from .ingestion import Document, Passage, fingerprint

# Word characters minus underscore: lowercase and split on non-alphanumeric.
# No stemming, no stopword removal; pinned behavior.
_TOKEN_RE = re.compile(r"[^\W_]+", re.UNICODE)


def tokenize(text: str) -> list[str]:
    return _TOKEN_RE.findall(text.lower())


class Stage(str, Enum):
    Sparse = "Sparse"
    Dense = "Dense"
    Reranked = "Reranked"


class StrategyKind(str, Enum):
    Bm25 = "bm25"
    Dense = "dense"
    DenseRerank = "dense_rerank"
    SparseRerank = "sparse_rerank"


@dataclass(frozen=True)
class RetrievalStrategy:
    kind: StrategyKind
    candidate_k: int = 20
    final_k: int = 3

    def __post_init__(self):
        if self.candidate_k < 1 or self.final_k < 1:
            raise InvalidConfig("candidate_k and final_k must be at least 1")
        if self.final_k > self.candidate_k:
            raise InvalidConfig(
                f"final_k ({self.final_k}) must not exceed candidate_k ({self.candidate_k})"
            )

    @classmethod
    def parse(cls, name: str, candidate_k: int = 20, final_k: int = 3) -> "RetrievalStrategy":
        try:
            kind = StrategyKind(name.strip().lower())
        except ValueError:
            valid = ", ".join(k.value for k in StrategyKind)
            raise InvalidConfig(f"unknown strategy {name!r} (expected one of: {valid})")
        return cls(kind, candidate_k=candidate_k, final_k=final_k)


@dataclass
class EvidenceHit:
    passage_id: str
    score: float
    rank: int
    stage: Stage
    ordinal: int
    first_stage_score: float | None = None
    degraded: bool = False

    def to_dict(self) -> dict:
        return {
            "passage_id": self.passage_id,
            "score": self.score,
            "rank": self.rank,
            "stage": self.stage.value,
            "ordinal": self.ordinal,
            "first_stage_score": self.first_stage_score,
            "degraded": self.degraded,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "EvidenceHit":
        return cls(
            d["passage_id"],
            d["score"],
            d["rank"],
            Stage(d["stage"]),
            d["ordinal"],
            d.get("first_stage_score"),
            d.get("degraded", False),
        )


# ---------------------------------------------------------------------------
# Sparse (Okapi BM25), built from scratch
# ---------------------------------------------------------------------------


@dataclass
class Bm25Index:
    vocabulary: dict[str, int]
    doc_freq: dict[int, int]
    postings: dict[int, list[tuple[int, int]]]
    doc_len: list[int]
    avg_doc_len: float
    passage_ids: list[str]
    k1: float = 1.2
    b: float = 0.75

    @property
    def n_passages(self) -> int:
        return len(self.doc_len)


def build_bm25(passages: list[Passage], k1: float = 1.2, b: float = 0.75) -> Bm25Index:
    if not passages:
        raise EmptyCorpus("cannot build a BM25 index over zero passages")
    if k1 <= 0:
        raise InvalidConfig("k1 must be positive")
    if not 0.0 <= b <= 1.0:
        raise InvalidConfig("b must be in [0, 1]")

    vocabulary: dict[str, int] = {}
    doc_freq: dict[int, int] = {}
    postings: dict[int, list[tuple[int, int]]] = {}
    doc_len: list[int] = []
    passage_ids: list[str] = []

    for ordinal, passage in enumerate(passages):
        terms = tokenize(passage.text)
        doc_len.append(len(terms))
        passage_ids.append(passage.passage_id)
        for term, tf in Counter(terms).items():
            term_id = vocabulary.setdefault(term, len(vocabulary))
            doc_freq[term_id] = doc_freq.get(term_id, 0) + 1
            postings.setdefault(term_id, []).append((ordinal, tf))

    return Bm25Index(
        vocabulary=vocabulary,
        doc_freq=doc_freq,
        postings=postings,
        doc_len=doc_len,
        avg_doc_len=sum(doc_len) / len(doc_len),
        passage_ids=passage_ids,
        k1=k1,
        b=b,
    )


def bm25_search(index: Bm25Index, query: str, k: int) -> list[EvidenceHit]:
    """Okapi BM25 over all passages; zero-score passages are omitted.

    score(d) = sum over unique query terms of
    idf(t) * tf * (k1 + 1) / (tf + k1 * (1 - b + b * dl / avgdl)) with
    idf(t) = ln(1 + (N - df + 0.5) / (df + 0.5)).
    """
    n = index.n_passages
    scores: dict[int, float] = {}
    for term in dict.fromkeys(tokenize(query)):
        term_id = index.vocabulary.get(term)
        if term_id is None:
            continue
        df = index.doc_freq[term_id]
        idf = math.log(1.0 + (n - df + 0.5) / (df + 0.5))
        for ordinal, tf in index.postings[term_id]:
            norm = index.k1 * (1.0 - index.b + index.b * index.doc_len[ordinal] / index.avg_doc_len)
            scores[ordinal] = scores.get(ordinal, 0.0) + idf * tf * (index.k1 + 1.0) / (tf + norm)

    ranked = sorted(scores.items(), key=lambda item: (-item[1], item[0]))[:k]
    return [
        EvidenceHit(
            passage_id=index.passage_ids[ordinal],
            score=score,
            rank=rank,
            stage=Stage.Sparse,
            ordinal=ordinal,
        )
        for rank, (ordinal, score) in enumerate(ranked, 1)
    ]


# ---------------------------------------------------------------------------
# Dense (exact cosine over unit vectors)
# ---------------------------------------------------------------------------


@dataclass
class DenseIndex:
    dim: int
    vectors: np.ndarray  # shape (n, dim); rows unit-normalized
    embedder_id: str
    passage_ids: list[str]


def _normalize_rows(matrix: np.ndarray) -> np.ndarray:
    norms = np.linalg.norm(matrix, axis=1)
    if np.any(norms == 0):
        raise BackendError("embedder produced a zero-norm vector")
    return matrix / norms[:, None]


def build_dense(passages: list[Passage], embedder) -> DenseIndex:
    if not passages:
        raise EmptyCorpus("cannot build a dense index over zero passages")
    raw = embedder.embed([p.text for p in passages])
    dims = {len(v) for v in raw}
    if len(dims) != 1:
        raise DimensionMismatch(f"ragged embedding dimensions: {sorted(dims)}")
    matrix = _normalize_rows(np.asarray(raw, dtype=np.float64))
    embedder_id = getattr(embedder, "embedder_id", type(embedder).__name__)
    return DenseIndex(
        dim=matrix.shape[1],
        vectors=matrix,
        embedder_id=embedder_id,
        passage_ids=[p.passage_id for p in passages],
    )


def dense_search(index: DenseIndex, query_vec: np.ndarray, k: int) -> list[EvidenceHit]:
    """Exact cosine (dot product on unit vectors) over all passages."""
    query = np.asarray(query_vec, dtype=np.float64)
    if query.shape != (index.dim,):
        raise DimensionMismatch(f"query has shape {query.shape}, index dim is {index.dim}")
    scores = index.vectors @ query
    order = np.lexsort((np.arange(len(scores)), -scores))[:k]
    return [
        EvidenceHit(
            passage_id=index.passage_ids[ordinal],
            score=float(scores[ordinal]),
            rank=rank,
            stage=Stage.Dense,
            ordinal=int(ordinal),
        )
        for rank, ordinal in enumerate(order, 1)
    ]


def embed_query(embedder, text: str) -> np.ndarray:
    vec = np.asarray(embedder.embed([text])[0], dtype=np.float64)
    norm = np.linalg.norm(vec)
    if norm == 0:
        raise BackendError("embedder produced a zero-norm query vector")
    return vec / norm


# ---------------------------------------------------------------------------
# Cross-encoder reranking
# ---------------------------------------------------------------------------


def rerank(
    claim: str,
    candidates: list[EvidenceHit],
    scorer,
    passage_texts: dict[str, str],
) -> list[EvidenceHit]:
    """Re-score candidates with a pair scorer; first-stage scores are kept.

    On backend failure the input ordering is returned unchanged with the
    degraded flag set on every hit.
    """
    if not candidates:
        return []
    try:
        rescored = [
            (scorer.score_pair(claim, passage_texts[hit.passage_id]), hit)
            for hit in candidates
        ]
    except BackendError:
        return [replace(hit, degraded=True) for hit in candidates]
    rescored.sort(key=lambda pair: (-pair[0], pair[1].ordinal))
    return [
        EvidenceHit(
            passage_id=hit.passage_id,
            score=score,
            rank=rank,
            stage=Stage.Reranked,
            ordinal=hit.ordinal,
            first_stage_score=hit.score,
        )
        for rank, (score, hit) in enumerate(rescored, 1)
    ]


# ---------------------------------------------------------------------------
# Strategy pipelines
# ---------------------------------------------------------------------------


@dataclass
class IndexedDocument:
    document: Document
    bm25: Bm25Index | None = None
    dense: DenseIndex | None = None
    passage_texts: dict[str, str] = field(default_factory=dict)


def index_document(
    doc: Document,
    *,
    k1: float = 1.2,
    b: float = 0.75,
    embedder=None,
) -> IndexedDocument:
    """Build the immutable indexes a document needs for retrieval.

    The dense index is only built when an embedder is supplied.
    """
    return IndexedDocument(
        document=doc,
        bm25=build_bm25(doc.passages, k1=k1, b=b),
        dense=build_dense(doc.passages, embedder) if embedder is not None else None,
        passage_texts={p.passage_id: p.text for p in doc.passages},
    )


def retrieve(
    claim,
    indexed: IndexedDocument,
    strategy: RetrievalStrategy,
    *,
    embedder=None,
    scorer=None,
) -> list[EvidenceHit]:
    """Run one strategy pipeline; returns at most strategy.final_k hits.

    `claim` may be a Claim object or a plain string.
    """
    text = getattr(claim, "text", None) or str(claim)
    kind = strategy.kind

    if kind in (StrategyKind.Bm25, StrategyKind.SparseRerank):
        if indexed.bm25 is None:
            raise MissingIndex("BM25 index was not built for this document")
    if kind in (StrategyKind.Dense, StrategyKind.DenseRerank):
        if indexed.dense is None:
            raise MissingIndex("dense index was not built for this document")
        if embedder is None:
            raise MissingIndex("dense retrieval needs an embedding backend")

    if kind == StrategyKind.Bm25:
        return bm25_search(indexed.bm25, text, strategy.final_k)
    if kind == StrategyKind.Dense:
        return dense_search(indexed.dense, embed_query(embedder, text), strategy.final_k)

    if scorer is None:
        raise MissingIndex("reranking needs a pair-scorer backend")
    if kind == StrategyKind.DenseRerank:
        candidates = dense_search(
            indexed.dense, embed_query(embedder, text), strategy.candidate_k
        )
    else:  # SparseRerank
        candidates = bm25_search(indexed.bm25, text, strategy.candidate_k)
    reranked = rerank(text, candidates, scorer, indexed.passage_texts)
    return reranked[: strategy.final_k]


# ---------------------------------------------------------------------------
# On-disk dense index cache
# ---------------------------------------------------------------------------


def dense_cache_key(doc_id: str, chunk_fingerprint: str, embedder_id: str) -> str:
    return fingerprint(json.dumps([doc_id, chunk_fingerprint, embedder_id]))


class DenseIndexCache:
    """Optional on-disk cache of dense indexes.

    Keyed by (doc_id, chunk config fingerprint, embedder_id); any key change
    produces a different file name, so stale entries are never served.
    """

    def __init__(self, root: str | Path):
        self.root = Path(root)
        self.root.mkdir(parents=True, exist_ok=True)

    def _path(self, key: str) -> Path:
        return self.root / f"dense-{key}.npz"

    def load(self, doc_id: str, chunk_fingerprint: str, embedder_id: str) -> DenseIndex | None:
        path = self._path(dense_cache_key(doc_id, chunk_fingerprint, embedder_id))
        if not path.exists():
            return None
        with np.load(path) as data:
            return DenseIndex(
                dim=int(data["dim"]),
                vectors=data["vectors"],
                embedder_id=str(data["embedder_id"]),
                passage_ids=[str(p) for p in data["passage_ids"]],
            )

    def store(
        self, index: DenseIndex, doc_id: str, chunk_fingerprint: str, embedder_id: str
    ) -> Path:
        path = self._path(dense_cache_key(doc_id, chunk_fingerprint, embedder_id))
        np.savez(
            path,
            dim=np.asarray(index.dim),
            vectors=index.vectors,
            embedder_id=np.asarray(index.embedder_id),
            passage_ids=np.asarray(index.passage_ids),
        )
        return path
