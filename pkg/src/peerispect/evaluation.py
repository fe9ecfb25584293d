"""Benchmark construction, metric computation, and configuration sweeps.

Two benchmark flavors share one instance type: manuscript-derived claims
(all gold-Supported, each with the origin passage it came from) and
labeled review claims loaded from JSONL (no origin passage, so retrieval
recall is undefined for them). Sweeps run the retrieve+verify pipeline
for every (verifier backend, retrieval strategy) cell and emit one
metrics row per cell in a stable order: model outer, retriever inner.
"""

from __future__ import annotations

import csv
import io
import json
import logging
import random
from dataclasses import dataclass
from pathlib import Path

from .claims import content_tokens
from .errors import EmptyInput, LengthMismatch, MissingOrigin, ParseError, UnknownLabel
from .ingestion import Document, split_sentences
from .retrieval import (
    EvidenceHit,
    IndexedDocument,
    RetrievalStrategy,
    index_document,
    retrieve,
    tokenize,
)
from .verification import VerdictLabel, verify

logger = logging.getLogger(__name__)

_MIN_UNIT_TOKENS = 3


@dataclass
class BenchmarkInstance:
    instance_id: str
    claim_text: str
    gold_label: VerdictLabel
    paper_id: str
    origin_passage_id: str | None = None
    dialog_context: str | None = None

    def to_dict(self) -> dict:
        d = {
            "instance_id": self.instance_id,
            "claim": self.claim_text,
            "label": self.gold_label.value,
            "paper_id": self.paper_id,
        }
        if self.origin_passage_id is not None:
            d["origin_passage_id"] = self.origin_passage_id
        if self.dialog_context is not None:
            d["dialog"] = self.dialog_context
        return d


@dataclass
class MetricsRow:
    model_name: str
    strategy: RetrievalStrategy
    accuracy: float | None
    recall_at_k: float | None
    n_instances: int
    error: str | None = None


# ---------------------------------------------------------------------------
# Manuscript-derived benchmark (all instances Supported by construction)
# ---------------------------------------------------------------------------

_UNIT_PROMPT = (
    "List the atomic factual statements made in the passage, one per line, "
    "each prefixed with \"- \". Keep each statement self-contained.\n\n"
    "Passage: {passage}"
)


@dataclass
class CmcBuild:
    instances: list[BenchmarkInstance]
    insufficient: bool = False


def _passage_units(passage_text: str, generator) -> list[str]:
    raw = ""
    if generator is not None:
        try:
            raw = generator.generate(_UNIT_PROMPT.format(passage=passage_text))
        except Exception as exc:
            logger.warning("unit extraction backend failed: %s", exc)
    units = [
        line[2:].strip() for line in raw.splitlines() if line.startswith("- ") and line[2:].strip()
    ]
    if not units:
        # rule fallback: passage sentences are the factual units
        units = [passage_text[s:e] for s, e in split_sentences(passage_text)]
    return [u for u in units if len(tokenize(u)) >= _MIN_UNIT_TOKENS]


def map_to_origin(unit: str, doc: Document) -> str:
    """Passage with the maximal content-token overlap; ties go to the
    lowest ordinal."""
    unit_tokens = set(content_tokens(unit))
    best_id, best_overlap = doc.passages[0].passage_id, -1
    for passage in doc.passages:
        overlap = len(unit_tokens & set(content_tokens(passage.text)))
        if overlap > best_overlap:
            best_id, best_overlap = passage.passage_id, overlap
    return best_id


def build_cmc(
    doc: Document,
    generator=None,
    n_per_paper: int = 10,
    seed: int = 0,
) -> CmcBuild:
    """Decompose the manuscript into atomic factual units, map each back to
    its origin passage, and sample n_per_paper of them. Every instance is
    gold-labeled Supported because it came from the manuscript itself.

    If fewer than n_per_paper units exist, all of them are returned and the
    build is flagged insufficient.
    """
    units: list[str] = []
    seen: set[str] = set()
    for passage in doc.passages:
        for unit in _passage_units(passage.text, generator):
            if unit in seen:
                continue
            seen.add(unit)
            units.append(unit)

    insufficient = len(units) < n_per_paper
    if insufficient:
        selected = list(units)
        logger.warning(
            "only %d units extracted from %s (wanted %d)", len(units), doc.doc_id, n_per_paper
        )
    else:
        rng = random.Random(seed)
        picked = sorted(rng.sample(range(len(units)), n_per_paper))
        selected = [units[i] for i in picked]

    instances = [
        BenchmarkInstance(
            instance_id=f"{doc.doc_id}:cmc{i}",
            claim_text=unit,
            gold_label=VerdictLabel.Supported,
            paper_id=doc.doc_id,
            origin_passage_id=map_to_origin(unit, doc),
        )
        for i, unit in enumerate(selected)
    ]
    return CmcBuild(instances=instances, insufficient=insufficient)


# ---------------------------------------------------------------------------
# Benchmark files (JSONL)
# ---------------------------------------------------------------------------

_VALID_LABELS = {label.value for label in VerdictLabel}


def _parse_row(row: dict, line_no: int, *, allow_origin: bool) -> BenchmarkInstance:
    claim = row.get("claim")
    if not claim or not isinstance(claim, str):
        raise ParseError("missing or non-string 'claim' field", line=line_no)
    label = row.get("label")
    if label not in _VALID_LABELS:
        raise UnknownLabel(f"unknown label {label!r}", line=line_no)
    origin = row.get("origin_passage_id")
    if origin is not None and not allow_origin:
        raise ParseError("unexpected origin_passage_id in review-claims file", line=line_no)
    if origin is not None and label != VerdictLabel.Supported.value:
        raise ParseError("manuscript-derived instances must be labeled Supported", line=line_no)
    return BenchmarkInstance(
        instance_id=row.get("instance_id") or f"row{line_no}",
        claim_text=claim,
        gold_label=VerdictLabel(label),
        paper_id=row.get("paper_id", ""),
        origin_passage_id=origin,
        dialog_context=row.get("dialog"),
    )


def _load_jsonl(path: str | Path, *, allow_origin: bool) -> list[BenchmarkInstance]:
    instances = []
    with open(path, encoding="utf-8") as fh:
        for line_no, line in enumerate(fh, 1):
            line = line.strip()
            if not line:
                continue
            try:
                row = json.loads(line)
            except json.JSONDecodeError as exc:
                raise ParseError(f"invalid JSON ({exc.msg})", line=line_no)
            if not isinstance(row, dict):
                raise ParseError("row is not a JSON object", line=line_no)
            instances.append(_parse_row(row, line_no, allow_origin=allow_origin))
    return instances


def load_rrc(path: str | Path) -> list[BenchmarkInstance]:
    """Load labeled review claims: JSONL rows with claim, label and dialog
    fields. Labels outside the four-label set are rejected with the line
    number; these instances never carry an origin passage."""
    return _load_jsonl(path, allow_origin=False)


def load_benchmark(path: str | Path) -> list[BenchmarkInstance]:
    """Load either benchmark flavor (rows may carry origin_passage_id)."""
    return _load_jsonl(path, allow_origin=True)


def save_instances(instances: list[BenchmarkInstance], path: str | Path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for inst in instances:
            fh.write(json.dumps(inst.to_dict(), sort_keys=True) + "\n")


# ---------------------------------------------------------------------------
# Metrics
# ---------------------------------------------------------------------------


def accuracy(predictions: list[VerdictLabel], golds: list[VerdictLabel]) -> float:
    if len(predictions) != len(golds):
        raise LengthMismatch(f"{len(predictions)} predictions vs {len(golds)} golds")
    if not predictions:
        raise EmptyInput("accuracy of zero instances is undefined")
    return sum(p == g for p, g in zip(predictions, golds)) / len(predictions)


def retrieval_recall_at_k(
    hits_per_instance: list[list[EvidenceHit]],
    instances: list[BenchmarkInstance],
    k: int = 3,
) -> float:
    """Fraction of instances whose origin passage shows up in the top-k hits."""
    if len(hits_per_instance) != len(instances):
        raise LengthMismatch(f"{len(hits_per_instance)} hit lists vs {len(instances)} instances")
    if not instances:
        raise EmptyInput("recall of zero instances is undefined")
    found = 0
    for hits, inst in zip(hits_per_instance, instances):
        if inst.origin_passage_id is None:
            raise MissingOrigin(f"instance {inst.instance_id} has no origin passage")
        if inst.origin_passage_id in [h.passage_id for h in hits[:k]]:
            found += 1
    return found / len(instances)


# ---------------------------------------------------------------------------
# Sweeps
# ---------------------------------------------------------------------------


def run_sweep(
    instances: list[BenchmarkInstance],
    docs: dict[str, Document],
    strategies: list[RetrievalStrategy],
    verifiers: list[tuple[str, object]],
    *,
    embedder=None,
    pair_scorer=None,
    k1: float = 1.2,
    b: float = 0.75,
) -> list[MetricsRow]:
    """Cross-product of verifier backends x retrieval strategies.

    Recall is reported only when every instance carries an origin passage,
    and is computed from retrieval alone (before verification) at
    k = final_k. A failing cell is recorded with its error and the sweep
    continues.
    """
    need_dense = any(
        s.kind.value in ("dense", "dense_rerank") for s in strategies
    )
    indexed: dict[str, IndexedDocument] = {
        paper_id: index_document(doc, k1=k1, b=b, embedder=embedder if need_dense else None)
        for paper_id, doc in docs.items()
    }
    with_origin = bool(instances) and all(i.origin_passage_id for i in instances)
    golds = [i.gold_label for i in instances]

    rows: list[MetricsRow] = []
    for model_name, backend in verifiers:
        for strategy in strategies:
            try:
                predictions: list[VerdictLabel] = []
                hits_per_instance: list[list[EvidenceHit]] = []
                for inst in instances:
                    if inst.paper_id not in indexed:
                        raise ParseError(f"no document for paper {inst.paper_id!r}")
                    idx = indexed[inst.paper_id]
                    hits = retrieve(
                        inst.claim_text, idx, strategy, embedder=embedder, scorer=pair_scorer
                    )
                    hits_per_instance.append(hits)
                    verdict = verify(
                        inst.claim_text, hits, idx.document, backend, claim_id=inst.instance_id
                    )
                    predictions.append(verdict.label)
                rows.append(
                    MetricsRow(
                        model_name=model_name,
                        strategy=strategy,
                        accuracy=accuracy(predictions, golds),
                        recall_at_k=(
                            retrieval_recall_at_k(hits_per_instance, instances, k=strategy.final_k)
                            if with_origin
                            else None
                        ),
                        n_instances=len(instances),
                    )
                )
            except Exception as exc:
                logger.error("sweep cell (%s, %s) failed: %s", model_name, strategy.kind.value, exc)
                rows.append(
                    MetricsRow(
                        model_name=model_name,
                        strategy=strategy,
                        accuracy=None,
                        recall_at_k=None,
                        n_instances=0,
                        error=str(exc),
                    )
                )
    return rows


def metrics_to_csv(rows: list[MetricsRow]) -> str:
    """Fixed column schema: model,strategy,acc,recall,n. Deterministic bytes."""
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["model", "strategy", "acc", "recall", "n"])
    for row in rows:
        writer.writerow([
            row.model_name,
            row.strategy.kind.value,
            "" if row.accuracy is None else f"{row.accuracy:.6f}",
            "" if row.recall_at_k is None else f"{row.recall_at_k:.6f}",
            row.n_instances,
        ])
    return buf.getvalue()


def metrics_to_json(rows: list[MetricsRow]) -> str:
    payload = [
        {
            "model": row.model_name,
            "strategy": row.strategy.kind.value,
            "candidate_k": row.strategy.candidate_k,
            "final_k": row.strategy.final_k,
            "acc": row.accuracy,
            "recall": row.recall_at_k,
            "n": row.n_instances,
            "error": row.error,
        }
        for row in rows
    ]
    return json.dumps(payload, indent=2, sort_keys=True) + "\n"
