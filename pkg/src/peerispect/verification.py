"""Four-label claim verification via NLI-style prompting.

The claim is the hypothesis, retrieved passages are the premises. The
verdict is parsed from the backend response with decreasing confidence:
an exact `LABEL: X` first line, a fuzzy phrase search, or a fallback to
Undetermined. verify() is total: no backend behavior makes it raise.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from enum import Enum
from functools import lru_cache
from importlib import resources
from pathlib import Path

from .gateway import GenerationParams
from .ingestion import Document, Passage
from .retrieval import EvidenceHit


class VerdictLabel(str, Enum):
    Supported = "Supported"
    PartiallySupported = "PartiallySupported"
    Contradicted = "Contradicted"
    Undetermined = "Undetermined"


class ParserConfidence(str, Enum):
    Exact = "Exact"
    Fuzzy = "Fuzzy"
    Fallback = "Fallback"


@dataclass
class Verdict:
    claim_id: str
    label: VerdictLabel
    rationale: str
    evidence: list[str]
    raw_response: str
    parser_confidence: ParserConfidence

    def to_dict(self) -> dict:
        return {
            "claim_id": self.claim_id,
            "label": self.label.value,
            "rationale": self.rationale,
            "evidence": self.evidence,
            "raw_response": self.raw_response,
            "parser_confidence": self.parser_confidence.value,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "Verdict":
        return cls(
            d["claim_id"],
            VerdictLabel(d["label"]),
            d.get("rationale", ""),
            d.get("evidence", []),
            d.get("raw_response", ""),
            ParserConfidence(d.get("parser_confidence", "Fallback")),
        )


LABEL_DEFINITIONS = """\
- Supported: the premises confirm the claim.
- PartiallySupported: the premises confirm the claim only in part or under qualifications.
- Contradicted: the premises provide evidence against the claim.
- Undetermined: the premises do not resolve the claim, or the claim is subjective."""


@lru_cache(maxsize=None)
def _load_template(path: str | None) -> str:
    if path is not None:
        return Path(path).read_text(encoding="utf-8")
    return (
        resources.files("peerispect.data").joinpath("nli_prompt.txt").read_text(encoding="utf-8")
    )


def build_nli_prompt(claim, evidence: list[Passage], template_path: str | None = None) -> str:
    """Deterministic prompt: numbered premises in rank order, hypothesis, labels.

    `claim` may be a Claim object or a plain string. With no evidence the
    premises section reads NONE.
    """
    hypothesis = getattr(claim, "text", None) or str(claim)
    if evidence:
        premises = "\n".join(f"{i}. {p.text}" for i, p in enumerate(evidence, 1))
    else:
        premises = "NONE"
    return _load_template(template_path).format(
        premises=premises, hypothesis=hypothesis, labels=LABEL_DEFINITIONS
    )


_EXACT_LABEL_RE = re.compile(
    r"^\s*label\s*:\s*(partially\s*supported|supported|contradicted|undetermined)\s*[.!]?\s*$",
    re.IGNORECASE,
)

_FUZZY_PATTERNS = (
    (VerdictLabel.PartiallySupported, re.compile(r"partially\s*supported", re.IGNORECASE)),
    (VerdictLabel.Contradicted, re.compile(r"contradicted", re.IGNORECASE)),
    (VerdictLabel.Undetermined, re.compile(r"undetermined", re.IGNORECASE)),
    (VerdictLabel.Supported, re.compile(r"supported", re.IGNORECASE)),
)


def _canonical(phrase: str) -> VerdictLabel:
    collapsed = re.sub(r"\s+", "", phrase.lower())
    return {
        "partiallysupported": VerdictLabel.PartiallySupported,
        "supported": VerdictLabel.Supported,
        "contradicted": VerdictLabel.Contradicted,
        "undetermined": VerdictLabel.Undetermined,
    }[collapsed]


def parse_label(raw: str) -> tuple[VerdictLabel, ParserConfidence]:
    """Total parser for verifier responses.

    Exact `LABEL: X` on the first line wins. Otherwise the four label
    phrases are searched case-insensitively and the earliest match is
    taken, except that any occurrence of "partially supported" masks all
    bare "supported" matches, so a partial verdict is never misread as
    Supported. Anything else parses as (Undetermined, Fallback).
    """
    if raw:
        first_line = raw.splitlines()[0]
        m = _EXACT_LABEL_RE.match(first_line)
        if m:
            return _canonical(m.group(1)), ParserConfidence.Exact

    matches: list[tuple[int, int, VerdictLabel]] = []
    has_partial = bool(raw) and _FUZZY_PATTERNS[0][1].search(raw)
    for priority, (label, pattern) in enumerate(_FUZZY_PATTERNS):
        if label is VerdictLabel.Supported and has_partial:
            continue
        m = pattern.search(raw or "")
        if m:
            matches.append((m.start(), priority, label))
    if matches:
        matches.sort()
        return matches[0][2], ParserConfidence.Fuzzy
    return VerdictLabel.Undetermined, ParserConfidence.Fallback


def verify(
    claim,
    evidence: list[EvidenceHit],
    doc: Document,
    generator,
    *,
    claim_id: str | None = None,
    params: GenerationParams | None = None,
    template_path: str | None = None,
) -> Verdict:
    """Verify one claim against its retrieved evidence.

    Empty evidence short-circuits to Undetermined without touching the
    backend. Backend failures yield Undetermined with the error noted in
    the rationale; the raw response is retained whenever a call succeeded.
    """
    claim_id = claim_id if claim_id is not None else getattr(claim, "claim_id", "")
    if not evidence:
        return Verdict(
            claim_id=claim_id,
            label=VerdictLabel.Undetermined,
            rationale="no grounding evidence was retrieved",
            evidence=[],
            raw_response="",
            parser_confidence=ParserConfidence.Fallback,
        )

    passage_map = doc.passage_map()
    passages = [passage_map[h.passage_id] for h in evidence]
    evidence_ids = [h.passage_id for h in evidence]
    prompt = build_nli_prompt(claim, passages, template_path)
    try:
        raw = generator.generate(prompt, params or GenerationParams())
    except Exception as exc:
        return Verdict(
            claim_id=claim_id,
            label=VerdictLabel.Undetermined,
            rationale=f"verifier backend failed: {exc}",
            evidence=evidence_ids,
            raw_response="",
            parser_confidence=ParserConfidence.Fallback,
        )

    label, confidence = parse_label(raw)
    if confidence is ParserConfidence.Exact:
        rationale = "\n".join(raw.splitlines()[1:]).strip()
    else:
        rationale = raw.strip()
    return Verdict(
        claim_id=claim_id,
        label=label,
        rationale=rationale,
        evidence=evidence_ids,
        raw_response=raw,
        parser_confidence=confidence,
    )
