"""Manuscript and review ingestion: passage segmentation and sentence splitting.

Manuscripts are chunked into fixed-length token windows with overlap; reviews
are split into sentences. Both keep exact character offsets into the source
text so downstream consumers can highlight evidence in place.
"""

from __future__ import annotations

import hashlib
import re
from dataclasses import dataclass, field

from .errors import EmptyInput, InvalidConfig

_TOKEN_RE = re.compile(r"\S+")

# Periods after these tokens never end a sentence (token compared lowercase,
# without its trailing period).
_ABBREVIATIONS = frozenset({
    "e.g", "i.e", "etc", "et", "al", "cf", "vs", "viz", "resp", "approx",
    "fig", "figs", "eq", "eqs", "sec", "secs", "tab", "tabs", "thm", "lem",
    "prop", "alg", "def", "ch", "chap", "no", "nos", "pp", "vol",
    "dr", "prof", "mr", "mrs", "ms",
})

_BULLET_RE = re.compile(r"^[ \t]*(?:[-*•]+|\d{1,3}[.)])[ \t]+", re.MULTILINE)

_SENTENCE_CLOSERS = "\"'”’)]"


def fingerprint(text: str) -> str:
    """Short stable hex id for a piece of text."""
    return hashlib.sha256(text.encode("utf-8")).hexdigest()[:12]


def token_spans(text: str) -> list[tuple[int, int]]:
    """Character spans of whitespace-delimited tokens, in order."""
    return [(m.start(), m.end()) for m in _TOKEN_RE.finditer(text)]


@dataclass(frozen=True)
class ChunkConfig:
    """Sliding-window chunking parameters (token-based, model-independent)."""

    size_tokens: int = 180
    overlap_tokens: int = 30
    tokenizer: str = "whitespace"

    def validate(self) -> None:
        if self.size_tokens <= 0:
            raise InvalidConfig("size_tokens must be positive")
        if self.overlap_tokens < 0:
            raise InvalidConfig("overlap_tokens must be non-negative")
        if self.overlap_tokens >= self.size_tokens:
            raise InvalidConfig(
                f"overlap_tokens ({self.overlap_tokens}) must be smaller than "
                f"size_tokens ({self.size_tokens})"
            )
        if self.tokenizer != "whitespace":
            raise InvalidConfig(f"unknown tokenizer scheme {self.tokenizer!r}")

    def fingerprint(self) -> str:
        return fingerprint(f"{self.size_tokens}:{self.overlap_tokens}:{self.tokenizer}")


@dataclass
class Passage:
    passage_id: str
    text: str
    char_start: int
    char_end: int
    ordinal: int

    def to_dict(self) -> dict:
        return {
            "passage_id": self.passage_id,
            "text": self.text,
            "char_start": self.char_start,
            "char_end": self.char_end,
            "ordinal": self.ordinal,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "Passage":
        return cls(d["passage_id"], d["text"], d["char_start"], d["char_end"], d["ordinal"])


@dataclass
class Document:
    doc_id: str
    title: str
    full_text: str
    passages: list[Passage] = field(default_factory=list)

    def passage_map(self) -> dict[str, Passage]:
        return {p.passage_id: p for p in self.passages}

    def to_dict(self) -> dict:
        return {
            "doc_id": self.doc_id,
            "title": self.title,
            "full_text": self.full_text,
            "passages": [p.to_dict() for p in self.passages],
        }

    @classmethod
    def from_dict(cls, d: dict) -> "Document":
        return cls(
            d["doc_id"],
            d.get("title", ""),
            d["full_text"],
            [Passage.from_dict(p) for p in d.get("passages", [])],
        )


@dataclass
class Sentence:
    sentence_id: str
    text: str
    char_start: int
    char_end: int


@dataclass
class Review:
    review_id: str
    paper_id: str
    raw_text: str
    sentences: list[Sentence] = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "review_id": self.review_id,
            "paper_id": self.paper_id,
            "raw_text": self.raw_text,
            "sentences": [
                {
                    "sentence_id": s.sentence_id,
                    "text": s.text,
                    "char_start": s.char_start,
                    "char_end": s.char_end,
                }
                for s in self.sentences
            ],
        }

    @classmethod
    def from_dict(cls, d: dict) -> "Review":
        return cls(
            d["review_id"],
            d.get("paper_id", ""),
            d["raw_text"],
            [
                Sentence(s["sentence_id"], s["text"], s["char_start"], s["char_end"])
                for s in d.get("sentences", [])
            ],
        )


def segment_document(
    full_text: str,
    cfg: ChunkConfig | None = None,
    *,
    doc_id: str | None = None,
    title: str = "",
) -> Document:
    """Chunk a manuscript into overlapping fixed-length token windows.

    Windows start at 0, stride, 2*stride, ... with stride = size - overlap;
    each window covers [s, min(s + size, N)) tokens mapped back to character
    offsets. Emission stops with the first window whose end reaches the final
    token, so consecutive passages overlap by exactly the configured number
    of tokens and only the last passage may be shorter.
    """
    cfg = cfg or ChunkConfig()
    cfg.validate()
    if not full_text or not full_text.strip():
        raise EmptyInput("document text is empty")

    spans = token_spans(full_text)
    n_tokens = len(spans)
    stride = cfg.size_tokens - cfg.overlap_tokens
    doc_id = doc_id or fingerprint(full_text)

    passages: list[Passage] = []
    start = 0
    while True:
        end = min(start + cfg.size_tokens, n_tokens)
        char_start = spans[start][0]
        char_end = spans[end - 1][1]
        ordinal = len(passages)
        passages.append(
            Passage(
                passage_id=f"{doc_id}:p{ordinal}",
                text=full_text[char_start:char_end],
                char_start=char_start,
                char_end=char_end,
                ordinal=ordinal,
            )
        )
        if end >= n_tokens:
            break
        start += stride

    return Document(doc_id=doc_id, title=title, full_text=full_text, passages=passages)


def _protected_period(text: str, period_idx: int) -> bool:
    """True when the period at period_idx belongs to an abbreviation or initial."""
    t = period_idx
    while t > 0 and not text[t - 1].isspace():
        t -= 1
    token = text[t:period_idx].lstrip("([\"'“‘")
    if not token:
        return False
    low = token.lower()
    if low in _ABBREVIATIONS:
        return True
    # single-letter initials: "J. Smith"
    return len(token) == 1 and token.isalpha()


def _split_segment(text: str, seg_start: int, seg_end: int) -> list[tuple[int, int]]:
    spans: list[tuple[int, int]] = []
    i = seg_start
    while i < seg_end and text[i].isspace():
        i += 1
    sent_start = i
    depth = 0
    while i < seg_end:
        ch = text[i]
        if ch in "([{":
            depth += 1
        elif ch in ")]}":
            depth = max(0, depth - 1)
        elif ch in ".!?" and depth == 0:
            # absorb terminator runs ("?!") and trailing quotes/brackets
            j = i
            while j + 1 < seg_end and text[j + 1] in ".!?" + _SENTENCE_CLOSERS:
                j += 1
            k = j + 1
            while k < seg_end and text[k].isspace():
                k += 1
            protected = ch == "." and j == i and _protected_period(text, i)
            starts_new = k < seg_end and (
                text[k].isupper() or text[k] in "\"“‘(["
            )
            if not protected and k > j + 1 and starts_new:
                spans.append((sent_start, j + 1))
                i = sent_start = k
                continue
            i = j
        i += 1
    if sent_start < seg_end:
        trailing = text[sent_start:seg_end].rstrip()
        if trailing:
            spans.append((sent_start, sent_start + len(trailing)))
    return spans


def split_sentences(text: str) -> list[tuple[int, int]]:
    """Character spans of sentences in text.

    Splits on terminal punctuation followed by whitespace and a capital,
    protecting abbreviations, initials, decimal numbers (no whitespace after
    the period) and bracketed spans. Bullet / numbered list items are hard
    boundaries; the marker itself is excluded from the span.
    """
    marks = list(_BULLET_RE.finditer(text))
    segments: list[tuple[int, int]] = []
    if not marks:
        segments.append((0, len(text)))
    else:
        if marks[0].start() > 0:
            segments.append((0, marks[0].start()))
        for idx, m in enumerate(marks):
            seg_end = marks[idx + 1].start() if idx + 1 < len(marks) else len(text)
            segments.append((m.end(), seg_end))

    spans: list[tuple[int, int]] = []
    for seg_start, seg_end in segments:
        spans.extend(_split_segment(text, seg_start, seg_end))
    return spans


def normalize_review(
    raw_text: str,
    *,
    review_id: str | None = None,
    paper_id: str = "",
) -> Review:
    """Split review text into sentences with exact character offsets."""
    if not raw_text or not raw_text.strip():
        raise EmptyInput("review text is empty")
    review_id = review_id or fingerprint(raw_text)
    sentences = [
        Sentence(
            sentence_id=f"s{idx}",
            text=raw_text[start:end],
            char_start=start,
            char_end=end,
        )
        for idx, (start, end) in enumerate(split_sentences(raw_text))
    ]
    return Review(review_id=review_id, paper_id=paper_id, raw_text=raw_text, sentences=sentences)
