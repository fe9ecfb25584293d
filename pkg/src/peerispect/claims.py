"""Check-worthy claim extraction from review sentences.

Three steps per sentence: decomposition into candidate spans (rule-based
conjunction splitting first, then an optional generator pass), a
check-worthiness score that filters opinion/rhetoric, and normalization
(hedge removal rule-based, reference resolution via the generator). Every
model-dependent step degrades to its rule-based part when the backend is
unavailable, and the output is flagged rather than dropped.
"""

from __future__ import annotations

import logging
import re
from dataclasses import dataclass
from enum import Enum
from functools import lru_cache
from importlib import resources

from .ingestion import Review
from .retrieval import tokenize

logger = logging.getLogger(__name__)


class Provenance(str, Enum):
    RuleBased = "RuleBased"
    ModelBacked = "ModelBacked"


@dataclass
class Claim:
    claim_id: str
    review_id: str
    text: str
    source_sentence_id: str
    source_char_span: tuple[int, int]
    checkworthiness: float
    provenance: Provenance
    degraded: bool = False

    def to_dict(self) -> dict:
        return {
            "claim_id": self.claim_id,
            "review_id": self.review_id,
            "text": self.text,
            "source_sentence_id": self.source_sentence_id,
            "source_char_span": list(self.source_char_span),
            "checkworthiness": self.checkworthiness,
            "provenance": self.provenance.value,
            "degraded": self.degraded,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "Claim":
        return cls(
            d["claim_id"],
            d["review_id"],
            d["text"],
            d["source_sentence_id"],
            tuple(d["source_char_span"]),
            d["checkworthiness"],
            Provenance(d["provenance"]),
            d.get("degraded", False),
        )


def _load_lexicon(name: str) -> tuple[str, ...]:
    text = resources.files("peerispect.data").joinpath(name).read_text(encoding="utf-8")
    entries = [
        line.strip().lower()
        for line in text.splitlines()
        if line.strip() and not line.startswith("#")
    ]
    return tuple(entries)


@lru_cache(maxsize=None)
def hedge_phrases() -> tuple[str, ...]:
    """Hedge phrases, longest first so multiword hedges win."""
    return tuple(sorted(_load_lexicon("hedges.txt"), key=len, reverse=True))


@lru_cache(maxsize=None)
def opinion_words() -> frozenset[str]:
    return frozenset(_load_lexicon("opinion_words.txt"))


STOPWORDS = frozenset(
    """a an the is are was were be been being am do does did has have had it its
    this that these those there here i we you he she they them his her our their
    of in on at to for with by from as and or but not no nor so if then than too
    very can could will would should may might must about into over under more
    most some any each such only also just up out own same what which who whom
    when where why how""".split()
)


def content_tokens(text: str) -> list[str]:
    return [t for t in tokenize(text) if t not in STOPWORDS]


# ---------------------------------------------------------------------------
# Check-worthiness
# ---------------------------------------------------------------------------

_REFERENT_WORDS = frozenset({
    "section", "sections", "sec", "table", "tables", "tab", "figure", "figures",
    "fig", "figs", "equation", "equations", "eq", "eqs", "theorem", "thm",
    "lemma", "lem", "proposition", "prop", "corollary", "algorithm", "alg",
    "appendix", "appendices", "footnote", "line", "page", "dataset", "baseline",
    "baselines", "benchmark",
})

_IMPERATIVE_VERBS = frozenset({
    "please", "add", "consider", "provide", "include", "remove", "clarify",
    "explain", "compare", "report", "fix", "improve", "show", "discuss",
    "address", "cite", "define", "justify", "use", "avoid", "rewrite",
    "check", "correct", "move", "merge", "shorten", "expand", "elaborate",
})

_QUOTED_RE = re.compile(r"\"[^\"]+\"|“[^”]+”|'[^']{2,}'")


def _has_concrete_referent(text: str) -> bool:
    if any(ch.isdigit() for ch in text):
        return True
    if any(t in _REFERENT_WORDS for t in tokenize(text)):
        return True
    if _QUOTED_RE.search(text):
        return True
    # named method: a capitalized or all-caps token past the first word
    words = text.split()
    for word in words[1:]:
        core = word.strip("\"'.,;:!?()[]{}“”‘’")
        if len(core) >= 2 and (core[0].isupper() and not core.isupper() or core.isupper()):
            if core[0].isalpha():
                return True
    return False


def _opinion_dominated(text: str) -> bool:
    content = content_tokens(text)
    if not content:
        return False
    hits = sum(1 for t in content if t in opinion_words())
    return hits >= 1 and hits / len(content) >= 0.5


def _is_interrogative(text: str) -> bool:
    return "?" in text


def _is_imperative(text: str) -> bool:
    words = tokenize(text)
    return bool(words) and words[0] in _IMPERATIVE_VERBS


def classify_checkworthy(candidate: str) -> float:
    """Rule-based check-worthiness in [0, 1]; total on non-empty input.

    Starts at 0.5. Concrete referents (numbers, section/table/figure/equation
    mentions, named methods, quoted phrases) add 0.25; a candidate dominated
    by opinion-lexicon words with no referent loses 0.4; interrogatives and
    imperatives lose 0.5. Clamped to [0, 1].
    """
    score = 0.5
    referent = _has_concrete_referent(candidate)
    if referent:
        score += 0.25
    elif _opinion_dominated(candidate):
        score -= 0.4
    if _is_interrogative(candidate) or _is_imperative(candidate):
        score -= 0.5
    return max(0.0, min(1.0, score))


class RuleBasedScorer:
    def score(self, candidate: str) -> float:
        return classify_checkworthy(candidate)


_NUMBER_RE = re.compile(r"\d+(?:\.\d+)?")

_CHECKWORTHY_PROMPT = (
    "Rate from 0 to 100 how check-worthy this review statement is, where "
    "check-worthy means it asserts a verifiable fact about the manuscript "
    "rather than opinion or a request. Respond with the number only.\n\n"
    "Statement: {candidate}"
)


class ModelBackedScorer:
    """Optional plug-in scorer that asks a generation backend for a rating.

    Falls back to the rule-based score when the response has no number or
    the backend fails.
    """

    def __init__(self, generator):
        self.generator = generator

    def score(self, candidate: str) -> float:
        try:
            raw = self.generator.generate(_CHECKWORTHY_PROMPT.format(candidate=candidate))
        except Exception:
            return classify_checkworthy(candidate)
        m = _NUMBER_RE.search(raw)
        if m is None:
            return classify_checkworthy(candidate)
        return max(0.0, min(1.0, float(m.group()) / 100.0))


# ---------------------------------------------------------------------------
# Decomposition
# ---------------------------------------------------------------------------

_VERB_CUES = frozenset({
    "is", "are", "was", "were", "be", "been", "has", "have", "had", "does",
    "do", "did", "can", "could", "will", "would", "should", "must", "may",
    "might", "lacks", "lack", "seems", "seem", "appears", "appear", "fails",
    "fail", "shows", "show", "reports", "report", "uses", "use", "used",
    "provides", "provide", "contains", "contain", "ignores", "ignore",
    "misses", "miss", "needs", "need", "includes", "include", "omits", "omit",
    "outperforms", "improves", "remains", "remain", "holds", "hold", "works",
    "work", "requires", "require", "relies", "rely", "depends", "depend",
})

_CONJUNCTION_RE = re.compile(r",?\s+(?:and|but)\s+", re.IGNORECASE)


def _clausal(part: str) -> bool:
    words = tokenize(part)
    return len(words) >= 3 and any(w in _VERB_CUES for w in words)


def _tidy_candidate(text: str) -> str:
    text = text.strip().strip(",;").strip()
    if not text:
        return ""
    if text[0].islower():
        text = text[0].upper() + text[1:]
    if text[-1] not in ".!?":
        text += "."
    return text


def _split_conjunctions(text: str) -> list[str]:
    for m in _CONJUNCTION_RE.finditer(text):
        left, right = text[: m.start()], text[m.end():]
        if _clausal(left) and _clausal(right):
            return _split_conjunctions(left) + _split_conjunctions(right)
    return [text]


def rule_split(sentence: str) -> list[str]:
    """Conjunction splitting: semicolons always split; "and"/"but" split only
    when both sides look clausal (>= 3 tokens, each containing a verb cue)."""
    parts: list[str] = []
    for piece in sentence.split(";"):
        parts.extend(_split_conjunctions(piece))
    tidied = [_tidy_candidate(p) for p in parts]
    return [t for t in tidied if t] or [_tidy_candidate(sentence) or sentence]


_DECOMPOSE_PROMPT = (
    "Split the statement into minimal standalone claims, each asserting "
    "exactly one fact. Answer with one claim per line, prefixed with \"- \". "
    "If it already asserts a single fact, repeat it as the only line.\n\n"
    "Context: {context}\n\nStatement: {statement}"
)


@dataclass
class DecomposeResult:
    candidates: list[str]
    degraded: bool = False
    model_split: bool = False


def _parse_listed(raw: str) -> list[str]:
    return [
        line[2:].strip()
        for line in raw.splitlines()
        if line.startswith("- ") and line[2:].strip()
    ]


def decompose_sentence(sentence: str, context: str = "", generator=None) -> DecomposeResult:
    """Split a review sentence into candidate claim strings (always >= 1).

    Rules run first; the generator may then split each part further. On a
    backend failure the whole sentence is returned as the single candidate
    with the degraded flag set.
    """
    parts = rule_split(sentence)
    if generator is None:
        return DecomposeResult(parts)

    candidates: list[str] = []
    model_split = False
    for part in parts:
        try:
            raw = generator.generate(
                _DECOMPOSE_PROMPT.format(context=context or "NONE", statement=part)
            )
        except Exception as exc:
            logger.warning("decomposition backend failed: %s", exc)
            return DecomposeResult([sentence], degraded=True)
        listed = [_tidy_candidate(c) for c in _parse_listed(raw)]
        listed = [c for c in listed if c]
        if len(listed) >= 2:
            candidates.extend(listed)
            model_split = True
        else:
            candidates.append(part)
    return DecomposeResult(candidates, model_split=model_split)


# ---------------------------------------------------------------------------
# Normalization
# ---------------------------------------------------------------------------

_DECONTEXT_PROMPT = (
    "Rewrite the claim so it stands alone: resolve pronouns and references "
    "using the context, keep the meaning unchanged, and do not add facts. "
    "Answer with exactly one line of the form:\nREWRITE: <claim>\n\n"
    "Context: {context}\n\nClaim: {claim}"
)

_REWRITE_RE = re.compile(r"^\s*REWRITE:\s*(.+?)\s*$", re.MULTILINE)


def strip_hedges(text: str) -> str:
    result = text
    for phrase in hedge_phrases():
        pattern = re.compile(r"\b" + re.escape(phrase) + r"\b", re.IGNORECASE)
        result = pattern.sub(" ", result)
    result = re.sub(r"\s+", " ", result)
    result = re.sub(r"\s+([.,;:!?])", r"\1", result)
    result = re.sub(r"^[\s,;:]+", "", result)
    result = re.sub(r",\s*,", ",", result)
    return _tidy_candidate(result) or text


@dataclass
class NormalizeResult:
    text: str
    degraded: bool = False
    model_resolved: bool = False


def normalize_claim(candidate: str, context: str = "", generator=None) -> NormalizeResult:
    """Hedge removal (rule-based) plus generator-backed decontextualization.

    Without a usable rewrite from the generator, references are left
    unresolved and the hedge-stripped text is returned.
    """
    base = strip_hedges(candidate)
    if generator is None:
        return NormalizeResult(base)
    try:
        raw = generator.generate(
            _DECONTEXT_PROMPT.format(context=context or "NONE", claim=base)
        )
    except Exception as exc:
        logger.warning("decontextualization backend failed: %s", exc)
        return NormalizeResult(base, degraded=True)
    m = _REWRITE_RE.search(raw)
    if m is None:
        return NormalizeResult(base)
    rewritten = _tidy_candidate(m.group(1))
    if not rewritten or rewritten.endswith("?"):
        return NormalizeResult(base)
    return NormalizeResult(rewritten, model_resolved=True)


# ---------------------------------------------------------------------------
# Stage composition
# ---------------------------------------------------------------------------


def extract_claims(
    review: Review,
    generator=None,
    threshold: float = 0.5,
    scorer=None,
    context_window: int = 3,
) -> list[Claim]:
    """decompose -> classify -> filter -> normalize, preserving review order.

    A failing sentence never aborts the review; its claims carry the
    degraded flag instead.
    """
    scorer = scorer or RuleBasedScorer()
    claims: list[Claim] = []
    for idx, sentence in enumerate(review.sentences):
        context = " ".join(
            s.text for s in review.sentences[max(0, idx - context_window): idx]
        )
        decomposed = decompose_sentence(sentence.text, context, generator)
        for candidate in decomposed.candidates:
            score = scorer.score(candidate)
            if score < threshold:
                continue
            normalized = normalize_claim(candidate, context, generator)
            if not tokenize(normalized.text):
                continue
            model_backed = decomposed.model_split or normalized.model_resolved
            claims.append(
                Claim(
                    claim_id=f"{review.review_id}:c{len(claims)}",
                    review_id=review.review_id,
                    text=normalized.text,
                    source_sentence_id=sentence.sentence_id,
                    source_char_span=(sentence.char_start, sentence.char_end),
                    checkworthiness=score,
                    provenance=Provenance.ModelBacked if model_backed else Provenance.RuleBased,
                    degraded=decomposed.degraded or normalized.degraded,
                )
            )
    return claims
