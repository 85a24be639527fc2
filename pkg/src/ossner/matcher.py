"""Stage 1 auto-annotation: exact whole-token dictionary matching.

URLs are masked first, every dictionary phrase hit outside the mask
becomes a candidate, stopword and rejector surfaces are pruned, and
overlaps are resolved longest-match-first.  Matching is pure given the
dictionary and config, so corpora can be annotated in parallel.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from typing import Iterable, Optional, Sequence

from .core import (
    Document,
    LabeledDataset,
    LabeledExample,
    Provenance,
    Span,
    spans_to_tags,
)
from .dictionary import Dictionary, default_stopwords

#: Scheme- or www-prefixed non-whitespace runs.
DEFAULT_URL_PATTERN = r"(?:https?://|ftp://|www\.)\S+"


@dataclass(frozen=True)
class MatchConfig:
    url_pattern: str = DEFAULT_URL_PATTERN
    stopwords: frozenset[str] = field(default_factory=default_stopwords)
    regex_rejectors: tuple[str, ...] = ()

    def __post_init__(self):
        re.compile(self.url_pattern)
        for pattern in self.regex_rejectors:
            re.compile(pattern)
        object.__setattr__(self, "stopwords", frozenset(w.lower() for w in self.stopwords))


def strip_urls(doc: Document, cfg: Optional[MatchConfig] = None) -> set[int]:
    """Token indices overlapping any URL match; those tokens are
    ineligible for annotation."""
    cfg = cfg or MatchConfig()
    masked: set[int] = set()
    for match in re.finditer(cfg.url_pattern, doc.text):
        for i, token in enumerate(doc.tokens):
            if token.char_start < match.end() and match.start() < token.char_end:
                masked.add(i)
    return masked


def span_priority(span: Span) -> tuple[int, int, str]:
    """Sort key: longest first, then earliest start, then entity code."""
    return (-span.length, span.token_start, span.entity_type.value)


def resolve_overlaps(candidates: Iterable[Span]) -> list[Span]:
    """Greedy longest-match resolution.

    Repeatedly keep the highest-priority remaining candidate and discard
    everything overlapping it; output is pairwise disjoint and sorted by
    start position.
    """
    remaining = sorted(candidates, key=span_priority)
    kept: list[Span] = []
    for span in remaining:
        if not any(span.overlaps(k) for k in kept):
            kept.append(span)
    return sorted(kept, key=lambda s: s.token_start)


def _candidates(doc: Document, dictionary: Dictionary, cfg: MatchConfig) -> list[Span]:
    masked = strip_urls(doc, cfg)
    lowered = [t.surface.lower() for t in doc.tokens]
    n = len(lowered)
    found: list[Span] = []
    for start in range(n):
        if start in masked:
            continue
        max_len = min(dictionary.max_phrase_len, n - start)
        for length in range(1, max_len + 1):
            end = start + length
            if end - 1 in masked:
                break
            for etype in dictionary.query(lowered[start:end]):
                found.append(Span(start, end, etype, Provenance.DICTIONARY))
    return found


def _prune(doc: Document, candidates: list[Span], cfg: MatchConfig) -> list[Span]:
    kept = []
    for span in candidates:
        surface = doc.span_surface(span)
        if surface.lower() in cfg.stopwords:
            continue
        if any(re.fullmatch(p, surface) for p in cfg.regex_rejectors):
            continue
        kept.append(span)
    return kept


def match_document(
    doc: Document, dictionary: Dictionary, cfg: Optional[MatchConfig] = None
) -> list[Span]:
    """All exact dictionary hits in the document, resolved to a disjoint
    span set.

    Hits must align with token boundaries, so a surface occurring as a
    subword of a longer token ("Desktop" inside "CurrentDesktop") never
    matches.
    """
    cfg = cfg or MatchConfig()
    candidates = _prune(doc, _candidates(doc, dictionary, cfg), cfg)
    return resolve_overlaps(candidates)


@dataclass
class MatchStats:
    documents: int = 0
    documents_with_hits: int = 0
    spans_per_type: dict = field(default_factory=dict)
    failures: list = field(default_factory=list)

    def to_json(self) -> dict:
        return {
            "documents": self.documents,
            "documents_with_hits": self.documents_with_hits,
            "spans_per_type": dict(sorted(self.spans_per_type.items())),
            "failures": list(self.failures),
        }


def annotate_corpus(
    corpus: Sequence[Document],
    dictionary: Dictionary,
    cfg: Optional[MatchConfig] = None,
) -> tuple[LabeledDataset, MatchStats]:
    """Run Stage 1 over a corpus; per-document failures are recorded,
    never fatal."""
    cfg = cfg or MatchConfig()
    stats = MatchStats()
    items: list[LabeledExample] = []
    for doc in corpus:
        stats.documents += 1
        try:
            spans = match_document(doc, dictionary, cfg)
        except Exception as exc:  # per-document failure record
            stats.failures.append({"doc_id": doc.id, "error": str(exc)})
            items.append(LabeledExample(doc, ["O"] * len(doc.tokens)))
            continue
        if spans:
            stats.documents_with_hits += 1
        for span in spans:
            code = span.entity_type.value
            stats.spans_per_type[code] = stats.spans_per_type.get(code, 0) + 1
        items.append(LabeledExample(doc, spans_to_tags(doc, spans)))
    return LabeledDataset(items, name="stage1"), stats
