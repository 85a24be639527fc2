"""Core data types shared by every pipeline stage.

Documents are token sequences with character offsets, annotations are
half-open token spans, and per-token labels use the IO scheme: ``O`` plus
one inside tag per entity type.  All types are immutable after
construction and safe to share across threads.
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass, field, replace
from datetime import date
from enum import Enum
from pathlib import Path
from typing import Iterable, Iterator, Optional


class EntityType(str, Enum):
    PKG = "PKG"
    OS = "OS"
    ORG = "ORG"
    CMD = "CMD"
    ERR = "ERR"
    EXT = "EXT"
    PRP = "PRP"
    SOC = "SOC"
    ARC = "ARC"


#: Entity codes in canonical (alphabetical) order, used for tie-breaking.
ENTITY_CODES = sorted(e.value for e in EntityType)

#: The full tag alphabet: O first, then inside tags in canonical order.
TAGS = ["O"] + [f"I_{code}" for code in ENTITY_CODES]

#: Rank of each tag under the canonical order (O smallest).
TAG_ORDER = {tag: i for i, tag in enumerate(TAGS)}


def tag_for(entity_type: EntityType) -> str:
    return f"I_{entity_type.value}"


def type_for(tag: str) -> EntityType:
    if not tag.startswith("I_"):
        raise InvalidTagError(f"not an inside tag: {tag!r}")
    return EntityType(tag[2:])


class PipelineError(ValueError):
    """Base class for contract violations raised by this package."""


class InvalidTagError(PipelineError):
    pass


class OverlapError(PipelineError):
    """Raised when spans that must be disjoint overlap."""


class ConflictError(PipelineError):
    """Raised when two labels disagree about the identical (doc, span)."""


class FormatError(PipelineError):
    """Malformed input file; carries a line number when known."""

    def __init__(self, message: str, line: Optional[int] = None):
        self.line = line
        super().__init__(f"line {line}: {message}" if line else message)


class Provenance(str, Enum):
    DICTIONARY = "dictionary"
    HEURISTIC = "heuristic"
    MODEL = "model"
    HUMAN = "human"


@dataclass(frozen=True)
class Token:
    surface: str
    char_start: int
    char_end: int
    pos: Optional[str] = None

    def __post_init__(self):
        if not self.char_start < self.char_end:
            raise PipelineError(
                f"empty token at [{self.char_start}, {self.char_end})"
            )


@dataclass(frozen=True)
class Span:
    token_start: int
    token_end: int
    entity_type: EntityType
    provenance: Provenance
    confidence: float = 1.0

    def __post_init__(self):
        if not 0 <= self.token_start < self.token_end:
            raise PipelineError(
                f"bad span range [{self.token_start}, {self.token_end})"
            )
        if not 0.0 <= self.confidence <= 1.0:
            raise PipelineError(f"confidence {self.confidence} outside [0, 1]")

    def overlaps(self, other: "Span") -> bool:
        return self.token_start < other.token_end and other.token_start < self.token_end

    @property
    def length(self) -> int:
        return self.token_end - self.token_start

    def key(self) -> tuple[int, int, EntityType]:
        return (self.token_start, self.token_end, self.entity_type)


@dataclass(frozen=True)
class Document:
    id: str
    text: str
    tokens: tuple[Token, ...]
    created_at: date
    source: str = "bug"
    metadata: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.source not in ("bug", "qa"):
            raise PipelineError(f"unknown source {self.source!r}")

    def surfaces(self) -> list[str]:
        return [t.surface for t in self.tokens]

    def span_surface(self, span: Span) -> str:
        """Raw text between the first and last token of the span."""
        if span.token_end > len(self.tokens):
            raise PipelineError(f"span {span.key()} outside document {self.id}")
        first = self.tokens[span.token_start]
        last = self.tokens[span.token_end - 1]
        return self.text[first.char_start : last.char_end]

    def with_pos(self, tags: list[str]) -> "Document":
        if len(tags) != len(self.tokens):
            raise PipelineError("POS tag count does not match token count")
        new_tokens = tuple(replace(t, pos=p) for t, p in zip(self.tokens, tags))
        return replace(self, tokens=new_tokens)


# A tag sequence is a plain list of strings over TAGS, one per token.
TagSequence = list


@dataclass(frozen=True)
class LabeledExample:
    document: Document
    tags: TagSequence

    def __post_init__(self):
        if len(self.tags) != len(self.document.tokens):
            raise PipelineError(
                f"tag/token length mismatch in document {self.document.id}"
            )


@dataclass
class LabeledDataset:
    items: list[LabeledExample]
    name: str = ""

    def __len__(self) -> int:
        return len(self.items)

    def doc_ids(self) -> list[str]:
        return [ex.document.id for ex in self.items]

    def find(self, doc_id: str) -> Optional[LabeledExample]:
        for ex in self.items:
            if ex.document.id == doc_id:
                return ex
        return None


# ---------------------------------------------------------------------------
# Tokenization
# ---------------------------------------------------------------------------

# Punctuation that stays inside a token when flanked by alphanumerics, so
# version strings ("18.04") and package names ("pypy-configparser") survive.
_INNER_PUNCT = frozenset(".-_/+")


def _is_word_char(chunk: str, i: int) -> bool:
    ch = chunk[i]
    if ch.isalnum():
        return True
    if ch in _INNER_PUNCT:
        before = any(c.isalnum() for c in chunk[:i])
        after = any(c.isalnum() for c in chunk[i + 1 :])
        return before and after
    return False


def tokenize(text: str) -> tuple[Token, ...]:
    """Split on whitespace, then detach leading/trailing punctuation.

    Every detached punctuation character becomes its own token.  The
    characters ``. - _ / +`` are kept inside a token when alphanumerics
    appear on both sides; any other internal punctuation splits the token.
    Offsets index into ``text`` and reconstruct each surface exactly.
    """
    tokens: list[Token] = []
    for match in re.finditer(r"\S+", text):
        chunk = match.group()
        base = match.start()
        run_start = None
        for i in range(len(chunk)):
            if _is_word_char(chunk, i):
                if run_start is None:
                    run_start = i
            else:
                if run_start is not None:
                    tokens.append(
                        Token(chunk[run_start:i], base + run_start, base + i)
                    )
                    run_start = None
                tokens.append(Token(chunk[i], base + i, base + i + 1))
        if run_start is not None:
            tokens.append(Token(chunk[run_start:], base + run_start, base + len(chunk)))
    return tuple(tokens)


def make_document(
    doc_id: str,
    text: str,
    created_at: date,
    source: str = "bug",
    metadata: Optional[dict] = None,
) -> Document:
    return Document(
        id=doc_id,
        text=text,
        tokens=tokenize(text),
        created_at=created_at,
        source=source,
        metadata=metadata or {},
    )


# ---------------------------------------------------------------------------
# Document validation
# ---------------------------------------------------------------------------

#: Bugs that merely point at another tracker's report carry no usable text.
DEFAULT_CROSSREF_PATTERN = r"(?is)\s*automatically\s+imported\s+from\b.*\bbug\s+report\b.*"

MIN_WORDS = 60
MAX_WORDS = 400


@dataclass(frozen=True)
class ValidationResult:
    accepted: bool
    reason: Optional[str] = None


def validate_document(
    doc: Document,
    min_words: int = MIN_WORDS,
    max_words: int = MAX_WORDS,
    crossref_pattern: str = DEFAULT_CROSSREF_PATTERN,
) -> ValidationResult:
    """Accept a document unless it is too short, too long, or is nothing
    but a cross-reference to another bug report.

    Word count means token count under :func:`tokenize`.
    """
    if crossref_pattern and re.fullmatch(crossref_pattern, doc.text):
        return ValidationResult(False, "cross_reference")
    n = len(doc.tokens)
    if n < min_words:
        return ValidationResult(False, "too_short")
    if n > max_words:
        return ValidationResult(False, "too_long")
    return ValidationResult(True)


# ---------------------------------------------------------------------------
# Spans <-> tags
# ---------------------------------------------------------------------------


def spans_to_tags(doc: Document, spans: Iterable[Span]) -> TagSequence:
    """Mark every token inside a span with that span's inside tag.

    Spans must be resolved (pairwise disjoint) beforehand.
    """
    tags = ["O"] * len(doc.tokens)
    ordered = sorted(spans, key=lambda s: (s.token_start, s.token_end))
    prev_end = 0
    for span in ordered:
        if span.token_end > len(doc.tokens):
            raise PipelineError(f"span {span.key()} outside document {doc.id}")
        if span.token_start < prev_end:
            raise OverlapError(f"unresolved overlap at {span.key()} in {doc.id}")
        prev_end = span.token_end
        inside = tag_for(span.entity_type)
        for i in range(span.token_start, span.token_end):
            tags[i] = inside
    return tags


def tags_to_spans(
    tags: TagSequence,
    provenance: Provenance = Provenance.MODEL,
    confidence: float = 1.0,
) -> list[Span]:
    """Turn maximal runs of one inside tag into spans.

    The IO scheme cannot separate adjacent same-type entities, so such
    runs merge into a single span.
    """
    spans: list[Span] = []
    start = None
    current = None
    for i, tag in enumerate(list(tags) + ["O"]):
        if tag not in TAG_ORDER:
            raise InvalidTagError(f"unknown tag {tag!r} at position {i}")
        if tag != current:
            if current is not None and current != "O":
                spans.append(
                    Span(start, i, type_for(current), provenance, confidence)
                )
            current = tag
            start = i
    return spans


# ---------------------------------------------------------------------------
# JSON Lines corpus and annotation files
# ---------------------------------------------------------------------------


def document_to_json(doc: Document) -> dict:
    return {
        "id": doc.id,
        "text": doc.text,
        "created_at": doc.created_at.isoformat(),
        "source": doc.source,
        "metadata": doc.metadata,
    }


def document_from_json(obj: dict) -> Document:
    return make_document(
        doc_id=obj["id"],
        text=obj["text"],
        created_at=date.fromisoformat(obj["created_at"]),
        source=obj.get("source", "bug"),
        metadata=obj.get("metadata") or {},
    )


def read_corpus(path: Path) -> list[Document]:
    docs = []
    seen = set()
    with open(path, encoding="utf-8") as handle:
        for lineno, line in enumerate(handle, start=1):
            if not line.strip():
                continue
            try:
                doc = document_from_json(json.loads(line))
            except (KeyError, ValueError) as exc:
                raise FormatError(str(exc), lineno) from exc
            if doc.id in seen:
                raise FormatError(f"duplicate document id {doc.id!r}", lineno)
            seen.add(doc.id)
            docs.append(doc)
    return docs


def write_corpus(path: Path, docs: Iterable[Document]) -> None:
    with open(path, "w", encoding="utf-8") as handle:
        for doc in docs:
            handle.write(json.dumps(document_to_json(doc), sort_keys=True) + "\n")


def span_to_json(doc_id: str, span: Span) -> dict:
    return {
        "doc_id": doc_id,
        "token_start": span.token_start,
        "token_end": span.token_end,
        "entity_type": span.entity_type.value,
        "provenance": span.provenance.value,
        "confidence": span.confidence,
    }


def span_from_json(obj: dict) -> tuple[str, Span]:
    span = Span(
        token_start=obj["token_start"],
        token_end=obj["token_end"],
        entity_type=EntityType(obj["entity_type"]),
        provenance=Provenance(obj["provenance"]),
        confidence=obj.get("confidence", 1.0),
    )
    return obj["doc_id"], span


def read_annotations(path: Path) -> dict[str, list[Span]]:
    """Load an annotation file into a doc-id keyed span map."""
    by_doc: dict[str, list[Span]] = {}
    with open(path, encoding="utf-8") as handle:
        for lineno, line in enumerate(handle, start=1):
            if not line.strip():
                continue
            try:
                doc_id, span = span_from_json(json.loads(line))
            except (KeyError, ValueError) as exc:
                raise FormatError(str(exc), lineno) from exc
            by_doc.setdefault(doc_id, []).append(span)
    return by_doc


def write_annotations(path: Path, spans_by_doc: dict[str, list[Span]]) -> None:
    with open(path, "w", encoding="utf-8") as handle:
        for doc_id in spans_by_doc:
            for span in spans_by_doc[doc_id]:
                handle.write(json.dumps(span_to_json(doc_id, span), sort_keys=True) + "\n")


def iter_examples(
    docs: Iterable[Document], spans_by_doc: dict[str, list[Span]]
) -> Iterator[LabeledExample]:
    for doc in docs:
        tags = spans_to_tags(doc, spans_by_doc.get(doc.id, []))
        yield LabeledExample(doc, tags)


def dataset_from_annotations(
    docs: Iterable[Document], spans_by_doc: dict[str, list[Span]], name: str = ""
) -> LabeledDataset:
    return LabeledDataset(list(iter_examples(docs, spans_by_doc)), name=name)
