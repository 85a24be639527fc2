"""Stage 2a entity distillation via POS-context rules.

Dictionary matching over-triggers on common words ("find" as a command,
"less" as a package).  A rule binds a surface, a (prev, self, next) POS
context, and the entity type it fires on; matching spans are demoted to
O and the demotion log can evict over-demoted surfaces from the
dictionary.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from pathlib import Path
from typing import Optional, Sequence

from .core import (
    Document,
    EntityType,
    FormatError,
    LabeledDataset,
    LabeledExample,
    Span,
    spans_to_tags,
    tags_to_spans,
)
from .dictionary import Dictionary
from .plugins import LineProtocolProcess, ProtocolError

log = logging.getLogger(__name__)

WILDCARD = "*"
BOS = "<BOS>"
EOS = "<EOS>"


@dataclass(frozen=True)
class PosRule:
    """Demote spans of ``from_type`` whose surface and POS context match.

    ``surface`` is lowercased; each slot may be the ``*`` wildcard but a
    rule must constrain something.
    """

    surface: str
    prev_pos: str
    self_pos: str
    next_pos: str
    from_type: EntityType

    def __post_init__(self):
        slots = (self.surface, self.prev_pos, self.self_pos, self.next_pos)
        if all(s == WILDCARD for s in slots):
            raise FormatError("rule with every slot wildcarded matches everything")

    def matches(self, surface: str, context: tuple[str, str, str]) -> bool:
        if self.surface != WILDCARD and self.surface != surface.lower():
            return False
        for want, got in zip((self.prev_pos, self.self_pos, self.next_pos), context):
            if want != WILDCARD and want != got:
                return False
        return True


def read_rules(path: Path) -> list[PosRule]:
    """TSV rows: surface, prev_pos, self_pos, next_pos, from_type."""
    rules = []
    with open(path, encoding="utf-8") as handle:
        for lineno, line in enumerate(handle, start=1):
            line = line.rstrip("\n")
            if not line.strip() or line.lstrip().startswith("#"):
                continue
            cols = [c.strip() for c in line.split("\t")]
            if len(cols) != 5:
                raise FormatError(f"expected 5 columns, got {len(cols)}", lineno)
            try:
                from_type = EntityType(cols[4])
            except ValueError:
                raise FormatError(f"unknown entity type {cols[4]!r}", lineno) from None
            rules.append(PosRule(cols[0].lower(), cols[1], cols[2], cols[3], from_type))
    return rules


# ---------------------------------------------------------------------------
# POS tagging
# ---------------------------------------------------------------------------

# Closed-class lexicon for the built-in fallback tagger.  Coverage targets
# the Penn tags the demotion rules use (DT/IN/NN/NNS/NNP/JJ/JJR/VB/CD).
_LEXICON = {
    "the": "DT", "a": "DT", "an": "DT", "this": "DT", "that": "DT",
    "these": "DT", "those": "DT", "some": "DT", "any": "DT", "no": "DT",
    "each": "DT", "every": "DT",
    "of": "IN", "in": "IN", "on": "IN", "at": "IN", "by": "IN", "for": "IN",
    "with": "IN", "from": "IN", "into": "IN", "onto": "IN", "over": "IN",
    "under": "IN", "while": "IN", "during": "IN", "before": "IN",
    "after": "IN", "between": "IN", "through": "IN", "against": "IN",
    "about": "IN", "across": "IN", "along": "IN", "around": "IN",
    "among": "IN", "within": "IN", "without": "IN", "upon": "IN",
    "since": "IN", "until": "IN", "unless": "IN", "than": "IN",
    "because": "IN", "if": "IN", "as": "IN", "per": "IN",
    "and": "CC", "or": "CC", "but": "CC", "nor": "CC", "so": "CC",
    "yet": "CC",
    "to": "TO",
    "not": "RB", "never": "RB", "also": "RB", "very": "RB", "too": "RB",
    "then": "RB", "still": "RB", "again": "RB",
    "i": "PRP", "you": "PRP", "he": "PRP", "she": "PRP", "it": "PRP",
    "we": "PRP", "they": "PRP", "me": "PRP", "him": "PRP", "them": "PRP",
    "can": "MD", "could": "MD", "may": "MD", "might": "MD", "must": "MD",
    "shall": "MD", "should": "MD", "will": "MD", "would": "MD",
    "is": "VBZ", "are": "VBP", "was": "VBD", "were": "VBD", "be": "VB",
    "been": "VBN", "being": "VBG", "am": "VBP",
    "has": "VBZ", "have": "VBP", "had": "VBD", "do": "VBP", "does": "VBZ",
    "did": "VBD",
    "find": "VB", "get": "VB", "make": "VB", "run": "VB", "install": "VB",
    "use": "VB", "see": "VB", "try": "VB", "go": "VB", "come": "VB",
    "take": "VB", "show": "VB", "fail": "VB", "fails": "VBZ", "want": "VB",
    "need": "VB", "work": "VB", "works": "VBZ", "start": "VB", "stop": "VB",
    "less": "JJR", "more": "JJR", "better": "JJR", "worse": "JJR",
    "fewer": "JJR", "greater": "JJR", "larger": "JJR", "smaller": "JJR",
    "new": "JJ", "old": "JJ", "good": "JJ", "bad": "JJ", "same": "JJ",
    "other": "JJ", "last": "JJ", "first": "JJ", "serious": "JJ",
    "optimal": "JJ", "remote": "JJ",
}


def _suffix_tag(word: str) -> str:
    if word[0].isdigit() or (word[0] in "+-." and len(word) > 1 and word[1].isdigit()):
        return "CD"
    if word[0].isupper():
        return "NNP"
    if word.endswith("ing") and len(word) > 4:
        return "VBG"
    if word.endswith("ed") and len(word) > 3:
        return "VBD"
    if word.endswith("ly") and len(word) > 3:
        return "RB"
    if word.endswith(("ous", "ful", "able", "ible", "ive", "al")) and len(word) > 4:
        return "JJ"
    if word.endswith("er") and len(word) > 4:
        return "JJR"
    if word.endswith("s") and not word.endswith(("ss", "us", "is")) and len(word) > 3:
        return "NNS"
    if not any(c.isalnum() for c in word):
        return "SYM"
    return "NN"


def builtin_pos_tags(surfaces: Sequence[str]) -> list[str]:
    """Lexicon + suffix fallback tagger; one Penn-style tag per token."""
    return [_LEXICON.get(w.lower(), _suffix_tag(w)) for w in surfaces]


class PosTaggerPlugin:
    """Out-of-process POS tagger: JSON array of surfaces in, array of tags
    out, one document per line.  Falls back to the built-in tagger when
    the plugin misbehaves."""

    def __init__(self, command: Optional[Sequence[str]] = None):
        self._proc = LineProtocolProcess(command) if command else None

    def tag(self, surfaces: Sequence[str]) -> list[str]:
        if self._proc is None:
            return builtin_pos_tags(surfaces)
        try:
            tags = self._proc.request(list(surfaces))
            if not isinstance(tags, list) or len(tags) != len(surfaces):
                raise ProtocolError(
                    f"expected {len(surfaces)} tags, got {tags!r}"
                )
            return [str(t) for t in tags]
        except ProtocolError as exc:
            log.warning("POS plugin failed (%s); using built-in tagger", exc)
            return builtin_pos_tags(surfaces)

    def close(self) -> None:
        if self._proc is not None:
            self._proc.close()


def pos_tag(doc: Document, tagger: Optional[PosTaggerPlugin] = None) -> Document:
    if not doc.tokens:
        return doc
    tagger = tagger or PosTaggerPlugin()
    return doc.with_pos(tagger.tag(doc.surfaces()))


# ---------------------------------------------------------------------------
# Rule application
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Demotion:
    doc_id: str
    span: Span
    surface: str
    rule: PosRule


def _context(doc: Document, index: int) -> tuple[str, str, str]:
    prev_pos = doc.tokens[index - 1].pos if index > 0 else BOS
    next_pos = doc.tokens[index + 1].pos if index + 1 < len(doc.tokens) else EOS
    return (prev_pos or BOS, doc.tokens[index].pos or "", next_pos or EOS)


def apply_pos_rules(
    dataset: LabeledDataset, rules: Sequence[PosRule]
) -> tuple[LabeledDataset, list[Demotion]]:
    """Demote rule-matching spans to O.

    Multi-token spans anchor on their first token's context.  Only
    demotions happen: no tag ever changes to anything but O, and a second
    application is a no-op.
    """
    demotions: list[Demotion] = []
    items: list[LabeledExample] = []
    for example in dataset.items:
        doc = example.document
        spans = tags_to_spans(example.tags)
        kept: list[Span] = []
        changed = False
        for span in spans:
            surface = doc.span_surface(span)
            context = _context(doc, span.token_start)
            hit = next(
                (
                    r
                    for r in rules
                    if r.from_type == span.entity_type
                    and r.matches(surface, context)
                ),
                None,
            )
            if hit is None:
                kept.append(span)
            else:
                demotions.append(Demotion(doc.id, span, surface, hit))
                changed = True
        if changed:
            items.append(LabeledExample(doc, spans_to_tags(doc, kept)))
        else:
            items.append(example)
    return LabeledDataset(items, name=dataset.name), demotions


def discard_entries(
    dictionary: Dictionary, demotions: Sequence[Demotion], threshold: int
) -> tuple[Dictionary, list[tuple[str, EntityType, int]]]:
    """Drop dictionary entries demoted at least ``threshold`` times.

    Returns the updated dictionary and a (surface, type, count) report of
    the removals.
    """
    counts: dict[tuple[str, EntityType], int] = {}
    for demotion in demotions:
        key = (demotion.surface.lower(), demotion.span.entity_type)
        counts[key] = counts.get(key, 0) + 1
    removed = [
        (surface, etype, count)
        for (surface, etype), count in counts.items()
        if count >= threshold and (surface, etype) in dictionary
    ]
    updated = dictionary.remove([(s, t) for s, t, _ in removed])
    return updated, sorted(removed, key=lambda r: (r[1].value, r[0]))
