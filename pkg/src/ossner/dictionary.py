"""Per-entity-type lookup tables of surface forms.

Surfaces are stored case-preserving but indexed and queried by their
lowercased token sequence, which maximizes recall on mixed-case text.
Mutating operations return a new ``Dictionary`` (copy-on-write), so
concurrent readers never observe a half-updated table.
"""

from __future__ import annotations

import importlib.resources
from dataclasses import dataclass
from datetime import date
from pathlib import Path
from typing import Iterable, Optional, Sequence

from .core import EntityType, FormatError, tokenize

TSV_HEADER = ["surface", "entity_type", "source", "added_at"]


def default_stopwords() -> frozenset[str]:
    text = (
        importlib.resources.files("ossner.data")
        .joinpath("stopwords.txt")
        .read_text(encoding="utf-8")
    )
    return frozenset(w.strip().lower() for w in text.splitlines() if w.strip())


def load_stopwords(path: Optional[Path]) -> frozenset[str]:
    if path is None:
        return default_stopwords()
    with open(path, encoding="utf-8") as handle:
        return frozenset(w.strip().lower() for w in handle if w.strip())


def surface_key(surface: str) -> tuple[str, ...]:
    """Lowercased token sequence under the shared tokenizer."""
    return tuple(t.surface.lower() for t in tokenize(surface))


@dataclass(frozen=True)
class DictEntry:
    surface: str
    entity_type: EntityType
    source: str = ""
    added_at: date = date(1970, 1, 1)

    def __post_init__(self):
        if not self.surface.strip():
            raise FormatError("empty surface")

    def key(self) -> tuple[str, EntityType]:
        return (self.surface.strip().lower(), self.entity_type)


@dataclass(frozen=True)
class AddReport:
    inserted: int = 0
    already_present: int = 0
    rejected: int = 0
    rejected_surfaces: tuple[str, ...] = ()


class Dictionary:
    """Immutable set of entries plus a phrase index for exact lookup."""

    def __init__(
        self,
        entries: Iterable[DictEntry] = (),
        stopwords: Optional[frozenset[str]] = None,
    ):
        self.stopwords = default_stopwords() if stopwords is None else stopwords
        self._entries: dict[tuple[str, EntityType], DictEntry] = {}
        self._index: dict[tuple[str, ...], set[EntityType]] = {}
        self._max_phrase_len = 0
        for entry in entries:
            self._insert(entry)

    def _insert(self, entry: DictEntry) -> bool:
        key = entry.key()
        existing = self._entries.get(key)
        if existing is not None:
            # Duplicates collapse onto the earliest added_at.
            if entry.added_at < existing.added_at:
                self._entries[key] = entry
            return False
        self._entries[key] = entry
        tokens = surface_key(entry.surface)
        self._index.setdefault(tokens, set()).add(entry.entity_type)
        self._max_phrase_len = max(self._max_phrase_len, len(tokens))
        return True

    def __len__(self) -> int:
        return len(self._entries)

    def __contains__(self, key: tuple[str, EntityType]) -> bool:
        return (key[0].lower(), key[1]) in self._entries

    @property
    def max_phrase_len(self) -> int:
        return self._max_phrase_len

    def entries(self) -> list[DictEntry]:
        return sorted(
            self._entries.values(),
            key=lambda e: (e.entity_type.value, e.surface.lower()),
        )

    def counts(self) -> dict[str, int]:
        out = {e.value: 0 for e in EntityType}
        for key in self._entries:
            out[key[1].value] += 1
        return out

    def query(self, token_seq: Sequence[str]) -> list[EntityType]:
        """All types whose lexicon contains exactly this lowercased token
        sequence; whole-token matching is enforced by construction."""
        hits = self._index.get(tuple(token_seq), ())
        return sorted(hits, key=lambda t: t.value)

    def add(self, new_entries: Iterable[DictEntry]) -> tuple["Dictionary", AddReport]:
        updated = self.copy()
        inserted = already = 0
        rejected: list[str] = []
        for entry in new_entries:
            if entry.surface.strip().lower() in self.stopwords:
                rejected.append(entry.surface)
                continue
            if updated._insert(entry):
                inserted += 1
            else:
                already += 1
        report = AddReport(inserted, already, len(rejected), tuple(rejected))
        return updated, report

    def remove(self, keys: Iterable[tuple[str, EntityType]]) -> "Dictionary":
        drop = {(surface.lower(), etype) for surface, etype in keys}
        kept = [e for k, e in self._entries.items() if k not in drop]
        return Dictionary(kept, stopwords=self.stopwords)

    def copy(self) -> "Dictionary":
        clone = Dictionary(stopwords=self.stopwords)
        clone._entries = dict(self._entries)
        clone._index = {k: set(v) for k, v in self._index.items()}
        clone._max_phrase_len = self._max_phrase_len
        return clone


def _parse_row(row: list[str], lineno: int) -> DictEntry:
    if len(row) != len(TSV_HEADER):
        raise FormatError(f"expected {len(TSV_HEADER)} columns, got {len(row)}", lineno)
    surface, type_str, source, added = (c.strip() for c in row)
    if not surface:
        raise FormatError("empty surface", lineno)
    try:
        etype = EntityType(type_str)
    except ValueError:
        raise FormatError(f"unknown entity type {type_str!r}", lineno) from None
    try:
        added_at = date.fromisoformat(added)
    except ValueError:
        raise FormatError(f"bad date {added!r}", lineno) from None
    return DictEntry(surface, etype, source, added_at)


def load_lookup_tables(
    paths: Path | Sequence[Path],
    stopwords: Optional[frozenset[str]] = None,
) -> Dictionary:
    """Load one combined TSV or several per-type TSVs into a dictionary.

    Duplicate (surface, type) rows collapse keeping the earliest added_at;
    stopword surfaces are dropped at load.
    """
    if isinstance(paths, (str, Path)):
        paths = [Path(paths)]
    dictionary = Dictionary(stopwords=stopwords)
    for path in paths:
        entries = []
        with open(path, encoding="utf-8") as handle:
            for lineno, line in enumerate(handle, start=1):
                line = line.rstrip("\n")
                if not line.strip():
                    continue
                row = line.split("\t")
                if lineno == 1 and [c.strip().lower() for c in row] == TSV_HEADER:
                    continue
                entries.append(_parse_row(row, lineno))
        dictionary, _ = dictionary.add(entries)
    return dictionary


def save_lookup_tables(path: Path, dictionary: Dictionary) -> None:
    with open(path, "w", encoding="utf-8") as handle:
        handle.write("\t".join(TSV_HEADER) + "\n")
        for entry in dictionary.entries():
            handle.write(
                "\t".join(
                    [
                        entry.surface,
                        entry.entity_type.value,
                        entry.source,
                        entry.added_at.isoformat(),
                    ]
                )
                + "\n"
            )
