"""Stage 2b dictionary expansion with a human in the loop.

Each round: sample documents, harvest provider mentions not already
covered by existing annotations, score them entity/non-entity, queue the
confident ones (probability >= 0.5) for human labeling, then merge the
decisions into the labeled data and the dictionary and retrain.  The
loop stops when the provider has nothing new to offer, or when an
optional round/label budget runs out.
"""

from __future__ import annotations

import json
import logging
import random
import zlib
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Iterable, Mapping, Optional, Sequence

import numpy as np

from .core import (
    ConflictError,
    Document,
    EntityType,
    LabeledDataset,
    LabeledExample,
    PipelineError,
    Span,
    tag_for,
    tags_to_spans,
)
from .dictionary import DictEntry, Dictionary
from .plugins import LineProtocolProcess, ProtocolError

log = logging.getLogger(__name__)

CONTEXT_WINDOW = 3  # tokens of context on each side fed to the classifier

DEFAULT_THRESHOLD = 0.5


class AnnotationPending(PipelineError):
    """Raised by an annotator that cannot decide right now; the loop
    parks in an awaiting-labels state and can be resumed."""


@dataclass(frozen=True)
class Mention:
    doc_id: str
    char_start: int
    char_end: int
    surface: str
    score: float = 0.0


@dataclass
class Candidate:
    candidate_id: str
    doc_id: str
    token_start: int
    token_end: int
    surface: str
    provider_score: float
    classifier_confidence: Optional[float] = None
    state: str = "pending"  # pending | queued | labeled | rejected
    assigned_type: Optional[EntityType] = None
    labeler: Optional[str] = None
    version: int = 0


@dataclass(frozen=True)
class Decision:
    decision: str  # "entity" | "non-entity"
    entity_type: Optional[EntityType] = None
    labeler: str = "anonymous"

    def __post_init__(self):
        if self.decision == "entity" and self.entity_type is None:
            raise PipelineError("entity decision requires an entity type")
        if self.decision not in ("entity", "non-entity"):
            raise PipelineError(f"unknown decision {self.decision!r}")


# ---------------------------------------------------------------------------
# Mention providers
# ---------------------------------------------------------------------------


class FixtureProvider:
    """Replayable mention source backed by JSONL records
    {doc_id, char_start, char_end, surface, score}."""

    def __init__(self, mentions: Iterable[Mention]):
        self._by_doc: dict[str, list[Mention]] = {}
        for mention in mentions:
            self._by_doc.setdefault(mention.doc_id, []).append(mention)

    @classmethod
    def from_file(cls, path: Path) -> "FixtureProvider":
        mentions = []
        with open(path, encoding="utf-8") as handle:
            for line in handle:
                if not line.strip():
                    continue
                obj = json.loads(line)
                mentions.append(
                    Mention(
                        obj["doc_id"],
                        obj["char_start"],
                        obj["char_end"],
                        obj["surface"],
                        obj.get("score", 0.0),
                    )
                )
        return cls(mentions)

    def mentions(self, doc: Document) -> list[Mention]:
        return list(self._by_doc.get(doc.id, []))


def mention_token_range(doc: Document, mention: Mention) -> Optional[tuple[int, int]]:
    """Token indices overlapping the mention's character range; None when
    nothing aligns."""
    start = end = None
    for i, token in enumerate(doc.tokens):
        if token.char_start < mention.char_end and mention.char_start < token.char_end:
            if start is None:
                start = i
            end = i + 1
    if start is None:
        return None
    return start, end


def harvest_candidates(
    docs: Sequence[Document],
    provider,
    existing: Mapping[str, list[Span]],
) -> list[Candidate]:
    """Provider mentions become pending candidates unless they overlap a
    span that Stage 1 already annotated."""
    candidates = []
    for doc in docs:
        try:
            mentions = provider.mentions(doc)
        except Exception as exc:
            log.warning("mention provider failed on %s: %s", doc.id, exc)
            continue
        taken = existing.get(doc.id, [])
        for mention in mentions:
            token_range = mention_token_range(doc, mention)
            if token_range is None:
                continue
            start, end = token_range
            if any(s.token_start < end and start < s.token_end for s in taken):
                continue
            candidates.append(
                Candidate(
                    candidate_id=f"{doc.id}:{start}:{end}",
                    doc_id=doc.id,
                    token_start=start,
                    token_end=end,
                    surface=mention.surface,
                    provider_score=mention.score,
                )
            )
    return candidates


# ---------------------------------------------------------------------------
# Year-stratified sampling
# ---------------------------------------------------------------------------


def sample_by_year(
    corpus: Sequence[Document],
    per_year: int,
    years: Iterable[int],
    seed: int = 0,
) -> list[Document]:
    """Uniformly sample up to ``per_year`` documents per calendar year."""
    if per_year <= 0:
        return []
    by_year: dict[int, list[Document]] = {}
    for doc in corpus:
        by_year.setdefault(doc.created_at.year, []).append(doc)
    sampled: list[Document] = []
    for year in years:
        bucket = sorted(by_year.get(year, []), key=lambda d: d.id)
        if len(bucket) <= per_year:
            sampled.extend(bucket)
        else:
            rng = random.Random(f"{seed}:{year}")
            sampled.extend(rng.sample(bucket, per_year))
    return sampled


# ---------------------------------------------------------------------------
# Entity / non-entity classifier
# ---------------------------------------------------------------------------


def _hashed(feature: str, dim: int) -> int:
    return zlib.crc32(feature.encode("utf-8")) % dim


def candidate_features(surface: str, left: Sequence[str], right: Sequence[str]) -> list[str]:
    padded = f" {surface.lower()} "
    feats = [f"ng={padded[i:i + n]}" for n in (2, 3, 4)
             for i in range(len(padded) - n + 1)]
    feats.append(f"sf={surface.lower()}")
    feats.extend(f"l{i}={w.lower()}" for i, w in enumerate(reversed(list(left)), 1))
    feats.extend(f"r{i}={w.lower()}" for i, w in enumerate(right, 1))
    return feats


class HashedLinearClassifier:
    """Logistic scorer over hashed character n-grams and context words.

    With either training class empty the weights stay zero, so every
    candidate scores exactly 0.5 and passes the queueing gate; human
    feedback then supplies the negatives for later rounds.
    """

    def __init__(self, dim: int = 2**18, epochs: int = 10, lr: float = 0.5, seed: int = 0):
        self.dim = dim
        self.epochs = epochs
        self.lr = lr
        self.seed = seed
        self.weights = np.zeros(dim, dtype=np.float64)

    def _indices(self, surface, left, right) -> list[int]:
        return [_hashed(f, self.dim) for f in candidate_features(surface, left, right)]

    def train(self, positives: Sequence[tuple], negatives: Sequence[tuple]) -> None:
        self.weights = np.zeros(self.dim, dtype=np.float64)
        if not positives or not negatives:
            return
        data = [(self._indices(*item), 1.0) for item in positives]
        data += [(self._indices(*item), 0.0) for item in negatives]
        rng = random.Random(self.seed)
        for _ in range(self.epochs):
            rng.shuffle(data)
            for indices, label in data:
                p = self._proba(indices)
                gradient = self.lr * (label - p)
                for i in indices:
                    self.weights[i] += gradient

    def _proba(self, indices: Sequence[int]) -> float:
        z = float(sum(self.weights[i] for i in indices))
        return 1.0 / (1.0 + np.exp(-z))

    def score(self, surface: str, left: Sequence[str], right: Sequence[str]) -> float:
        return self._proba(self._indices(surface, left, right))


class PluginClassifier:
    """External scorer: {surface, left_context, right_context} in,
    {p_entity} out, one JSON object per line."""

    def __init__(self, command: Sequence[str]):
        self._proc = LineProtocolProcess(command)

    def score(self, surface: str, left: Sequence[str], right: Sequence[str]) -> float:
        reply = self._proc.request(
            {"surface": surface, "left_context": list(left), "right_context": list(right)}
        )
        if not isinstance(reply, dict) or "p_entity" not in reply:
            raise ProtocolError(f"classifier plugin reply missing p_entity: {reply!r}")
        p = float(reply["p_entity"])
        if not 0.0 <= p <= 1.0:
            raise ProtocolError(f"p_entity {p} outside [0, 1]")
        return p

    def close(self) -> None:
        self._proc.close()


def candidate_context(doc: Document, candidate: Candidate) -> tuple[list[str], list[str]]:
    surfaces = doc.surfaces()
    left = surfaces[max(0, candidate.token_start - CONTEXT_WINDOW) : candidate.token_start]
    right = surfaces[candidate.token_end : candidate.token_end + CONTEXT_WINDOW]
    return left, right


def classify_and_queue(
    candidates: Sequence[Candidate],
    scorer,
    docs_by_id: Mapping[str, Document],
    threshold: float = DEFAULT_THRESHOLD,
) -> tuple[list[Candidate], list[Candidate], dict]:
    """Queue candidates whose confidence reaches the threshold (0.50
    queues, anything below rejects); returns (queued, rejected, report)."""
    queued, rejected = [], []
    for candidate in candidates:
        left, right = candidate_context(docs_by_id[candidate.doc_id], candidate)
        confidence = scorer.score(candidate.surface, left, right)
        candidate.classifier_confidence = confidence
        if confidence >= threshold:
            candidate.state = "queued"
            queued.append(candidate)
        else:
            candidate.state = "rejected"
            rejected.append(candidate)
    return queued, rejected, {"queued": len(queued), "rejected": len(rejected)}


def training_pairs(dataset: LabeledDataset) -> list[tuple[str, list[str], list[str]]]:
    """(surface, left ctx, right ctx) of every annotated span; classifier
    positives."""
    pairs = []
    for ex in dataset.items:
        doc = ex.document
        surfaces = doc.surfaces()
        for span in tags_to_spans(ex.tags):
            left = surfaces[max(0, span.token_start - CONTEXT_WINDOW) : span.token_start]
            right = surfaces[span.token_end : span.token_end + CONTEXT_WINDOW]
            pairs.append((doc.span_surface(span), left, right))
    return pairs


# ---------------------------------------------------------------------------
# Merging human labels
# ---------------------------------------------------------------------------


@dataclass
class MergeReport:
    entities_added: int = 0
    dict_inserted: int = 0
    non_entities: int = 0
    docs_added: int = 0
    skipped: list = field(default_factory=list)


def merge_labels(
    labeled: LabeledDataset,
    decided: Sequence[Candidate],
    dictionary: Dictionary,
    docs_by_id: Mapping[str, Document],
) -> tuple[LabeledDataset, Dictionary, MergeReport]:
    """Fold human decisions into the labeled data and the dictionary.

    Entity labels become inside tags in their document (documents enter
    the dataset on first touch) and (surface, type) dictionary entries
    with source "active-learning", dated by the source document.
    Conflicting types for the identical (doc, span) raise ConflictError;
    non-entity decisions are only counted, the caller records them as
    classifier negatives.
    """
    report = MergeReport()
    by_span: dict[tuple[str, int, int], Candidate] = {}
    for candidate in decided:
        if candidate.labeler is None:
            raise PipelineError(f"candidate {candidate.candidate_id} has no decision")
        if candidate.assigned_type is None:
            report.non_entities += 1
            continue
        key = (candidate.doc_id, candidate.token_start, candidate.token_end)
        other = by_span.get(key)
        if other is not None and other.assigned_type != candidate.assigned_type:
            raise ConflictError(
                f"conflicting labels for {key}: "
                f"{other.assigned_type.value} vs {candidate.assigned_type.value}"
            )
        by_span[key] = candidate

    examples = {ex.document.id: list(ex.tags) for ex in labeled.items}
    new_entries = []
    for (doc_id, start, end), candidate in by_span.items():
        doc = docs_by_id.get(doc_id)
        if doc is None:
            report.skipped.append({"candidate": candidate.candidate_id,
                                   "reason": "unknown_document"})
            continue
        if doc_id not in examples:
            examples[doc_id] = ["O"] * len(doc.tokens)
            report.docs_added += 1
        tags = examples[doc_id]
        inside = tag_for(candidate.assigned_type)
        window = tags[start:end]
        if all(t == "O" for t in window):
            tags[start:end] = [inside] * (end - start)
            report.entities_added += 1
        elif window == [inside] * (end - start):
            pass  # already merged in an earlier round
        else:
            report.skipped.append({"candidate": candidate.candidate_id,
                                   "reason": "overlaps_existing"})
            continue
        new_entries.append(
            DictEntry(
                surface=candidate.surface,
                entity_type=candidate.assigned_type,
                source="active-learning",
                added_at=doc.created_at,
            )
        )

    dictionary, add_report = dictionary.add(new_entries)
    report.dict_inserted = add_report.inserted

    order = [ex.document.id for ex in labeled.items]
    order += [doc_id for doc_id in examples if doc_id not in set(order)]
    items = [LabeledExample(docs_by_id[doc_id], examples[doc_id]) for doc_id in order]
    return LabeledDataset(items, name=labeled.name), dictionary, report


# ---------------------------------------------------------------------------
# The loop
# ---------------------------------------------------------------------------


@dataclass
class SamplePlan:
    per_year: int
    years: tuple[int, ...]


@dataclass
class LoopState:
    labeled_data: LabeledDataset
    pool: list[Candidate] = field(default_factory=list)
    sample_plan: Optional[SamplePlan] = None
    threshold: float = DEFAULT_THRESHOLD
    round: int = 0
    stopped: bool = False
    stop_reason: Optional[str] = None
    processed: set = field(default_factory=set)
    blocked_surfaces: set = field(default_factory=set)
    negatives: list = field(default_factory=list)
    human_labels: int = 0


def _round_docs(state: LoopState, corpus: Sequence[Document], seed: int) -> list[Document]:
    if state.sample_plan is None:
        return list(corpus)
    plan = state.sample_plan
    return sample_by_year(corpus, plan.per_year, plan.years, seed=seed + state.round)


def _harvest(state: LoopState, corpus: Sequence[Document], provider, seed: int) -> list[Candidate]:
    existing = {
        ex.document.id: tags_to_spans(ex.tags) for ex in state.labeled_data.items
    }
    fresh = harvest_candidates(_round_docs(state, corpus, seed), provider, existing)
    return [
        c
        for c in fresh
        if c.candidate_id not in state.processed
        and c.surface.lower() not in state.blocked_surfaces
    ]


def train_round_classifier(
    state: LoopState, classifier_factory: Callable[[], HashedLinearClassifier]
):
    """Retrain from scratch on the current labeled data plus the human
    negatives collected so far."""
    classifier = classifier_factory()
    classifier.train(training_pairs(state.labeled_data), list(state.negatives))
    return classifier


def run_loop(
    state: LoopState,
    corpus: Sequence[Document],
    provider,
    annotator: Callable[[Candidate, Document], Decision],
    dictionary: Dictionary,
    classifier_factory: Optional[Callable[[], HashedLinearClassifier]] = None,
    max_rounds: Optional[int] = None,
    max_human_labels: Optional[int] = None,
    seed: int = 0,
) -> tuple[LoopState, Dictionary, list[dict]]:
    """Drive classify -> queue -> label -> merge rounds to exhaustion.

    Returns the final state, the grown dictionary, and one audit record
    per round.  Everything is deterministic given (seed, provider,
    annotator), so a replay produces an identical audit log.
    """
    classifier_factory = classifier_factory or (lambda: HashedLinearClassifier(seed=seed))
    docs_by_id = {doc.id: doc for doc in corpus}
    audit: list[dict] = []

    while True:
        if not state.pool:
            state.pool = _harvest(state, corpus, provider, seed)
        if not state.pool:
            state.stopped = True
            state.stop_reason = "pool_exhausted"
            break
        if max_rounds is not None and state.round >= max_rounds:
            state.stopped = True
            state.stop_reason = "budget"
            break
        if max_human_labels is not None and state.human_labels >= max_human_labels:
            state.stopped = True
            state.stop_reason = "budget"
            break

        state.round += 1
        pool_size = len(state.pool)
        classifier = train_round_classifier(state, classifier_factory)
        queued, rejected, _ = classify_and_queue(
            state.pool, classifier, docs_by_id, state.threshold
        )
        state.processed.update(c.candidate_id for c in state.pool)

        decided: list[Candidate] = []
        parked = False
        try:
            for candidate in queued:
                decision = annotator(candidate, docs_by_id[candidate.doc_id])
                candidate.labeler = decision.labeler
                candidate.version += 1
                if decision.decision == "entity":
                    candidate.state = "labeled"
                    candidate.assigned_type = decision.entity_type
                else:
                    candidate.state = "rejected"
                    state.blocked_surfaces.add(candidate.surface.lower())
                    left, right = candidate_context(
                        docs_by_id[candidate.doc_id], candidate
                    )
                    state.negatives.append((candidate.surface, left, right))
                decided.append(candidate)
                state.human_labels += 1
        except AnnotationPending:
            parked = True

        # decisions collected so far are merged even when parking: an
        # acknowledged label is never dropped
        before = len(dictionary)
        state.labeled_data, dictionary, _ = merge_labels(
            state.labeled_data, decided, dictionary, docs_by_id
        )
        audit.append(
            {
                "round": state.round,
                "pool_size": pool_size,
                "queued": len(queued),
                "labeled": len(decided),
                "dict_delta": len(dictionary) - before,
            }
        )
        if parked:
            state.stop_reason = "awaiting_labels"
            state.pool = [c for c in state.pool if c.state == "queued"]
            return state, dictionary, audit
        state.pool = []

    return state, dictionary, audit


class ScriptedAnnotator:
    """Deterministic oracle: a lowercased surface -> entity type (or None
    for non-entity) truth table."""

    def __init__(self, truth: Mapping[str, Optional[EntityType]], labeler: str = "oracle"):
        self.truth = {k.lower(): v for k, v in truth.items()}
        self.labeler = labeler

    @classmethod
    def from_file(cls, path: Path, labeler: str = "oracle") -> "ScriptedAnnotator":
        truth: dict[str, Optional[EntityType]] = {}
        with open(path, encoding="utf-8") as handle:
            for line in handle:
                if not line.strip():
                    continue
                obj = json.loads(line)
                etype = obj.get("entity_type")
                truth[obj["surface"].lower()] = EntityType(etype) if etype else None
        return cls(truth, labeler=labeler)

    def __call__(self, candidate: Candidate, doc: Document) -> Decision:
        etype = self.truth.get(candidate.surface.lower())
        if etype is None:
            return Decision("non-entity", labeler=self.labeler)
        return Decision("entity", entity_type=etype, labeler=self.labeler)


def write_audit_log(path: Path, audit: Sequence[dict]) -> None:
    with open(path, "w", encoding="utf-8") as handle:
        for record in audit:
            handle.write(json.dumps(record, sort_keys=True) + "\n")
