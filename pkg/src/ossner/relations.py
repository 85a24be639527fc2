"""Relation classification between recognized entity pairs.

Four relation classes are in scope; "conflict" is recognized on input
but always filtered before training or evaluation because its support is
too small to learn from.  Pair feature vectors concatenate the head and
tail span representations from a pluggable encoder with pair features
(token distance, order, entity-type pair one-hot).
"""

from __future__ import annotations

import json
import random
import zlib
from dataclasses import dataclass
from enum import Enum
from pathlib import Path
from typing import Mapping, Optional, Sequence

import numpy as np

from .core import (
    Document,
    EntityType,
    FormatError,
    PipelineError,
    Provenance,
    Span,
)
from .crf import CrfModel
from .evaluation import prf_from_counts


class RelationType(str, Enum):
    DEPENDENCY = "dependency"
    AFFECTED_VERSIONS = "affected_versions"
    CAUSE_AND_EFFECT = "cause_and_effect"
    INTERACTION_CONTROL = "interaction_control"


#: Accepted on input, rejected for training and evaluation.
CONFLICT_LABEL = "conflict"

RELATION_ORDER = list(RelationType)


@dataclass(frozen=True)
class Triplet:
    doc_id: str
    head: Span
    tail: Span
    relation: str  # RelationType value or the conflict label
    annotator: Optional[str] = None

    def __post_init__(self):
        if self.head.key() == self.tail.key():
            raise PipelineError("head and tail spans are identical")
        if self.relation != CONFLICT_LABEL:
            RelationType(self.relation)  # raises on unknown labels

    def in_scope(self) -> bool:
        return self.relation != CONFLICT_LABEL


def _span_from_json(obj: dict) -> Span:
    return Span(obj["start"], obj["end"], EntityType(obj["type"]), Provenance.HUMAN)


def read_triplets(path: Path) -> list[Triplet]:
    triplets = []
    with open(path, encoding="utf-8") as handle:
        for lineno, line in enumerate(handle, start=1):
            if not line.strip():
                continue
            try:
                obj = json.loads(line)
                triplets.append(
                    Triplet(
                        doc_id=obj["doc_id"],
                        head=_span_from_json(obj["head"]),
                        tail=_span_from_json(obj["tail"]),
                        relation=obj["relation"],
                        annotator=obj.get("annotator"),
                    )
                )
            except (KeyError, ValueError) as exc:
                raise FormatError(str(exc), lineno) from exc
    return triplets


def write_triplets(path: Path, triplets: Sequence[Triplet]) -> None:
    with open(path, "w", encoding="utf-8") as handle:
        for t in triplets:
            obj = {
                "doc_id": t.doc_id,
                "head": {"start": t.head.token_start, "end": t.head.token_end,
                         "type": t.head.entity_type.value},
                "tail": {"start": t.tail.token_start, "end": t.tail.token_end,
                         "type": t.tail.entity_type.value},
                "relation": t.relation,
            }
            handle.write(json.dumps(obj, sort_keys=True) + "\n")


# ---------------------------------------------------------------------------
# Span encoders
# ---------------------------------------------------------------------------

ENCODER_WINDOW = 3


class NativeCrfEncoder:
    """Span representation from a trained tagger: the mean CRF emission
    score vector over the span tokens, plus means over the left and right
    context windows."""

    mode = "native-crf"

    def __init__(self, model: CrfModel, window: int = ENCODER_WINDOW):
        self.model = model
        self.window = window
        self.dim = 3 * len(model.tagset)

    def encode_span(self, doc: Document, span: Span) -> np.ndarray:
        scores = self.model.emission_scores(doc)
        num_tags = len(self.model.tagset)

        def mean_over(indices: Sequence[int]) -> np.ndarray:
            if not indices:
                return np.zeros(num_tags)
            return np.mean([scores[i] for i in indices], axis=0)

        left = range(max(0, span.token_start - self.window), span.token_start)
        right = range(span.token_end, min(len(doc.tokens), span.token_end + self.window))
        return np.concatenate(
            [
                mean_over(range(span.token_start, span.token_end)),
                mean_over(list(left)),
                mean_over(list(right)),
            ]
        )


class BagOfWordsEncoder:
    """Hashed bag of the span and context words; the representation used
    by the words-only ablation."""

    mode = "bag-of-words"

    def __init__(self, dim: int = 512, window: int = ENCODER_WINDOW):
        self.dim = dim
        self.window = window

    def encode_span(self, doc: Document, span: Span) -> np.ndarray:
        vec = np.zeros(self.dim)
        surfaces = doc.surfaces()
        start = max(0, span.token_start - self.window)
        end = min(len(surfaces), span.token_end + self.window)
        for word in surfaces[start:end]:
            vec[zlib.crc32(word.lower().encode("utf-8")) % self.dim] += 1.0
        return vec


def _check_span(doc: Document, span: Span) -> None:
    if span.token_end > len(doc.tokens):
        raise PipelineError(f"span {span.key()} outside document {doc.id}")


def featurize_pair(
    doc: Document,
    head: Span,
    tail: Span,
    encoder,
    include_pair_features: bool = True,
) -> np.ndarray:
    """Head representation + tail representation + pair features.

    ``include_pair_features=False`` drops the distance/order/type-pair
    block; that switch exists solely for the words-only ablation.
    """
    _check_span(doc, head)
    _check_span(doc, tail)
    parts = [encoder.encode_span(doc, head), encoder.encode_span(doc, tail)]
    if include_pair_features:
        distance = float(abs(tail.token_start - head.token_start))
        order = 1.0 if head.token_start <= tail.token_start else -1.0
        type_pair = np.zeros(len(EntityType) ** 2)
        codes = sorted(e.value for e in EntityType)
        i = codes.index(head.entity_type.value)
        j = codes.index(tail.entity_type.value)
        type_pair[i * len(codes) + j] = 1.0
        parts.append(np.array([distance, order]))
        parts.append(type_pair)
    return np.concatenate(parts)


def generate_pair_candidates(
    doc: Document, spans: Sequence[Span], window: int = 40
) -> list[tuple[Span, Span]]:
    """All ordered pairs of distinct spans starting within ``window``
    tokens of each other."""
    pairs = []
    for head in spans:
        for tail in spans:
            if head.key() == tail.key():
                continue
            if abs(tail.token_start - head.token_start) <= window:
                pairs.append((head, tail))
    return pairs


# ---------------------------------------------------------------------------
# Classifier
# ---------------------------------------------------------------------------


@dataclass
class RelationModel:
    weights: np.ndarray  # (num_classes, dim + 1); last column is the bias
    encoder_mode: str
    include_pair_features: bool = True

    def scores(self, features: np.ndarray) -> np.ndarray:
        z = self.weights[:, :-1] @ features + self.weights[:, -1]
        z = z - np.max(z)
        exp = np.exp(z)
        return exp / exp.sum()


def split_triplets(
    triplets: Sequence[Triplet], train_fraction: float, seed: int
) -> tuple[list[Triplet], list[Triplet]]:
    """Seeded split of the in-scope triplets; conflicts are dropped before
    splitting so they can reach neither side."""
    in_scope = [t for t in triplets if t.in_scope()]
    indices = list(range(len(in_scope)))
    random.Random(seed).shuffle(indices)
    n_train = max(1, round(train_fraction * len(in_scope)))
    train = [in_scope[i] for i in indices[:n_train]]
    held_out = [in_scope[i] for i in indices[n_train:]]
    return train, held_out


def train_relation_clf(
    triplets: Sequence[Triplet],
    docs_by_id: Mapping[str, Document],
    encoder,
    train_fraction: float = 0.03,
    seed: int = 0,
    epochs: int = 300,
    lr: float = 0.5,
    include_pair_features: bool = True,
) -> tuple[RelationModel, list[Triplet]]:
    """Multinomial linear classifier over pair feature vectors.

    Trains on a seeded ``train_fraction`` slice of the in-scope triplets
    and returns the held-out remainder.  Raises when some in-scope class
    is missing from the slice: the fraction is too small.
    """
    train, held_out = split_triplets(triplets, train_fraction, seed)
    present = {t.relation for t in train}
    missing = [r.value for r in RELATION_ORDER if r.value not in present]
    if missing:
        raise PipelineError(
            f"classes {missing} missing from the training slice; "
            f"increase train_fraction (currently {train_fraction})"
        )

    features = np.stack(
        [
            featurize_pair(
                docs_by_id[t.doc_id], t.head, t.tail, encoder,
                include_pair_features=include_pair_features,
            )
            for t in train
        ]
    )
    labels = np.array(
        [RELATION_ORDER.index(RelationType(t.relation)) for t in train]
    )
    num_classes = len(RELATION_ORDER)
    dim = features.shape[1]
    weights = np.zeros((num_classes, dim + 1))

    # Full-batch softmax regression; zero init keeps the run deterministic.
    onehot = np.zeros((len(train), num_classes))
    onehot[np.arange(len(train)), labels] = 1.0
    padded = np.hstack([features, np.ones((len(train), 1))])
    scale = max(1.0, float(np.abs(features).max()))
    for _ in range(epochs):
        z = padded @ weights.T / scale
        z = z - z.max(axis=1, keepdims=True)
        exp = np.exp(z)
        proba = exp / exp.sum(axis=1, keepdims=True)
        gradient = (onehot - proba).T @ padded / len(train)
        weights += lr * gradient / scale
    model = RelationModel(
        weights=weights / scale,
        encoder_mode=encoder.mode,
        include_pair_features=include_pair_features,
    )
    return model, held_out


def classify_triplet(
    model: RelationModel,
    doc: Document,
    head: Span,
    tail: Span,
    encoder,
) -> tuple[RelationType, np.ndarray]:
    """Argmax relation class plus the normalized score vector; ties break
    toward the first class in enum order."""
    if encoder.mode != model.encoder_mode:
        raise PipelineError(
            f"encoder mode {encoder.mode!r} does not match the model's "
            f"{model.encoder_mode!r}"
        )
    features = featurize_pair(
        doc, head, tail, encoder, include_pair_features=model.include_pair_features
    )
    scores = model.scores(features)
    return RELATION_ORDER[int(np.argmax(scores))], scores


def relation_report(
    model: RelationModel,
    triplets: Sequence[Triplet],
    docs_by_id: Mapping[str, Document],
    encoder,
) -> dict:
    """Accuracy plus per-class precision/recall/F1 on in-scope triplets,
    reusing the shared metric arithmetic."""
    in_scope = [t for t in triplets if t.in_scope()]
    gold_counts = {r.value: 0 for r in RELATION_ORDER}
    pred_counts = {r.value: 0 for r in RELATION_ORDER}
    matched = {r.value: 0 for r in RELATION_ORDER}
    correct = 0
    for t in in_scope:
        predicted, _ = classify_triplet(
            model, docs_by_id[t.doc_id], t.head, t.tail, encoder
        )
        gold_counts[t.relation] += 1
        pred_counts[predicted.value] += 1
        if predicted.value == t.relation:
            matched[t.relation] += 1
            correct += 1
    per_class = {}
    for code in gold_counts:
        recall, precision, f1 = prf_from_counts(
            gold_counts[code], pred_counts[code], matched[code]
        )
        per_class[code] = {
            "gold": gold_counts[code],
            "predicted": pred_counts[code],
            "matched": matched[code],
            "recall": recall,
            "precision": precision,
            "f1": f1,
        }
    return {
        "triplets": len(in_scope),
        "accuracy": correct / len(in_scope) if in_scope else 1.0,
        "per_class": per_class,
    }
