"""Linear-chain CRF tagger over IO tags.

Emission weights live on sparse (feature, tag) pairs, transition weights
on a dense tag-pair matrix.  Decoding returns the argmax tag sequence,
breaking score ties toward the lexicographically smallest sequence under
the canonical tag order (O first, inside tags alphabetical).  Training
uses structured passive-aggressive updates with per-iteration snapshot
averaging, 150 iterations by default.
"""

from __future__ import annotations

import json
import math
import random
from collections import Counter
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence, Union

from .core import (
    Document,
    InvalidTagError,
    LabeledDataset,
    PipelineError,
    Provenance,
    Span,
    TAGS,
    TagSequence,
    tags_to_spans,
)
from .plugins import LineProtocolProcess, ProtocolError

FEATURE_TEMPLATE_VERSION = "io-window2-v1"

MODEL_FORMAT_VERSION = 1

NEG_INF = float("-inf")


def word_shape(word: str) -> str:
    """Collapsed character-class sketch, e.g. "Ubuntu18" -> "Xxd"."""
    out: list[str] = []
    for ch in word:
        if ch.isupper():
            cls = "X"
        elif ch.islower():
            cls = "x"
        elif ch.isdigit():
            cls = "d"
        else:
            cls = ch
        if not out or out[-1] != cls:
            out.append(cls)
    return "".join(out)


def featurize(doc: Document, position: int) -> list[str]:
    """Feature names for one position; deterministic, boundary-padded."""
    tokens = doc.tokens
    word = tokens[position].surface
    lower = word.lower()
    feats = [f"w0={lower}", f"shape={word_shape(word)}"]
    for k in (1, 2, 3):
        if len(lower) >= k:
            feats.append(f"pre{k}={lower[:k]}")
            feats.append(f"suf{k}={lower[-k:]}")
    if any(c.isdigit() for c in word):
        feats.append("has_digit")
    if "-" in word:
        feats.append("has_hyphen")
    if "." in word:
        feats.append("has_dot")
    for off in (-2, -1, 1, 2):
        j = position + off
        if 0 <= j < len(tokens):
            feats.append(f"w{off:+d}={tokens[j].surface.lower()}")
        else:
            feats.append(f"w{off:+d}=" + ("<BOS>" if off < 0 else "<EOS>"))
    for off, name in ((-1, "p-1"), (0, "p0"), (1, "p+1")):
        j = position + off
        if 0 <= j < len(tokens) and tokens[j].pos:
            feats.append(f"{name}={tokens[j].pos}")
    return feats


@dataclass
class CrfModel:
    tagset: tuple[str, ...] = tuple(TAGS)
    emissions: dict = field(default_factory=dict)  # feature -> {tag: weight}
    transitions: dict = field(default_factory=dict)  # tag -> {tag: weight}
    template_version: str = FEATURE_TEMPLATE_VERSION
    iterations: int = 0
    seed: int = 0

    def __post_init__(self):
        # Every transition pair is present, defaulting to zero.
        for a in self.tagset:
            row = self.transitions.setdefault(a, {})
            for b in self.tagset:
                row.setdefault(b, 0.0)

    def tag_index(self) -> dict[str, int]:
        return {t: i for i, t in enumerate(self.tagset)}

    def transition_matrix(self) -> list[list[float]]:
        return [[self.transitions[a][b] for b in self.tagset] for a in self.tagset]

    def emission_scores(self, doc: Document) -> list[list[float]]:
        index = self.tag_index()
        out = []
        for i in range(len(doc.tokens)):
            vec = [0.0] * len(self.tagset)
            for feat in featurize(doc, i):
                row = self.emissions.get(feat)
                if row:
                    for tag, weight in row.items():
                        vec[index[tag]] += weight
            out.append(vec)
        return out


def sequence_score(model: CrfModel, doc: Document, tags: TagSequence) -> float:
    """Sum of emission weights plus transition weights along ``tags``."""
    if len(tags) != len(doc.tokens):
        raise PipelineError("tag/token length mismatch")
    index = model.tag_index()
    for tag in tags:
        if tag not in index:
            raise InvalidTagError(f"tag {tag!r} outside model alphabet")
    emit = model.emission_scores(doc)
    score = 0.0
    for i, tag in enumerate(tags):
        score += emit[i][index[tag]]
        if i + 1 < len(tags):
            score += model.transitions[tag][tags[i + 1]]
    return score


def _viterbi(emit: list[list[float]], trans: list[list[float]]) -> list[int]:
    """Lexicographically-smallest argmax path over tag indices.

    A backward pass computes the best achievable suffix score per state;
    the forward reconstruction then greedily picks the smallest tag index
    that still attains the optimum, which yields the lexicographic
    minimum among all argmax sequences.
    """
    n = len(emit)
    if n == 0:
        return []
    num_tags = len(emit[0])
    beta = [[0.0] * num_tags for _ in range(n)]
    best_next = [[0.0] * num_tags for _ in range(n - 1)]
    beta[n - 1] = list(emit[n - 1])
    for i in range(n - 2, -1, -1):
        nxt = beta[i + 1]
        for s in range(num_tags):
            row = trans[s]
            best = NEG_INF
            for t in range(num_tags):
                value = row[t] + nxt[t]
                if value > best:
                    best = value
            best_next[i][s] = best
            beta[i][s] = emit[i][s] + best
    total = max(beta[0])
    path = [beta[0].index(total)]
    for i in range(n - 1):
        s = path[-1]
        needed = best_next[i][s]
        row = trans[s]
        nxt = beta[i + 1]
        for t in range(num_tags):
            if row[t] + nxt[t] == needed:
                path.append(t)
                break
    return path


def _top2_scores(emit: list[list[float]], trans: list[list[float]]) -> tuple[float, float]:
    """Best and second-best sequence scores (second may be -inf)."""
    n = len(emit)
    num_tags = len(emit[0])
    top1 = list(emit[0])
    top2 = [NEG_INF] * num_tags
    for i in range(1, n):
        new1 = [NEG_INF] * num_tags
        new2 = [NEG_INF] * num_tags
        for s in range(num_tags):
            e = emit[i][s]
            b1 = b2 = NEG_INF
            for t in range(num_tags):
                step = trans[t][s]
                for incoming in (top1[t], top2[t]):
                    if incoming == NEG_INF:
                        continue
                    value = incoming + step
                    if value > b1:
                        b1, b2 = value, b1
                    elif value > b2:
                        b2 = value
            new1[s] = e + b1 if b1 != NEG_INF else NEG_INF
            new2[s] = e + b2 if b2 != NEG_INF else NEG_INF
        top1, top2 = new1, new2
    best = second = NEG_INF
    for value in top1 + top2:
        if value > best:
            best, second = value, best
        elif value > second:
            second = value
    return best, second


def viterbi_decode(model: CrfModel, doc: Document) -> TagSequence:
    if not doc.tokens:
        return []
    path = _viterbi(model.emission_scores(doc), model.transition_matrix())
    return [model.tagset[i] for i in path]


def decode_with_confidence(model: CrfModel, doc: Document) -> tuple[TagSequence, float]:
    """Decode plus a [0, 1) confidence from the normalized score margin
    between the best and second-best sequence."""
    if not doc.tokens:
        return [], 1.0
    emit = model.emission_scores(doc)
    trans = model.transition_matrix()
    path = _viterbi(emit, trans)
    best, second = _top2_scores(emit, trans)
    if second == NEG_INF:
        confidence = 1.0
    else:
        margin = max(0.0, best - second) / len(doc.tokens)
        confidence = 1.0 - math.exp(-margin)
    return [model.tagset[i] for i in path], confidence


# ---------------------------------------------------------------------------
# Passive-aggressive training
# ---------------------------------------------------------------------------


def train_pa(
    dataset: LabeledDataset,
    iterations: int = 150,
    aggressiveness: float = 1.0,
    seed: int = 0,
    tagset: Sequence[str] = tuple(TAGS),
) -> CrfModel:
    """Structured passive-aggressive training with snapshot averaging.

    Per example: decode with current weights; on a mistake, step along
    the gold-minus-predicted feature difference with
    tau = min(C, hamming / ||delta||^2).  Examples are reshuffled each
    iteration under ``seed``; the returned model averages the weight
    snapshot taken after every iteration.  An iteration with zero updates
    freezes the weights, so remaining snapshots are filled in closed form.
    """
    if not dataset.items:
        raise PipelineError("cannot train on an empty dataset")
    tagset = tuple(tagset)
    index = {t: i for i, t in enumerate(tagset)}
    num_tags = len(tagset)

    examples = []
    for ex in dataset.items:
        if len(ex.tags) != len(ex.document.tokens):
            raise PipelineError(f"length mismatch in document {ex.document.id}")
        try:
            gold = [index[t] for t in ex.tags]
        except KeyError as exc:
            raise InvalidTagError(f"tag {exc.args[0]!r} outside tagset") from exc
        feats = [featurize(ex.document, i) for i in range(len(ex.document.tokens))]
        examples.append((feats, gold))

    weights: dict[str, dict[int, float]] = {}
    trans = [[0.0] * num_tags for _ in range(num_tags)]
    sum_weights: dict[str, dict[int, float]] = {}
    sum_trans = [[0.0] * num_tags for _ in range(num_tags)]

    def decode(feats: list[list[str]]) -> list[int]:
        emit = []
        for position_feats in feats:
            vec = [0.0] * num_tags
            for feat in position_feats:
                row = weights.get(feat)
                if row:
                    for t, w in row.items():
                        vec[t] += w
            emit.append(vec)
        return _viterbi(emit, trans) if emit else []

    rng = random.Random(seed)
    order = list(range(len(examples)))
    completed = 0
    for _ in range(iterations):
        rng.shuffle(order)
        updates = 0
        for idx in order:
            feats, gold = examples[idx]
            if not gold:
                continue
            pred = decode(feats)
            if pred == gold:
                continue
            delta: Counter = Counter()
            tdelta: Counter = Counter()
            loss = 0
            for i, position_feats in enumerate(feats):
                if gold[i] != pred[i]:
                    loss += 1
                    for feat in position_feats:
                        delta[(feat, gold[i])] += 1
                        delta[(feat, pred[i])] -= 1
            for i in range(len(gold) - 1):
                gpair = (gold[i], gold[i + 1])
                ppair = (pred[i], pred[i + 1])
                if gpair != ppair:
                    tdelta[gpair] += 1
                    tdelta[ppair] -= 1
            norm_sq = sum(v * v for v in delta.values()) + sum(
                v * v for v in tdelta.values()
            )
            if norm_sq == 0:
                continue
            tau = min(aggressiveness, loss / norm_sq)
            for (feat, t), value in delta.items():
                if value:
                    row = weights.setdefault(feat, {})
                    row[t] = row.get(t, 0.0) + tau * value
            for (a, b), value in tdelta.items():
                if value:
                    trans[a][b] += tau * value
            updates += 1
        completed += 1
        for feat, row in weights.items():
            srow = sum_weights.setdefault(feat, {})
            for t, value in row.items():
                srow[t] = srow.get(t, 0.0) + value
        for a in range(num_tags):
            for b in range(num_tags):
                sum_trans[a][b] += trans[a][b]
        if updates == 0:
            break

    remaining = iterations - completed
    if remaining:
        for feat, row in weights.items():
            srow = sum_weights.setdefault(feat, {})
            for t, value in row.items():
                srow[t] = srow.get(t, 0.0) + remaining * value
        for a in range(num_tags):
            for b in range(num_tags):
                sum_trans[a][b] += remaining * trans[a][b]

    emissions: dict[str, dict[str, float]] = {}
    for feat, row in sum_weights.items():
        emissions[feat] = {tagset[t]: total / iterations for t, total in row.items()}
    transitions = {
        a: {b: sum_trans[i][j] / iterations for j, b in enumerate(tagset)}
        for i, a in enumerate(tagset)
    }
    return CrfModel(
        tagset=tagset,
        emissions=emissions,
        transitions=transitions,
        template_version=FEATURE_TEMPLATE_VERSION,
        iterations=iterations,
        seed=seed,
    )


def tag_accuracy(model: CrfModel, dataset: LabeledDataset) -> float:
    total = correct = 0
    for ex in dataset.items:
        pred = viterbi_decode(model, ex.document)
        total += len(ex.tags)
        correct += sum(1 for a, b in zip(pred, ex.tags) if a == b)
    return correct / total if total else 1.0


# ---------------------------------------------------------------------------
# Model files
# ---------------------------------------------------------------------------


def model_to_json(model: CrfModel) -> dict:
    return {
        "version": MODEL_FORMAT_VERSION,
        "tagset": list(model.tagset),
        "template_version": model.template_version,
        "iterations": model.iterations,
        "seed": model.seed,
        "emissions": model.emissions,
        "transitions": model.transitions,
    }


def model_from_json(obj: dict) -> CrfModel:
    if obj.get("version") != MODEL_FORMAT_VERSION:
        raise PipelineError(f"unsupported model version {obj.get('version')!r}")
    return CrfModel(
        tagset=tuple(obj["tagset"]),
        emissions=obj["emissions"],
        transitions=obj["transitions"],
        template_version=obj["template_version"],
        iterations=obj["iterations"],
        seed=obj["seed"],
    )


def save_model(path: Path, model: CrfModel) -> None:
    with open(path, "w", encoding="utf-8") as handle:
        json.dump(model_to_json(model), handle, sort_keys=True)
        handle.write("\n")


def load_model(path: Path) -> CrfModel:
    with open(path, encoding="utf-8") as handle:
        return model_from_json(json.load(handle))


# ---------------------------------------------------------------------------
# External tagger plugin and corpus tagging
# ---------------------------------------------------------------------------


class TaggerPlugin:
    """Out-of-process tagger speaking one JSON object per line:
    {doc_id, tokens} in, {doc_id, tags, confidence?} out."""

    def __init__(self, command: Sequence[str]):
        self._proc = LineProtocolProcess(command)

    def tag(self, doc: Document) -> tuple[TagSequence, float]:
        reply = self._proc.request({"doc_id": doc.id, "tokens": doc.surfaces()})
        if not isinstance(reply, dict) or reply.get("doc_id") != doc.id:
            raise ProtocolError(f"reply does not match document {doc.id}")
        tags = reply.get("tags")
        if not isinstance(tags, list) or len(tags) != len(doc.tokens):
            raise ProtocolError(f"bad tag list for document {doc.id}")
        for tag in tags:
            if tag not in TAGS:
                raise ProtocolError(f"tag {tag!r} outside the IO alphabet")
        confidence = float(reply.get("confidence", 1.0))
        return list(tags), min(1.0, max(0.0, confidence))

    def close(self) -> None:
        self._proc.close()


Tagger = Union[CrfModel, TaggerPlugin]


def tag_corpus(
    tagger: Tagger, corpus: Sequence[Document]
) -> tuple[dict[str, list[Span]], list[dict]]:
    """Decode every document into model-provenance spans.

    Plugin protocol violations become per-document failure records; the
    rest of the corpus still gets tagged.
    """
    spans_by_doc: dict[str, list[Span]] = {}
    failures: list[dict] = []
    for doc in corpus:
        try:
            if isinstance(tagger, CrfModel):
                tags, confidence = decode_with_confidence(tagger, doc)
            else:
                tags, confidence = tagger.tag(doc)
        except ProtocolError as exc:
            failures.append({"doc_id": doc.id, "error": str(exc)})
            spans_by_doc[doc.id] = []
            continue
        spans_by_doc[doc.id] = tags_to_spans(
            tags, provenance=Provenance.MODEL, confidence=confidence
        )
    return spans_by_doc, failures
