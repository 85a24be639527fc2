"""Metrics and experimental protocol.

Both matching modes count gold mentions; they differ in what earns the
credit.  ``exact`` requires an identical (span, type) pair.
``type-at-token`` credits a gold mention when a predicted span of the
same type agrees with it on at least one token; credits are assigned
one-to-one via maximum bipartite matching, so per-class matched counts
never exceed either side and the exact mode can never beat it.
"""

from __future__ import annotations

import random
from dataclasses import dataclass, field
from typing import Callable, Mapping, Optional, Sequence

from .core import (
    EntityType,
    LabeledDataset,
    LabeledExample,
    PipelineError,
    Span,
    TAG_ORDER,
    TagSequence,
)

MATCHING_MODES = ("exact", "type_at_token")


@dataclass(frozen=True)
class ClassMetrics:
    gold: int
    predicted: int
    matched: int
    recall: Optional[float]
    precision: Optional[float]
    f1: Optional[float]


def prf_from_counts(
    gold: int, predicted: int, matched: int
) -> tuple[Optional[float], Optional[float], Optional[float]]:
    """Shared precision/recall/F1 arithmetic; None marks an undefined rate
    (empty denominator on both sides)."""
    recall = matched / gold if gold else None
    precision = matched / predicted if predicted else None
    if gold == 0 and predicted == 0:
        return None, None, None
    p = precision or 0.0
    r = recall or 0.0
    f1 = 2 * p * r / (p + r) if (p + r) > 0 else 0.0
    return recall, precision, f1


@dataclass
class EvalReport:
    matching: str
    per_class: dict[str, ClassMetrics]
    overall_recall: float
    macro_f1: float
    gold_total: int
    predicted_total: int
    matched_total: int
    config: dict = field(default_factory=dict)

    def to_json(self) -> dict:
        return {
            "matching": self.matching,
            "overall_recall": self.overall_recall,
            "macro_f1": self.macro_f1,
            "counts": {
                "gold": self.gold_total,
                "predicted": self.predicted_total,
                "matched": self.matched_total,
            },
            "per_class": {
                code: {
                    "gold": m.gold,
                    "predicted": m.predicted,
                    "matched": m.matched,
                    "recall": m.recall,
                    "precision": m.precision,
                    "f1": m.f1,
                }
                for code, m in sorted(self.per_class.items())
            },
            "config": self.config,
        }


def _max_matching(golds: Sequence[Span], preds: Sequence[Span]) -> int:
    """Maximum one-to-one matching size; an edge needs >= 1 shared token."""
    owner: dict[int, int] = {}

    def assign(gi: int, seen: set[int]) -> bool:
        for pi, pred in enumerate(preds):
            if pi in seen or not golds[gi].overlaps(pred):
                continue
            seen.add(pi)
            if pi not in owner or assign(owner[pi], seen):
                owner[pi] = gi
                return True
        return False

    return sum(1 for gi in range(len(golds)) if assign(gi, set()))


def _exact_matches(golds: Sequence[Span], preds: Sequence[Span]) -> int:
    from collections import Counter

    gold_keys = Counter(s.key() for s in golds)
    pred_keys = Counter(s.key() for s in preds)
    return sum(min(count, pred_keys[key]) for key, count in gold_keys.items())


def evaluate(
    gold: Mapping[str, list[Span]],
    pred: Mapping[str, list[Span]],
    matching: str = "exact",
    config: Optional[dict] = None,
) -> EvalReport:
    """Per-class and overall recall, precision, F1 for one matching mode.

    Classes absent from both gold and prediction are excluded from the
    macro-F1 mean.
    """
    if matching not in MATCHING_MODES:
        raise PipelineError(f"unknown matching mode {matching!r}")
    if set(gold) != set(pred):
        missing = set(gold) ^ set(pred)
        raise PipelineError(f"gold/pred document ids differ: {sorted(missing)[:5]}")

    counts = {e.value: {"gold": 0, "predicted": 0, "matched": 0} for e in EntityType}
    for doc_id in gold:
        gold_by_class: dict[str, list[Span]] = {}
        pred_by_class: dict[str, list[Span]] = {}
        for span in gold[doc_id]:
            gold_by_class.setdefault(span.entity_type.value, []).append(span)
        for span in pred[doc_id]:
            pred_by_class.setdefault(span.entity_type.value, []).append(span)
        for code in set(gold_by_class) | set(pred_by_class):
            golds = gold_by_class.get(code, [])
            preds = pred_by_class.get(code, [])
            counts[code]["gold"] += len(golds)
            counts[code]["predicted"] += len(preds)
            if matching == "exact":
                counts[code]["matched"] += _exact_matches(golds, preds)
            else:
                counts[code]["matched"] += _max_matching(golds, preds)

    per_class = {}
    f1_values = []
    for code, c in counts.items():
        recall, precision, f1 = prf_from_counts(c["gold"], c["predicted"], c["matched"])
        per_class[code] = ClassMetrics(
            c["gold"], c["predicted"], c["matched"], recall, precision, f1
        )
        if f1 is not None:
            f1_values.append(f1)

    gold_total = sum(c["gold"] for c in counts.values())
    predicted_total = sum(c["predicted"] for c in counts.values())
    matched_total = sum(c["matched"] for c in counts.values())
    return EvalReport(
        matching=matching,
        per_class=per_class,
        overall_recall=matched_total / gold_total if gold_total else 1.0,
        macro_f1=sum(f1_values) / len(f1_values) if f1_values else 1.0,
        gold_total=gold_total,
        predicted_total=predicted_total,
        matched_total=matched_total,
        config=config or {},
    )


def recall_rate(gold, pred, matching: str = "exact") -> EvalReport:
    return evaluate(gold, pred, matching)


def precision_f1_macro(gold, pred, matching: str = "exact") -> EvalReport:
    return evaluate(gold, pred, matching)


# ---------------------------------------------------------------------------
# Splits
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class SplitConfig:
    mode: str = "HIn"
    fractions: tuple[float, float, float] = (0.1, 0.2, 0.7)
    seed: int = 0

    def __post_init__(self):
        if self.mode not in ("HIn", "HOn"):
            raise PipelineError(f"unknown split mode {self.mode!r}")
        if abs(sum(self.fractions) - 1.0) > 1e-9:
            raise PipelineError(f"fractions {self.fractions} do not sum to 1")


def make_splits(
    human: LabeledDataset, silver: LabeledDataset, cfg: SplitConfig
) -> tuple[LabeledDataset, LabeledDataset, LabeledDataset]:
    """Partition the human set by cfg.fractions under cfg.seed.

    The partition depends only on the seed, so HIn and HOn share the same
    validation and test sets; HIn additionally trains on all silver data.
    """
    if not human.items:
        raise PipelineError("human dataset is empty")
    indices = list(range(len(human.items)))
    random.Random(cfg.seed).shuffle(indices)
    n = len(indices)
    n_train = round(n * cfg.fractions[0])
    n_valid = round(n * cfg.fractions[1])
    train_idx = indices[:n_train]
    valid_idx = indices[n_train : n_train + n_valid]
    test_idx = indices[n_train + n_valid :]

    human_train = [human.items[i] for i in train_idx]
    valid = LabeledDataset([human.items[i] for i in valid_idx], name="valid")
    test = LabeledDataset([human.items[i] for i in test_idx], name="test")
    if cfg.mode == "HIn":
        train = LabeledDataset(list(silver.items) + human_train, name="train-HIn")
    else:
        train = LabeledDataset(human_train, name="train-HOn")
    return train, valid, test


# ---------------------------------------------------------------------------
# Progressive learning
# ---------------------------------------------------------------------------


def dominant_class(example: LabeledExample) -> str:
    """Stratum label: the example's most frequent inside tag (canonical
    order breaks ties), or O when it has no entities."""
    freq: dict[str, int] = {}
    for tag in example.tags:
        if tag != "O":
            freq[tag] = freq.get(tag, 0) + 1
    if not freq:
        return "O"
    return min(freq, key=lambda t: (-freq[t], TAG_ORDER[t]))


def stratified_subsets(
    dataset: LabeledDataset, steps: Sequence[float], seed: int = 0
) -> dict[float, LabeledDataset]:
    """Nested subsets preserving per-stratum proportions within one item.

    Each stratum is shuffled once under ``seed``; a fraction then takes a
    prefix, so smaller fractions are always contained in larger ones.
    """
    strata: dict[str, list[LabeledExample]] = {}
    for ex in dataset.items:
        strata.setdefault(dominant_class(ex), []).append(ex)
    rng = random.Random(seed)
    for bucket in strata.values():
        rng.shuffle(bucket)
    subsets = {}
    for fraction in sorted(steps):
        if not 0.0 < fraction <= 1.0:
            raise PipelineError(f"fraction {fraction} outside (0, 1]")
        chosen: list[LabeledExample] = []
        for code in sorted(strata):
            bucket = strata[code]
            chosen.extend(bucket[: round(fraction * len(bucket))])
        subsets[fraction] = LabeledDataset(chosen, name=f"{dataset.name}@{fraction}")
    return subsets


@dataclass(frozen=True)
class CurvePoint:
    fraction: float
    size: int
    report: EvalReport


def progressive_runner(
    train: LabeledDataset,
    train_fn: Callable[[LabeledDataset], object],
    eval_fn: Callable[[object], EvalReport],
    steps: Sequence[float] = (0.25, 0.5, 0.75, 1.0),
    seed: int = 0,
) -> list[CurvePoint]:
    """Train on nested stratified fractions and evaluate each model."""
    if not train.items:
        raise PipelineError("training dataset is empty")
    subsets = stratified_subsets(train, steps, seed=seed)
    curve = []
    for fraction in sorted(subsets):
        subset = subsets[fraction]
        model = train_fn(subset)
        curve.append(CurvePoint(fraction, len(subset), eval_fn(model)))
    return curve


def curve_to_csv(curve: Sequence[CurvePoint]) -> str:
    lines = ["fraction,size,overall_recall,macro_f1"]
    for point in curve:
        lines.append(
            f"{point.fraction},{point.size},"
            f"{point.report.overall_recall},{point.report.macro_f1}"
        )
    return "\n".join(lines) + "\n"


# ---------------------------------------------------------------------------
# Stage coverage and inter-annotator agreement
# ---------------------------------------------------------------------------


def stage_coverage(
    stage1: Mapping[str, list[Span]], stage2: Mapping[str, list[Span]]
) -> dict[str, dict]:
    """Per type: spans found in stage 1, spans new in stage 2, and each
    share of their union."""
    out = {}
    for etype in EntityType:
        code = etype.value
        first = {
            (doc_id, s.key())
            for doc_id, spans in stage1.items()
            for s in spans
            if s.entity_type == etype
        }
        second = {
            (doc_id, s.key())
            for doc_id, spans in stage2.items()
            for s in spans
            if s.entity_type == etype
        }
        new = second - first
        union = len(first | second)
        out[code] = {
            "stage1": len(first),
            "stage2_new": len(new),
            "union": union,
            "stage1_share": len(first) / union if union else 0.0,
            "stage2_share": len(new) / union if union else 0.0,
        }
    return out


def agreement(tags_a: Sequence[TagSequence], tags_b: Sequence[TagSequence]) -> float:
    """Token-level Cohen's kappa between two annotators' tag sequences."""
    if len(tags_a) != len(tags_b):
        raise PipelineError("annotator document counts differ")
    pairs = []
    for i, (a, b) in enumerate(zip(tags_a, tags_b)):
        if len(a) != len(b):
            raise PipelineError(f"length mismatch in document index {i}")
        pairs.extend(zip(a, b))
    if not pairs:
        raise PipelineError("no tokens to compare")
    n = len(pairs)
    observed = sum(1 for a, b in pairs if a == b) / n
    freq_a: dict[str, int] = {}
    freq_b: dict[str, int] = {}
    for a, b in pairs:
        freq_a[a] = freq_a.get(a, 0) + 1
        freq_b[b] = freq_b.get(b, 0) + 1
    expected = sum(
        (freq_a.get(t, 0) / n) * (freq_b.get(t, 0) / n)
        for t in set(freq_a) | set(freq_b)
    )
    if expected == 1.0:
        return 1.0 if observed == 1.0 else 0.0
    return (observed - expected) / (1.0 - expected)
