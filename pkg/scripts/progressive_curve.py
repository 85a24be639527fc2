#!/usr/bin/env python3
"""Recall versus training-set fraction on a synthetic corpus.

Trains the native tagger on nested stratified 25/50/75/100% subsets and
writes the curve as CSV.

Usage: python3 scripts/progressive_curve.py [--docs 120] [--out curve.csv]
"""

import argparse
import random
from datetime import date

from ossner.core import (
    EntityType,
    Provenance,
    Span,
    dataset_from_annotations,
    make_document,
)
from ossner.crf import tag_corpus, train_pa
from ossner.evaluation import curve_to_csv, evaluate, progressive_runner

FILLER = "after upgrade report crash boot screen session login kernel".split()


def build_dataset(n_docs, seed):
    rng = random.Random(seed)
    types = list(EntityType)
    docs, gold = [], {}
    for i in range(n_docs):
        surface = f"ent{i:03d}"
        etype = types[i % len(types)]
        words = [rng.choice(FILLER), surface] + [rng.choice(FILLER) for _ in range(3)]
        doc = make_document(f"d{i:04d}", " ".join(words), date(2010, 1, 1))
        docs.append(doc)
        gold[doc.id] = [Span(1, 2, etype, Provenance.HUMAN)]
    return dataset_from_annotations(docs, gold, name="progressive"), docs, gold


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--docs", type=int, default=120)
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument("--iterations", type=int, default=80)
    parser.add_argument("--out", default="curve.csv")
    args = parser.parse_args()

    dataset, docs, gold = build_dataset(args.docs, args.seed)

    def train_fn(subset):
        return train_pa(subset, iterations=args.iterations, seed=args.seed)

    def eval_fn(model):
        pred, _ = tag_corpus(model, docs)
        return evaluate(gold, pred, "exact")

    curve = progressive_runner(
        dataset, train_fn, eval_fn, steps=(0.25, 0.5, 0.75, 1.0), seed=args.seed
    )
    csv_text = curve_to_csv(curve)
    with open(args.out, "w", encoding="utf-8") as handle:
        handle.write(csv_text)
    print(csv_text, end="")


if __name__ == "__main__":
    main()
