#!/usr/bin/env python3
"""Human-in-the-loop dictionary expansion on a replayable fixture.

Builds a corpus where half the planted entities are missing from the
seed dictionary, lets the loop harvest them from a fixture mention
provider with a scripted oracle as the annotator, and reports dictionary
growth plus the matching-recall lift on a held-out corpus.

Usage: python3 scripts/al_loop_demo.py [--new 40] [--noise 25] [--seed 0]
"""

import argparse
import json
import random
from datetime import date

from ossner.active_learning import (
    FixtureProvider,
    LoopState,
    Mention,
    ScriptedAnnotator,
    run_loop,
)
from ossner.core import EntityType, Provenance, Span, make_document, tags_to_spans
from ossner.dictionary import DictEntry, Dictionary
from ossner.evaluation import evaluate
from ossner.matcher import annotate_corpus

FILLER = (
    "after upgrade report crash boot screen session login kernel module "
    "driver config panel restart"
).split()

TYPES = list(EntityType)


def build_fixture(n_new, n_noise, seed):
    rng = random.Random(seed)
    seeds = [(f"seedpkg{i}", TYPES[i % len(TYPES)]) for i in range(5)]
    new_entities = [(f"newent{i:03d}", TYPES[i % len(TYPES)]) for i in range(n_new)]
    noise = [f"noise{i:03d}" for i in range(n_noise)]

    docs, mentions, truth = [], [], {}
    for i in range(n_new + n_noise):
        seed_surface, _ = seeds[i % len(seeds)]
        target = new_entities[i][0] if i < n_new else noise[i - n_new]
        filler = [rng.choice(FILLER) for _ in range(4)]
        words = [filler[0], seed_surface, filler[1], target, filler[2], filler[3]]
        doc = make_document(
            f"loop{i:04d}", " ".join(words), date(2004 + i % 16, 1, 1)
        )
        docs.append(doc)
        token = doc.tokens[3]
        mentions.append(Mention(doc.id, token.char_start, token.char_end, target, 0.9))
        truth[target] = new_entities[i][1] if i < n_new else None

    dictionary, _ = Dictionary().add(
        [DictEntry(s, t, source="seed", added_at=date(2004, 1, 1)) for s, t in seeds]
    )
    held_docs, held_gold = [], {}
    for j, (surface, etype) in enumerate(seeds + new_entities):
        words = [rng.choice(FILLER), surface, rng.choice(FILLER)]
        doc = make_document(f"held{j:04d}", " ".join(words), date(2020, 1, 1))
        held_docs.append(doc)
        held_gold[doc.id] = [Span(1, 2, etype, Provenance.HUMAN)]
    return docs, dictionary, FixtureProvider(mentions), truth, held_docs, held_gold


def matching_recall(docs, gold, dictionary):
    dataset, _ = annotate_corpus(docs, dictionary)
    pred = {ex.document.id: tags_to_spans(ex.tags) for ex in dataset.items}
    return evaluate(gold, pred, "exact").overall_recall


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--new", type=int, default=40)
    parser.add_argument("--noise", type=int, default=25)
    parser.add_argument("--seed", type=int, default=0)
    args = parser.parse_args()

    docs, dictionary, provider, truth, held_docs, held_gold = build_fixture(
        args.new, args.noise, args.seed
    )
    stage1, _ = annotate_corpus(docs, dictionary)
    before = matching_recall(held_docs, held_gold, dictionary)

    state = LoopState(labeled_data=stage1)
    state, grown, audit = run_loop(
        state, docs, provider, ScriptedAnnotator(truth), dictionary, seed=args.seed
    )
    for record in audit:
        print("round:", json.dumps(record, sort_keys=True))
    print(f"stopped: {state.stop_reason} after round {state.round}")
    print(f"dictionary: {len(dictionary)} -> {len(grown)} entries")
    print(f"human decisions: {state.human_labels}")
    after = matching_recall(held_docs, held_gold, grown)
    print(f"held-out matching recall: {before:.3f} -> {after:.3f}")


if __name__ == "__main__":
    main()
