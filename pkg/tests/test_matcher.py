import random
from datetime import date
from itertools import combinations

from ossner.core import EntityType, Provenance, Span, make_document, spans_to_tags
from ossner.dictionary import DictEntry, Dictionary, surface_key
from ossner.matcher import (
    MatchConfig,
    annotate_corpus,
    match_document,
    resolve_overlaps,
    span_priority,
    strip_urls,
)

from synth import dictionary_of, make_doc, planted_corpus, unique_entities


# ---------------------------------------------------------------------------
# Oracles
# ---------------------------------------------------------------------------


def naive_match(doc, dictionary, cfg):
    """O(n*m) reference matcher: every token position against every
    dictionary entry, with boundary checks and the same pruning and
    resolution policies."""
    masked = strip_urls(doc, cfg)
    lowered = [t.surface.lower() for t in doc.tokens]
    candidates = set()
    for entry in dictionary.entries():
        pattern = surface_key(entry.surface)
        width = len(pattern)
        for start in range(0, len(lowered) - width + 1):
            if tuple(lowered[start : start + width]) != pattern:
                continue
            if any(i in masked for i in range(start, start + width)):
                continue
            candidates.add((start, start + width, entry.entity_type))
    spans = [
        Span(s, e, t, Provenance.DICTIONARY) for s, e, t in sorted(
            candidates, key=lambda c: (c[0], c[1], c[2].value)
        )
    ]
    import re

    kept = []
    for span in spans:
        surface = doc.span_surface(span)
        if surface.lower() in cfg.stopwords:
            continue
        if any(re.fullmatch(p, surface) for p in cfg.regex_rejectors):
            continue
        kept.append(span)
    return resolve_overlaps(kept)


def oracle_resolution(candidates):
    """Enumerate every maximal pairwise-disjoint keep-set and return the
    one whose priority-rank sequence is lexicographically smallest."""
    n = len(candidates)
    ranked = sorted(range(n), key=lambda i: span_priority(candidates[i]))
    rank_of = {idx: r for r, idx in enumerate(ranked)}
    best_key, best_set = None, None
    for size_mask in range(1 << n):
        chosen = [i for i in range(n) if size_mask >> i & 1]
        if any(
            candidates[a].overlaps(candidates[b]) for a, b in combinations(chosen, 2)
        ):
            continue
        maximal = all(
            any(candidates[j].overlaps(candidates[i]) for i in chosen)
            for j in range(n)
            if j not in chosen
        )
        if not maximal:
            continue
        key = sorted(rank_of[i] for i in chosen)
        if best_key is None or key < best_key:
            best_key, best_set = key, chosen
    if best_set is None:
        return []
    return sorted(
        (candidates[i] for i in best_set), key=lambda s: s.token_start
    )


def random_instance(rng):
    """Random (doc, dictionary) pair: filler words plus dictionary
    surfaces sprinkled in, multi-word entries included."""
    vocab = ["alpha", "beta", "gamma", "delta", "zeta", "kappa", "omega"]
    entries = []
    n_entries = rng.randint(1, 30)
    for _ in range(n_entries):
        width = rng.choice([1, 1, 1, 2, 3])
        surface = " ".join(rng.choice(vocab) for _ in range(width))
        etype = rng.choice(list(EntityType))
        entries.append((surface, etype))
    dictionary = dictionary_of(entries)
    n_tokens = rng.randint(0, 40)
    words = [rng.choice(vocab) for _ in range(n_tokens)]
    if words and rng.random() < 0.3:
        words[rng.randrange(len(words))] = "http://bugs.debian.org/257568"
    doc = make_doc(f"r{rng.random()}", words)
    return doc, dictionary


class TestStripUrls:
    def test_url_tokens_masked(self):
        doc = make_doc("d", "see http://bugs.debian.org/257568 for details".split())
        masked = strip_urls(doc)
        url_token_indices = {
            i
            for i, t in enumerate(doc.tokens)
            if "debian" in t.surface or "257568" in t.surface
        }
        assert url_token_indices <= masked
        assert 0 not in masked

    def test_no_url_empty_mask(self):
        doc = make_doc("d", ["nothing", "to", "see"])
        assert strip_urls(doc) == set()

    def test_document_that_is_one_url(self):
        doc = make_doc("d", ["http://example.com/a/b?c=d"])
        assert strip_urls(doc) == set(range(len(doc.tokens)))


class TestSubwordRule:
    def test_current_desktop_not_marked(self):
        dictionary, _ = Dictionary().add([DictEntry("Desktop", EntityType.SOC)])
        doc = make_doc("d", ["CurrentDesktop", "broken"])
        assert match_document(doc, dictionary) == []

    def test_exact_token_still_matches(self):
        dictionary, _ = Dictionary().add([DictEntry("Desktop", EntityType.SOC)])
        doc = make_doc("d", ["Desktop", "broken"])
        spans = match_document(doc, dictionary)
        assert [s.key() for s in spans] == [(0, 1, EntityType.SOC)]


EXAMPLE_TEXT = (
    "After upgrading to Ubuntu 18.04 and thus from Linux 4.13 to "
    "Linux 4.15) the Monitor connected via VGA (through DVI-I) shows "
    "a `No Signal' message after amdgpu takes over from efifb and "
    "turns off."
)

EXAMPLE_DICT = [
    ("Ubuntu 18.04", EntityType.OS),
    ("Linux 4.13", EntityType.OS),
    ("Linux 4.15", EntityType.OS),
    ("Monitor", EntityType.PRP),
    ("VGA", EntityType.PRP),
]


class TestExampleSentence:
    def test_five_spans_of_the_example(self):
        doc = make_document("b1", EXAMPLE_TEXT, date(2018, 5, 1))
        spans = match_document(doc, dictionary_of(EXAMPLE_DICT))
        assert [s.key() for s in spans] == [
            (3, 5, EntityType.OS),
            (8, 10, EntityType.OS),
            (11, 13, EntityType.OS),
            (15, 16, EntityType.PRP),
            (18, 19, EntityType.PRP),
        ]
        assert all(s.provenance == Provenance.DICTIONARY for s in spans)

    def test_empty_document(self):
        doc = make_document("e", "", date(2018, 1, 1))
        assert match_document(doc, dictionary_of(EXAMPLE_DICT)) == []


class TestResolveOverlaps:
    def test_longest_span_wins(self):
        long = Span(0, 3, EntityType.OS, Provenance.DICTIONARY)
        short = Span(0, 1, EntityType.OS, Provenance.DICTIONARY)
        assert resolve_overlaps([short, long]) == [long]

    def test_disjoint_unchanged(self):
        spans = [
            Span(0, 1, EntityType.OS, Provenance.DICTIONARY),
            Span(2, 4, EntityType.PKG, Provenance.DICTIONARY),
        ]
        assert resolve_overlaps(spans) == spans

    def test_equal_length_earlier_start_wins(self):
        a = Span(0, 2, EntityType.OS, Provenance.DICTIONARY)
        b = Span(1, 3, EntityType.OS, Provenance.DICTIONARY)
        assert resolve_overlaps([b, a]) == [a]

    def test_entity_code_final_tiebreak(self):
        arc = Span(0, 2, EntityType.ARC, Provenance.DICTIONARY)
        pkg = Span(0, 2, EntityType.PKG, Provenance.DICTIONARY)
        assert resolve_overlaps([pkg, arc]) == [arc]

    def test_matches_exhaustive_oracle(self):
        rng = random.Random(7)
        for _ in range(200):
            n = rng.randint(0, 10)
            seen = set()
            candidates = []
            for _ in range(n):
                start = rng.randint(0, 8)
                end = start + rng.randint(1, 4)
                etype = rng.choice(list(EntityType))
                if (start, end, etype) in seen:
                    continue
                seen.add((start, end, etype))
                candidates.append(Span(start, end, etype, Provenance.DICTIONARY))
            assert resolve_overlaps(candidates) == oracle_resolution(candidates)

    def test_discarded_overlap_a_kept_span_of_geq_length(self):
        rng = random.Random(11)
        for _ in range(200):
            candidates = list(
                {
                    (
                        (start := rng.randint(0, 8)),
                        start + rng.randint(1, 4),
                        rng.choice(list(EntityType)),
                    )
                    for _ in range(rng.randint(0, 8))
                }
            )
            spans = [Span(s, e, t, Provenance.DICTIONARY) for s, e, t in candidates]
            kept = resolve_overlaps(spans)
            kept_keys = {k.key() for k in kept}
            for span in spans:
                if span.key() in kept_keys:
                    continue
                assert any(
                    span.overlaps(k) and k.length >= span.length for k in kept
                )


class TestMatcherOracle:
    def test_equals_naive_oracle_on_random_instances(self):
        rng = random.Random(42)
        cfg = MatchConfig()
        for _ in range(300):
            doc, dictionary = random_instance(rng)
            fast = match_document(doc, dictionary, cfg)
            slow = naive_match(doc, dictionary, cfg)
            assert [s.key() for s in fast] == [s.key() for s in slow]

    def test_stopword_candidates_pruned(self):
        # "while" is a function word; a dictionary entry for it never fires
        dictionary, _ = Dictionary(stopwords=frozenset()).add(
            [DictEntry("while", EntityType.PKG)]
        )
        doc = make_doc("d", ["crashes", "while", "loading"])
        assert match_document(doc, dictionary, MatchConfig()) == []

    def test_regex_rejector_drops_surfaces(self):
        dictionary = dictionary_of([("r2d2", EntityType.PKG), ("apt", EntityType.PKG)])
        cfg = MatchConfig(regex_rejectors=(r"[a-z]\d[a-z]\d",))
        doc = make_doc("d", ["r2d2", "and", "apt"])
        spans = match_document(doc, dictionary, cfg)
        assert [doc.span_surface(s) for s in spans] == ["apt"]

    def test_no_span_overlaps_url_mask(self):
        dictionary = dictionary_of([("debian", EntityType.ORG)])
        doc = make_doc("d", ["see", "http://debian.org", "debian", "rocks"])
        spans = match_document(doc, dictionary)
        # the URL splits into several tokens, all masked; only the bare
        # "debian" token after it is eligible
        bare = next(
            i for i, t in enumerate(doc.tokens) if t.surface == "debian"
        )
        assert [s.key() for s in spans] == [(bare, bare + 1, EntityType.ORG)]


class TestAnnotateCorpus:
    def test_stats_count_documents_with_hits(self):
        dictionary = dictionary_of([("apt", EntityType.PKG)])
        docs = [make_doc("a", ["apt", "broke"]), make_doc("b", ["nothing", "here"])]
        dataset, stats = annotate_corpus(docs, dictionary)
        assert len(dataset) == 2
        assert stats.documents_with_hits == 1
        assert stats.spans_per_type == {"PKG": 1}

    def test_url_only_corpus_is_all_outside(self):
        dictionary = dictionary_of([("debian", EntityType.ORG)])
        docs = [make_doc("a", ["http://debian.org/debian"])]
        dataset, _ = annotate_corpus(docs, dictionary)
        assert all(t == "O" for ex in dataset.items for t in ex.tags)

    def test_planted_corpus_full_recall(self):
        entities = unique_entities(12)
        docs, gold = planted_corpus(30, entities, seed=3)
        dataset, stats = annotate_corpus(docs, dictionary_of(entities))
        for ex in dataset.items:
            expected = spans_to_tags(ex.document, gold[ex.document.id])
            assert ex.tags == expected
        assert stats.documents_with_hits == 30

    def test_determinism(self):
        rng = random.Random(5)
        doc, dictionary = random_instance(rng)
        cfg = MatchConfig()
        assert match_document(doc, dictionary, cfg) == match_document(doc, dictionary, cfg)
