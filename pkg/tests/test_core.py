from datetime import date

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from ossner.core import (
    EntityType,
    InvalidTagError,
    OverlapError,
    Provenance,
    Span,
    TAGS,
    make_document,
    spans_to_tags,
    tags_to_spans,
    tokenize,
    validate_document,
)

from synth import make_doc


def surfaces(text):
    return [t.surface for t in tokenize(text)]


class TestTokenize:
    def test_whitespace_rule(self):
        assert surfaces("sudo apt update") == ["sudo", "apt", "update"]

    def test_trailing_punctuation_detached(self):
        assert surfaces("pypy-configparser crashed.") == [
            "pypy-configparser", "crashed", ".",
        ]

    def test_empty_input(self):
        assert surfaces("") == []

    def test_version_strings_survive(self):
        assert surfaces("from Linux 4.13 to Linux 4.15)") == [
            "from", "Linux", "4.13", "to", "Linux", "4.15", ")",
        ]

    def test_internal_protected_chars(self):
        assert surfaces("x86_64 a/b c++ libgtk2.0-bin") == [
            "x86_64", "a/b", "c", "+", "+", "libgtk2.0-bin",
        ]

    def test_unprotected_internal_punctuation_splits(self):
        assert surfaces("foo,bar") == ["foo", ",", "bar"]

    @given(st.text(max_size=80))
    @settings(max_examples=300)
    def test_offsets_reconstruct_text(self, text):
        tokens = tokenize(text)
        for token in tokens:
            assert text[token.char_start : token.char_end] == token.surface
            assert not any(c.isspace() for c in token.surface)

    @given(st.text(max_size=80))
    @settings(max_examples=300)
    def test_offsets_ordered_and_disjoint(self, text):
        tokens = tokenize(text)
        for a, b in zip(tokens, tokens[1:]):
            assert a.char_end <= b.char_start

    def test_deterministic(self):
        text = "Ubuntu 18.04 (bionic) fails; see /var/log/syslog."
        assert tokenize(text) == tokenize(text)


class TestValidateDocument:
    def _doc_with_words(self, n):
        return make_doc("d", ["word"] * n)

    def test_59_words_rejected(self):
        result = validate_document(self._doc_with_words(59))
        assert (result.accepted, result.reason) == (False, "too_short")

    def test_60_words_accepted(self):
        assert validate_document(self._doc_with_words(60)).accepted

    def test_400_words_accepted(self):
        assert validate_document(self._doc_with_words(400)).accepted

    def test_401_words_rejected(self):
        result = validate_document(self._doc_with_words(401))
        assert (result.accepted, result.reason) == (False, "too_long")

    def test_cross_reference_rejected(self):
        doc = make_doc("d", "Automatically imported from Debian bug report #257568".split())
        result = validate_document(doc)
        assert (result.accepted, result.reason) == (False, "cross_reference")

    def test_pure_function_of_inputs(self):
        doc = self._doc_with_words(60)
        assert validate_document(doc) == validate_document(doc)


class TestSpansTags:
    def test_example_sentence_tagging(self):
        text = (
            "After upgrading to Ubuntu 18.04 and thus from Linux 4.13 to "
            "Linux 4.15) the Monitor connected via VGA (through DVI-I) shows "
            "a `No Signal' message after amdgpu takes over from efifb and "
            "turns off."
        )
        doc = make_document("b1", text, date(2018, 5, 1))
        spans = [
            Span(3, 5, EntityType.OS, Provenance.DICTIONARY),
            Span(8, 10, EntityType.OS, Provenance.DICTIONARY),
            Span(11, 13, EntityType.OS, Provenance.DICTIONARY),
            Span(15, 16, EntityType.PRP, Provenance.DICTIONARY),
            Span(18, 19, EntityType.PRP, Provenance.DICTIONARY),
        ]
        tags = spans_to_tags(doc, spans)
        assert tags[:14] == ["O"] * 3 + ["I_OS"] * 2 + ["O"] * 3 + ["I_OS"] * 2 + ["O"] + ["I_OS"] * 2 + ["O"]
        assert tags[15] == "I_PRP"
        assert tags[18] == "I_PRP"
        assert all(t == "O" for i, t in enumerate(tags) if i not in (3, 4, 8, 9, 11, 12, 15, 18))

    def test_no_spans_all_outside(self):
        doc = make_doc("d", ["a", "b", "c"])
        assert spans_to_tags(doc, []) == ["O", "O", "O"]

    def test_full_document_span(self):
        doc = make_doc("d", ["a", "b", "c"])
        tags = spans_to_tags(doc, [Span(0, 3, EntityType.PKG, Provenance.HUMAN)])
        assert tags == ["I_PKG"] * 3

    def test_overlap_rejected(self):
        doc = make_doc("d", ["a", "b", "c"])
        spans = [
            Span(0, 2, EntityType.PKG, Provenance.HUMAN),
            Span(1, 3, EntityType.OS, Provenance.HUMAN),
        ]
        with pytest.raises(OverlapError):
            spans_to_tags(doc, spans)

    def test_runs_become_spans(self):
        spans = tags_to_spans(["O", "I_OS", "I_OS", "O"])
        assert [s.key() for s in spans] == [(1, 3, EntityType.OS)]

    def test_all_outside(self):
        assert tags_to_spans(["O", "O"]) == []

    def test_type_change_is_a_boundary(self):
        spans = tags_to_spans(["I_PKG", "I_OS"])
        assert [s.key() for s in spans] == [
            (0, 1, EntityType.PKG),
            (1, 2, EntityType.OS),
        ]

    def test_unknown_tag_rejected(self):
        with pytest.raises(InvalidTagError):
            tags_to_spans(["O", "B_PKG"])

    def test_alphabet_has_ten_symbols(self):
        assert len(TAGS) == 10
        assert TAGS[0] == "O"
        assert len(EntityType) == 9


class TestRoundTrip:
    @given(st.data())
    @settings(max_examples=300)
    def test_round_trip_merges_only_adjacent_same_type(self, data):
        n = data.draw(st.integers(1, 18))
        doc = make_doc("d", ["w"] * n)
        # construct random disjoint spans
        starts = sorted(data.draw(st.sets(st.integers(0, n - 1), max_size=6)))
        spans = []
        cursor = 0
        for s in starts:
            if s < cursor:
                continue
            end = data.draw(st.integers(s + 1, min(n, s + 3)))
            etype = data.draw(st.sampled_from(list(EntityType)))
            spans.append(Span(s, end, etype, Provenance.HUMAN))
            cursor = end
        tags = spans_to_tags(doc, spans)
        recovered = tags_to_spans(tags)

        # oracle: merge adjacent same-type spans of the input
        merged = []
        for span in sorted(spans, key=lambda s: s.token_start):
            if merged and merged[-1][1] == span.token_start and merged[-1][2] == span.entity_type:
                merged[-1] = (merged[-1][0], span.token_end, span.entity_type)
            else:
                merged.append((span.token_start, span.token_end, span.entity_type))
        assert [s.key() for s in recovered] == [tuple(m) for m in merged]
