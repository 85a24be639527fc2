import sys

import pytest

from ossner.core import EntityType, FormatError, Provenance, Span
from ossner.core import dataset_from_annotations
from ossner.dictionary import DictEntry, Dictionary
from ossner.distiller import (
    Demotion,
    PosRule,
    PosTaggerPlugin,
    apply_pos_rules,
    builtin_pos_tags,
    discard_entries,
    pos_tag,
    read_rules,
)

from synth import make_doc


class TestBuiltinTagger:
    def test_dt_nn_in_context(self):
        assert builtin_pos_tags(["the", "time", "of"]) == ["DT", "NN", "IN"]

    def test_file_while_context(self):
        assert builtin_pos_tags(["the", "file", "while"]) == ["DT", "NN", "IN"]

    def test_one_tag_per_token(self):
        words = "SST will fail if donor has to send keyring".split()
        tags = builtin_pos_tags(words)
        assert len(tags) == len(words)
        assert all(isinstance(t, str) and t for t in tags)

    def test_comparative(self):
        assert builtin_pos_tags(["a", "less", "than"]) == ["DT", "JJR", "IN"]


class TestPosTag:
    def test_fills_every_token(self):
        doc = pos_tag(make_doc("d", ["error", "messages", "from"]))
        assert [t.pos for t in doc.tokens] == ["NN", "NNS", "IN"]

    def test_empty_document_unchanged(self):
        doc = make_doc("d", [])
        assert pos_tag(doc) == doc

    def test_plugin_protocol(self, tmp_path):
        script = tmp_path / "tagger.py"
        script.write_text(
            "import json, sys\n"
            "for line in sys.stdin:\n"
            "    words = json.loads(line)\n"
            "    print(json.dumps(['XX' for _ in words]), flush=True)\n"
        )
        plugin = PosTaggerPlugin([sys.executable, str(script)])
        doc = pos_tag(make_doc("d", ["a", "b"]), plugin)
        assert [t.pos for t in doc.tokens] == ["XX", "XX"]
        plugin.close()

    def test_plugin_failure_falls_back(self, tmp_path):
        script = tmp_path / "broken.py"
        script.write_text("import sys; sys.exit(1)\n")
        plugin = PosTaggerPlugin([sys.executable, str(script)])
        doc = pos_tag(make_doc("d", ["the", "time", "of"]), plugin)
        assert [t.pos for t in doc.tokens] == ["DT", "NN", "IN"]
        plugin.close()


def tagged_dataset(words, pos, spans_by_doc):
    doc = make_doc("d1", words).with_pos(pos)
    return dataset_from_annotations([doc], spans_by_doc)


class TestApplyRules:
    def test_table_style_demotion(self):
        # "error messages from" with ERR span on "messages"
        dataset = tagged_dataset(
            ["error", "messages", "from"],
            ["NN", "NNS", "IN"],
            {"d1": [Span(1, 2, EntityType.ERR, Provenance.DICTIONARY)]},
        )
        rule = PosRule("messages", "NN", "NNS", "IN", EntityType.ERR)
        distilled, log = apply_pos_rules(dataset, [rule])
        assert distilled.items[0].tags == ["O", "O", "O"]
        assert len(log) == 1
        assert log[0].doc_id == "d1" and log[0].surface == "messages"

    def test_verb_find_demoted_with_wildcards(self):
        dataset = tagged_dataset(
            ["please", "find", "attached"],
            ["VB", "VB", "VBD"],
            {"d1": [Span(1, 2, EntityType.CMD, Provenance.DICTIONARY)]},
        )
        rule = PosRule("find", "*", "VB", "*", EntityType.CMD)
        distilled, log = apply_pos_rules(dataset, [rule])
        assert distilled.items[0].tags == ["O", "O", "O"]
        assert len(log) == 1

    def test_no_matching_context_unchanged(self):
        dataset = tagged_dataset(
            ["run", "find", "now"],
            ["VB", "NN", "RB"],
            {"d1": [Span(1, 2, EntityType.CMD, Provenance.DICTIONARY)]},
        )
        rule = PosRule("find", "*", "VB", "*", EntityType.CMD)
        distilled, log = apply_pos_rules(dataset, [rule])
        assert distilled.items[0].tags == ["O", "I_CMD", "O"]
        assert log == []

    def test_from_type_must_match(self):
        dataset = tagged_dataset(
            ["the", "less", "than"],
            ["DT", "JJR", "IN"],
            {"d1": [Span(1, 2, EntityType.CMD, Provenance.DICTIONARY)]},
        )
        rule = PosRule("less", "DT", "JJR", "IN", EntityType.PKG)
        distilled, log = apply_pos_rules(dataset, [rule])
        assert distilled.items[0].tags == ["O", "I_CMD", "O"]
        assert log == []

    def test_multi_token_span_anchors_on_first_token(self):
        dataset = tagged_dataset(
            ["the", "san", "francisco", "bay"],
            ["DT", "NNP", "NNP", "NN"],
            {"d1": [Span(1, 3, EntityType.ORG, Provenance.DICTIONARY)]},
        )
        rule = PosRule("*", "DT", "NNP", "*", EntityType.ORG)
        distilled, log = apply_pos_rules(dataset, [rule])
        assert distilled.items[0].tags == ["O", "O", "O", "O"]
        assert len(log) == 1

    def test_empty_rule_set_is_identity(self):
        dataset = tagged_dataset(
            ["error", "messages", "from"],
            ["NN", "NNS", "IN"],
            {"d1": [Span(1, 2, EntityType.ERR, Provenance.DICTIONARY)]},
        )
        distilled, log = apply_pos_rules(dataset, [])
        assert distilled.items[0].tags == dataset.items[0].tags
        assert log == []

    def test_idempotent(self):
        dataset = tagged_dataset(
            ["error", "messages", "from"],
            ["NN", "NNS", "IN"],
            {"d1": [Span(1, 2, EntityType.ERR, Provenance.DICTIONARY)]},
        )
        rule = PosRule("messages", "NN", "NNS", "IN", EntityType.ERR)
        once, log1 = apply_pos_rules(dataset, [rule])
        twice, log2 = apply_pos_rules(once, [rule])
        assert once.items[0].tags == twice.items[0].tags
        assert len(log1) == 1 and log2 == []

    def test_demotion_count_equals_span_delta(self):
        spans = {
            "d1": [
                Span(0, 1, EntityType.ERR, Provenance.DICTIONARY),
                Span(1, 2, EntityType.ERR, Provenance.DICTIONARY),
            ]
        }
        dataset = tagged_dataset(["messages", "messages"], ["NNS", "NNS"], spans)
        rule = PosRule("messages", "*", "NNS", "*", EntityType.ERR)
        distilled, log = apply_pos_rules(dataset, [rule])
        from ossner.core import tags_to_spans

        before = sum(len(tags_to_spans(ex.tags)) for ex in dataset.items)
        after = sum(len(tags_to_spans(ex.tags)) for ex in distilled.items)
        assert before - after == len(log)

    def test_all_wildcard_rule_rejected(self):
        with pytest.raises(FormatError):
            PosRule("*", "*", "*", "*", EntityType.PKG)


class TestDiscardEntries:
    def _demotions(self, surface, etype, count):
        doc = make_doc("d", [surface, "x"]).with_pos(["NN", "NN"])
        span = Span(0, 1, etype, Provenance.DICTIONARY)
        rule = PosRule(surface, "*", "NN", "*", etype)
        return [Demotion("d", span, surface, rule) for _ in range(count)]

    def test_over_threshold_removed(self):
        dictionary, _ = Dictionary(stopwords=frozenset()).add(
            [DictEntry("less", EntityType.PKG)]
        )
        updated, removed = discard_entries(
            dictionary, self._demotions("less", EntityType.PKG, 50), threshold=10
        )
        assert ("less", EntityType.PKG) not in updated
        assert removed == [("less", EntityType.PKG, 50)]

    def test_under_threshold_kept(self):
        dictionary, _ = Dictionary(stopwords=frozenset()).add(
            [DictEntry("less", EntityType.PKG)]
        )
        updated, removed = discard_entries(
            dictionary, self._demotions("less", EntityType.PKG, 3), threshold=10
        )
        assert ("less", EntityType.PKG) in updated
        assert removed == []

    def test_empty_log_unchanged(self):
        dictionary, _ = Dictionary().add([DictEntry("cat", EntityType.CMD)])
        updated, removed = discard_entries(dictionary, [], threshold=0)
        assert len(updated) == len(dictionary) and removed == []

    def test_threshold_zero_removes_every_logged_surface(self):
        dictionary, _ = Dictionary(stopwords=frozenset()).add(
            [DictEntry("less", EntityType.PKG), DictEntry("cat", EntityType.CMD)]
        )
        updated, _ = discard_entries(
            dictionary, self._demotions("less", EntityType.PKG, 1), threshold=0
        )
        assert ("less", EntityType.PKG) not in updated
        assert ("cat", EntityType.CMD) in updated


class TestRulesFile:
    def test_round_trip(self, tmp_path):
        path = tmp_path / "rules.tsv"
        path.write_text(
            "# surface prev self next from_type\n"
            "messages\tNN\tNNS\tIN\tERR\n"
            "find\t*\tVB\t*\tCMD\n"
        )
        rules = read_rules(path)
        assert rules == [
            PosRule("messages", "NN", "NNS", "IN", EntityType.ERR),
            PosRule("find", "*", "VB", "*", EntityType.CMD),
        ]

    def test_bad_column_count(self, tmp_path):
        path = tmp_path / "rules.tsv"
        path.write_text("messages\tNN\tNNS\n")
        with pytest.raises(FormatError):
            read_rules(path)
