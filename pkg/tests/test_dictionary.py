from datetime import date

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from ossner.core import EntityType, FormatError
from ossner.dictionary import (
    DictEntry,
    Dictionary,
    default_stopwords,
    load_lookup_tables,
    save_lookup_tables,
    surface_key,
)


def write_tsv(path, rows, header=True):
    lines = []
    if header:
        lines.append("surface\tentity_type\tsource\tadded_at")
    for row in rows:
        lines.append("\t".join(row))
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")


SAMPLE_ROWS = [
    ("cat", "CMD", "manpages", "2004-01-01"),
    ("bios", "SOC", "handcrafted", "2004-01-01"),
    ("x86", "ARC", "community", "2004-01-01"),
]


class TestLoad:
    def test_three_row_file(self, tmp_path):
        path = tmp_path / "dict.tsv"
        write_tsv(path, SAMPLE_ROWS)
        dictionary = load_lookup_tables(path)
        counts = dictionary.counts()
        assert counts["CMD"] == 1 and counts["SOC"] == 1 and counts["ARC"] == 1
        assert len(dictionary) == 3

    def test_duplicate_rows_collapse(self, tmp_path):
        path = tmp_path / "dict.tsv"
        write_tsv(path, [SAMPLE_ROWS[0], ("cat", "CMD", "other", "2010-06-01")])
        dictionary = load_lookup_tables(path)
        assert dictionary.counts()["CMD"] == 1
        entry = dictionary.entries()[0]
        assert entry.added_at == date(2004, 1, 1)  # earliest wins

    def test_stopword_rows_rejected(self, tmp_path):
        path = tmp_path / "dict.tsv"
        write_tsv(path, [("the", "PKG", "x", "2004-01-01"), SAMPLE_ROWS[0]])
        dictionary = load_lookup_tables(path)
        assert len(dictionary) == 1

    def test_malformed_row_reports_line(self, tmp_path):
        path = tmp_path / "dict.tsv"
        path.write_text("surface\tentity_type\tsource\tadded_at\ncat\tCMD\n")
        with pytest.raises(FormatError) as err:
            load_lookup_tables(path)
        assert err.value.line == 2

    def test_unknown_entity_type(self, tmp_path):
        path = tmp_path / "dict.tsv"
        write_tsv(path, [("cat", "KITTEN", "x", "2004-01-01")])
        with pytest.raises(FormatError):
            load_lookup_tables(path)

    def test_multiple_per_type_files(self, tmp_path):
        a, b = tmp_path / "a.tsv", tmp_path / "b.tsv"
        write_tsv(a, SAMPLE_ROWS[:1])
        write_tsv(b, SAMPLE_ROWS[1:])
        dictionary = load_lookup_tables([a, b])
        assert len(dictionary) == 3


class TestAdd:
    def test_insert_new(self):
        dictionary, report = Dictionary().add(
            [DictEntry("docker-ce", EntityType.PKG)]
        )
        assert report.inserted == 1
        assert ("docker-ce", EntityType.PKG) in dictionary

    def test_already_present(self):
        dictionary, _ = Dictionary().add([DictEntry("cat", EntityType.CMD)])
        updated, report = dictionary.add([DictEntry("cat", EntityType.CMD)])
        assert report.already_present == 1
        assert len(updated) == 1

    def test_stopword_rejected(self):
        dictionary, report = Dictionary().add([DictEntry("the", EntityType.PKG)])
        assert report.rejected == 1
        assert len(dictionary) == 0

    def test_original_unchanged(self):
        original = Dictionary()
        updated, _ = original.add([DictEntry("cat", EntityType.CMD)])
        assert len(original) == 0 and len(updated) == 1


class TestQuery:
    def test_multi_word_error_phrase(self):
        dictionary, _ = Dictionary().add([DictEntry("No such process", EntityType.ERR)])
        assert dictionary.query(["no", "such", "process"]) == [EntityType.ERR]

    def test_case_insensitive_token_hit(self):
        dictionary, _ = Dictionary().add([DictEntry("Desktop", EntityType.SOC)])
        assert dictionary.query(["desktop"]) == [EntityType.SOC]

    def test_miss(self):
        dictionary, _ = Dictionary().add([DictEntry("cat", EntityType.CMD)])
        assert dictionary.query(["zzz"]) == []

    def test_same_surface_two_types(self):
        dictionary, _ = Dictionary().add(
            [DictEntry("arch", EntityType.CMD), DictEntry("Arch", EntityType.OS)]
        )
        assert dictionary.query(["arch"]) == [EntityType.CMD, EntityType.OS]

    @given(st.text(alphabet="abcdefg .-", min_size=1, max_size=20))
    @settings(max_examples=200)
    def test_query_matches_entry_tokenization(self, surface):
        try:
            entry = DictEntry(surface, EntityType.PKG)
        except FormatError:
            return
        if surface.strip().lower() in default_stopwords():
            return
        dictionary, report = Dictionary().add([entry])
        key = surface_key(surface)
        if key:
            assert (dictionary.query(list(key)) == [EntityType.PKG]) == bool(report.inserted)


class TestProductionScaleCounts:
    # per-type totals of the released lookup tables; the loader must
    # report exactly these when fed that many unique rows per type
    RELEASED_COUNTS = {
        "PKG": 140062, "OS": 877, "ORG": 379, "CMD": 141, "ERR": 124,
        "EXT": 76, "PRP": 23, "SOC": 12, "ARC": 7,
    }

    def test_counts_at_released_table_scale(self, tmp_path):
        path = tmp_path / "full.tsv"
        with open(path, "w", encoding="utf-8") as handle:
            handle.write("surface\tentity_type\tsource\tadded_at\n")
            for code, count in self.RELEASED_COUNTS.items():
                for i in range(count):
                    handle.write(f"{code.lower()}-entry-{i:06d}\t{code}\tsynthetic\t2004-01-01\n")
        dictionary = load_lookup_tables(path)
        assert dictionary.counts() == self.RELEASED_COUNTS
        assert len(dictionary) == sum(self.RELEASED_COUNTS.values())


class TestRoundTrip:
    def test_load_save_load_identity(self, tmp_path):
        path = tmp_path / "dict.tsv"
        write_tsv(path, SAMPLE_ROWS + [("No such process", "ERR", "wiki", "2005-02-03")])
        first = load_lookup_tables(path)
        out = tmp_path / "saved.tsv"
        save_lookup_tables(out, first)
        second = load_lookup_tables(out)
        assert {e for e in first.entries()} == {e for e in second.entries()}

    def test_counts_equal_unique_pairs(self, tmp_path):
        dictionary, _ = Dictionary().add(
            [
                DictEntry("cat", EntityType.CMD),
                DictEntry("CAT", EntityType.CMD),  # same pair, case-insensitive
                DictEntry("cat", EntityType.PKG),
            ]
        )
        assert sum(dictionary.counts().values()) == 2
