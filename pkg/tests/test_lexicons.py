import pytest
from hypothesis import given, strategies as st

from founderlens.errors import InputFormatError, ValidationError
from founderlens.lexicons import (
    AffectNorms,
    CategoryLexicon,
    builtin_affect_norms,
    category_name_templates,
    dump_category_lexicon,
    load_affect_norms,
    load_builtin_lexicons,
    load_category_lexicon,
    load_lexicon_dir,
    match_token,
)


def make_lexicon(name="demo", exact=(), prefixes=()):
    return CategoryLexicon(
        name=name, exact_entries=frozenset(exact), prefix_entries=frozenset(prefixes)
    )


class TestMatchToken:
    def test_exact_hit(self):
        lx = make_lexicon(exact={"happy"})
        assert match_token(lx, "happy")
        assert not match_token(lx, "happily")

    def test_prefix_hit(self):
        lx = make_lexicon(prefixes={"happ"})
        assert match_token(lx, "happy")
        assert match_token(lx, "happ")
        assert not match_token(lx, "hap")

    def test_longer_token_than_any_prefix(self):
        lx = make_lexicon(prefixes={"a"})
        assert match_token(lx, "aaaaaaaaaaaaaaaa")

    @given(
        token=st.text(alphabet="abcde", min_size=1, max_size=8),
        exact=st.sets(st.text(alphabet="abcde", min_size=1, max_size=6), max_size=8),
        prefixes=st.sets(st.text(alphabet="abcde", min_size=1, max_size=6), max_size=8),
    )
    def test_matches_brute_force(self, token, exact, prefixes):
        # entries sharing a surface form across sets are rejected by the type
        exact = exact - prefixes
        if not exact and not prefixes:
            exact = {"zzz"}
        lx = make_lexicon(exact=exact, prefixes=prefixes)
        expected = token in exact or any(token.startswith(p) for p in prefixes)
        assert match_token(lx, token) == expected


class TestLexiconFiles:
    def test_round_trip(self, tmp_path):
        lx = make_lexicon(name="roundtrip", exact={"sad", "glad"}, prefixes={"happ", "joy"})
        path = tmp_path / "roundtrip.txt"
        dump_category_lexicon(lx, path)
        again = load_category_lexicon(path)
        assert again == lx

    def test_load_skips_comments_and_blanks(self, tmp_path):
        path = tmp_path / "cat.txt"
        path.write_text("# header\n\nhappy\nsad*\n")
        lx = load_category_lexicon(path)
        assert lx.exact_entries == frozenset({"happy"})
        assert lx.prefix_entries == frozenset({"sad"})
        assert lx.name == "cat"

    def test_interior_wildcard_rejected(self, tmp_path):
        path = tmp_path / "bad.txt"
        path.write_text("ha*py\n")
        with pytest.raises(InputFormatError) as exc:
            load_category_lexicon(path)
        assert "1" in str(exc.value)

    def test_bare_wildcard_rejected(self, tmp_path):
        path = tmp_path / "bad.txt"
        path.write_text("*\n")
        with pytest.raises(InputFormatError):
            load_category_lexicon(path)

    def test_entry_with_whitespace_rejected(self, tmp_path):
        path = tmp_path / "bad.txt"
        path.write_text("happy\ntwo words\n")
        with pytest.raises(InputFormatError) as exc:
            load_category_lexicon(path)
        assert "2" in str(exc.value)

    def test_empty_lexicon_rejected(self, tmp_path):
        path = tmp_path / "empty.txt"
        path.write_text("# nothing here\n")
        with pytest.raises(ValidationError):
            load_category_lexicon(path)

    def test_load_dir_sorted_by_name(self, tmp_path):
        (tmp_path / "b.txt").write_text("bee\n")
        (tmp_path / "a.txt").write_text("ant\n")
        names = [lx.name for lx in load_lexicon_dir(tmp_path)]
        assert names == ["a", "b"]

    def test_load_dir_empty_rejected(self, tmp_path):
        with pytest.raises(ValidationError):
            load_lexicon_dir(tmp_path)


class TestLexiconType:
    def test_overlap_between_sets_rejected(self):
        with pytest.raises(ValidationError):
            make_lexicon(exact={"happ"}, prefixes={"happ"})

    def test_uppercase_rejected(self):
        with pytest.raises(ValidationError):
            make_lexicon(exact={"Happy"})


class TestAffectNorms:
    def test_lookup_and_miss(self):
        norms = AffectNorms(entries={"calm": (3.0, 2.0)})
        assert norms.get("calm") == (3.0, 2.0)
        assert norms.get("storm") is None

    def test_value_out_of_scale_rejected(self):
        with pytest.raises(ValidationError):
            AffectNorms(entries={"calm": (0.5, 2.0)})

    def test_load_header_checked(self, tmp_path):
        path = tmp_path / "norms.csv"
        path.write_text("word,valence,arousal\ncalm,3,2\n")
        with pytest.raises(InputFormatError):
            load_affect_norms(path)

    def test_load_duplicate_lemma_named(self, tmp_path):
        path = tmp_path / "norms.csv"
        path.write_text("word,valence_mean,arousal_mean\ncalm,3,2\ncalm,4,5\n")
        with pytest.raises(ValidationError) as exc:
            load_affect_norms(path)
        assert "calm" in str(exc.value)

    def test_load_round_values(self, tmp_path):
        path = tmp_path / "norms.csv"
        path.write_text("word,valence_mean,arousal_mean\ncalm,3.12,2.5\n")
        norms = load_affect_norms(path)
        assert norms.get("calm") == (3.12, 2.5)


class TestBuiltins:
    def test_builtin_lexicons_load(self):
        lexicons = load_builtin_lexicons()
        assert [lx.name for lx in lexicons] == ["affect", "posemo", "negemo", "social"]
        for lx in lexicons:
            assert lx.exact_entries or lx.prefix_entries

    def test_builtin_norms_load(self):
        norms = builtin_affect_norms()
        assert len(norms.entries) >= 50

    def test_category_templates_nonempty(self):
        names = category_name_templates()
        assert "posemo" in names and "negemo" in names
        assert len(names) >= 60
