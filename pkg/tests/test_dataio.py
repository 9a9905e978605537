import csv
import json
import math

import numpy as np
import pytest

from founderlens.community import CommunityOutcomes
from founderlens.dataio import (
    hash_file,
    load_bigram_vocabulary,
    load_community_traits,
    load_documents,
    load_exclusions,
    load_feature_matrix,
    load_outcomes,
    load_trait_scores,
    load_word_counts,
    save_bigram_vocabulary,
    write_exclusions,
    write_feature_matrix,
    write_community_traits,
    write_model_stats,
    write_outcomes,
    write_trait_scores,
    write_word_counts,
)
from founderlens.errors import InputFormatError
from founderlens.features import BigramVocabulary
from founderlens.founders import CommunityFounderTraits
from founderlens.learners import FAMILIES


def write_events(tmp_path, lines):
    path = tmp_path / "events.jsonl"
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")
    return path


def event(**kwargs):
    base = {
        "author_id": "u1", "community_id": "c1", "timestamp": 100.0,
        "kind": "post", "text": "hello there", "doc_id": "d1",
    }
    base.update(kwargs)
    return json.dumps(base)


class TestLoadDocuments:
    def test_round_trip(self, tmp_path):
        path = write_events(tmp_path, [
            event(doc_id="d1"),
            event(doc_id="d2", kind="comment", parent_id="d1", timestamp=200.0),
        ])
        docs = load_documents(path)
        assert len(docs) == 2
        assert docs[1].parent_id == "d1"

    def test_missing_file(self, tmp_path):
        with pytest.raises(InputFormatError) as exc:
            load_documents(tmp_path / "nope.jsonl")
        assert "nope.jsonl" in str(exc.value)

    def test_bad_json_names_line(self, tmp_path):
        path = write_events(tmp_path, [event(), "{not json"])
        with pytest.raises(InputFormatError) as exc:
            load_documents(path)
        assert ":2:" in str(exc.value)

    def test_non_object_line(self, tmp_path):
        path = write_events(tmp_path, ["[1,2,3]"])
        with pytest.raises(InputFormatError):
            load_documents(path)

    def test_missing_field_named(self, tmp_path):
        row = json.loads(event())
        del row["kind"]
        path = write_events(tmp_path, [json.dumps(row)])
        with pytest.raises(InputFormatError) as exc:
            load_documents(path)
        assert "kind" in str(exc.value)

    def test_semantic_violation_wrapped(self, tmp_path):
        path = write_events(tmp_path, [event(timestamp=-5.0)])
        with pytest.raises(InputFormatError):
            load_documents(path)

    def test_empty_file_rejected(self, tmp_path):
        path = tmp_path / "events.jsonl"
        path.write_text("", encoding="utf-8")
        with pytest.raises(InputFormatError):
            load_documents(path)

    def test_blank_lines_skipped(self, tmp_path):
        path = write_events(tmp_path, [event(), "", event(doc_id="d2", timestamp=101.0)])
        assert len(load_documents(path)) == 2


class TestMatrixRoundTrip:
    def test_exact_floats(self, tmp_path):
        rng = np.random.default_rng(3)
        matrix = rng.normal(size=(4, 3)) * math.pi
        path = tmp_path / "features.csv"
        write_feature_matrix(path, ["a", "b", "c", "d"], ["f1", "f2", "f3"], matrix)
        ids, names, loaded = load_feature_matrix(path)
        assert ids == ["a", "b", "c", "d"]
        assert names == ["f1", "f2", "f3"]
        assert np.array_equal(loaded, matrix)

    def test_bad_header(self, tmp_path):
        path = tmp_path / "features.csv"
        path.write_text("id,f1\nx,1\n", encoding="utf-8")
        with pytest.raises(InputFormatError):
            load_feature_matrix(path)


class TestSmallTables:
    def test_word_counts(self, tmp_path):
        path = tmp_path / "wc.csv"
        write_word_counts(path, {"b": 10, "a": 400})
        assert load_word_counts(path) == {"a": 400, "b": 10}

    def test_trait_scores(self, tmp_path):
        path = tmp_path / "scores.csv"
        scores = {"u1": (1.25, 2.0, 3.75, 4.0, 5.0)}
        write_trait_scores(path, scores)
        assert load_trait_scores(path) == scores

    def test_exclusions(self, tmp_path):
        path = tmp_path / "ex.csv"
        rows = [("u1", "incomplete", "3 of 20 items answered")]
        write_exclusions(path, rows)
        assert load_exclusions(path) == rows

    def test_header_mismatch(self, tmp_path):
        path = tmp_path / "wc.csv"
        path.write_text("user,count\n", encoding="utf-8")
        with pytest.raises(InputFormatError):
            load_word_counts(path)


class TestVocabRoundTrip:
    def test_identity(self, tmp_path):
        vocab = BigramVocabulary(
            bigrams=("big cat", "small dog"),
            user_support={"big cat": 12, "small dog": 11},
            n_candidates=40,
            min_users=10,
        )
        path = tmp_path / "vocab.json"
        save_bigram_vocabulary(vocab, path)
        loaded = load_bigram_vocabulary(path)
        assert loaded == vocab

    def test_wrong_format_rejected(self, tmp_path):
        path = tmp_path / "vocab.json"
        path.write_text('{"format": "other"}', encoding="utf-8")
        with pytest.raises(InputFormatError):
            load_bigram_vocabulary(path)


class TestCommunityTraits:
    def test_round_trip(self, tmp_path):
        rows = {
            "c2": CommunityFounderTraits(
                community_id="c2", n_founders=3,
                traits={f: (1.5, 2.5, 3.5, 4.5, 2.0) for f in FAMILIES},
            ),
            "c1": CommunityFounderTraits(
                community_id="c1", n_founders=9,
                traits={f: (1.0, 1.0, 5.0, 5.0, 3.0) for f in FAMILIES},
            ),
        }
        path = tmp_path / "traits.csv"
        write_community_traits(path, rows)
        loaded = load_community_traits(path)
        assert set(loaded) == {"c1", "c2"}
        assert loaded["c2"].traits == rows["c2"].traits
        assert loaded["c1"].n_founders == 9


class TestOutcomes:
    def test_round_trip_mixed(self, tmp_path):
        rows = {
            "alive": CommunityOutcomes(
                community_id="alive", sustained=True, founder_retention=0.5,
                size=7, engagement=2.25, avg_degree=1.5, log_avg_degree=math.log(1.5),
                diameter=3, n_components=2, degree_centralization=0.4,
                closeness_centralization=None, replies_skipped=1,
            ),
            "dead": CommunityOutcomes(
                community_id="dead", sustained=False, founder_retention=0.0,
            ),
        }
        path = tmp_path / "outcomes.csv"
        write_outcomes(path, rows)
        loaded = load_outcomes(path)
        assert loaded["alive"] == rows["alive"]
        assert loaded["dead"] == rows["dead"]
        assert loaded["dead"].size is None


class TestModelStats:
    def test_csv_parses(self, tmp_path):
        path = tmp_path / "stats.csv"
        write_model_stats(path, [
            {"family": "random_forest", "trait": "openness",
             "in_sample_adj_r2": 0.97, "resample_adj_r2": 0.12,
             "hyperparameters": {"trees": 100}},
        ])
        with open(path, newline="") as fh:
            rows = list(csv.DictReader(fh))
        assert rows[0]["family"] == "random_forest"
        assert float(rows[0]["in_sample_adj_r2"]) == 0.97
        assert json.loads(rows[0]["hyperparameters"]) == {"trees": 100}


class TestHashFile:
    def test_content_sensitive(self, tmp_path):
        a = tmp_path / "a"
        b = tmp_path / "b"
        a.write_text("same")
        b.write_text("same")
        assert hash_file(a) == hash_file(b)
        b.write_text("different")
        assert hash_file(a) != hash_file(b)
