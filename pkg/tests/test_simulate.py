import json

import numpy as np
import pytest

from founderlens.calibration import TRAITS, load_calibration_csv
from founderlens.community import DAY_SECONDS, EventLog
from founderlens.errors import ValidationError
from founderlens.features import Document, category_percentages, tokenize
from founderlens.founders import identify_founders
from founderlens.learners import FAMILIES
from founderlens.lexicons import load_affect_norms, load_category_lexicon, load_lexicon_dir
from founderlens.regression import build_design, ensemble_verdict, fit_logistic
from founderlens.simulate import (
    DEFAULT_COHORT_COEFFICIENTS,
    PipelineScenario,
    RegressionScenario,
    generate_synthetic,
    simulate_regression_cohort,
    trait_pools,
)


class TestRegressionScenario:
    def test_zero_communities_rejected(self):
        with pytest.raises(ValidationError):
            RegressionScenario(n_communities=0)

    def test_below_minimum_rejected(self):
        with pytest.raises(ValidationError):
            RegressionScenario(n_communities=150)

    def test_unknown_term_rejected(self):
        with pytest.raises(ValidationError):
            RegressionScenario(coefficients={"charisma": 1.0})

    def test_degenerate_survival_rejected(self):
        with pytest.raises(ValidationError):
            RegressionScenario(coefficients={"intercept": -50.0})

    def test_founder_range_validated(self):
        with pytest.raises(ValidationError):
            RegressionScenario(min_founders=5, max_founders=3)
        with pytest.raises(ValidationError):
            RegressionScenario(max_founders=11)

    def test_missing_terms_default_to_zero(self):
        s = RegressionScenario(coefficients={"intercept": -1.0})
        assert s.coefficients["neuroticism"] == 0.0
        assert s.coefficients["n_founders"] == 0.0


class TestCohort:
    def test_shapes_and_ranges(self):
        cohort = simulate_regression_cohort(RegressionScenario(n_communities=400), seed=11)
        assert len(cohort.trait_rows) == 400
        assert set(cohort.trait_rows) == set(cohort.outcome_rows)
        for row in cohort.trait_rows.values():
            assert 2 <= row.n_founders <= 9
            for family in FAMILIES:
                assert all(1.0 <= v <= 5.0 for v in row.traits[family])

    def test_family_estimates_differ_by_noise(self):
        cohort = simulate_regression_cohort(RegressionScenario(n_communities=300), seed=12)
        row = next(iter(cohort.trait_rows.values()))
        gl = np.array(row.traits["general_linear"])
        rf = np.array(row.traits["random_forest"])
        assert np.any(gl != rf)
        assert np.max(np.abs(gl - rf)) < 0.5  # small shared-latent noise only

    def test_deterministic_given_seed(self):
        a = simulate_regression_cohort(RegressionScenario(n_communities=250), seed=13)
        b = simulate_regression_cohort(RegressionScenario(n_communities=250), seed=13)
        assert a.ground_truth == b.ground_truth
        for cid in a.trait_rows:
            assert a.trait_rows[cid].traits == b.trait_rows[cid].traits
            assert a.outcome_rows[cid].sustained == b.outcome_rows[cid].sustained

    def test_seed_changes_draws(self):
        a = simulate_regression_cohort(RegressionScenario(n_communities=250), seed=14)
        b = simulate_regression_cohort(RegressionScenario(n_communities=250), seed=15)
        cid = sorted(a.trait_rows)[0]
        assert a.trait_rows[cid].traits != b.trait_rows[cid].traits

    def test_base_rate_plausible(self):
        cohort = simulate_regression_cohort(RegressionScenario(n_communities=2000), seed=16)
        rate = cohort.ground_truth["n_sustained"] / 2000
        assert 0.2 < rate < 0.6

    def test_planted_effects_recovered_single_seed(self):
        cohort = simulate_regression_cohort(RegressionScenario(n_communities=3000), seed=17)
        fits = {}
        for family in FAMILIES:
            design = build_design(
                cohort.trait_rows,
                cohort.outcome_rows,
                trait_source=family,
                outcome="sustained",
                family="logistic",
            )
            fits[family] = fit_logistic(design)
        fit = fits["general_linear"]
        for term, planted in DEFAULT_COHORT_COEFFICIENTS.items():
            idx = fit.term_index(term)
            assert abs(fit.coefficients[idx] - planted) <= 3 * fit.standard_errors[idx]
        assert ensemble_verdict(fits, "conscientiousness") == "supported_positive"
        assert ensemble_verdict(fits, "n_founders") == "supported_positive"

    def test_null_effects_stay_null(self):
        scenario = RegressionScenario(n_communities=2500, coefficients={"intercept": 0.0})
        cohort = simulate_regression_cohort(scenario, seed=18)
        design = build_design(
            cohort.trait_rows,
            cohort.outcome_rows,
            trait_source="support_vector",
            outcome="sustained",
            family="logistic",
        )
        fit = fit_logistic(design)
        for term in TRAITS:
            idx = fit.term_index(term)
            assert abs(fit.coefficients[idx]) <= 3 * fit.standard_errors[idx]


SMALL = dict(
    n_calibration_users=50,
    n_communities=200,
    docs_per_user=1,
    words_per_doc=120,
    min_founders=2,
    max_founders=4,
)


@pytest.fixture(scope="module")
def small_fixture(tmp_path_factory):
    out = tmp_path_factory.mktemp("fixture")
    return generate_synthetic(PipelineScenario(**SMALL), seed=77, out_dir=out)


class TestPipelineScenario:
    def test_zero_communities_rejected(self):
        with pytest.raises(ValidationError):
            PipelineScenario(**{**SMALL, "n_communities": 0})

    def test_tiny_docs_rejected(self):
        with pytest.raises(ValidationError):
            PipelineScenario(**{**SMALL, "words_per_doc": 10})

    def test_degenerate_survival_rejected(self):
        with pytest.raises(ValidationError):
            PipelineScenario(**{**SMALL, "coefficients": {"intercept": 40.0}})


class TestGenerateSynthetic:
    def test_files_exist(self, small_fixture):
        for p in (
            small_fixture.norms_path,
            small_fixture.calibration_path,
            small_fixture.events_path,
            small_fixture.groundtruth_path,
        ):
            assert p.is_file()
        assert small_fixture.lexicons_dir.is_dir()

    def test_lexicons_loadable(self, small_fixture):
        lexicons = load_lexicon_dir(small_fixture.lexicons_dir)
        assert len(lexicons) == len(TRAITS)
        by_name = {lx.name: lx for lx in lexicons}
        pools = trait_pools()
        for trait in TRAITS:
            assert by_name[f"sim_{trait}"].exact_entries == frozenset(pools[trait])

    def test_norms_cover_all_pools(self, small_fixture):
        norms = load_affect_norms(small_fixture.norms_path)
        for pool in trait_pools().values():
            for word in pool:
                assert word in norms.entries

    def test_calibration_parses_with_planted_exclusions(self, small_fixture):
        records = load_calibration_csv(small_fixture.calibration_path)
        assert len(records) == SMALL["n_calibration_users"] + 4
        by_id = {r.user_id: r for r in records}
        assert not by_id["xtra_incomplete"].is_complete()
        assert by_id["xtra_constant"].is_constant()

    def test_events_parse_and_are_time_sorted(self, small_fixture):
        prev = None
        n = 0
        with open(small_fixture.events_path, encoding="utf-8") as fh:
            for line in fh:
                row = json.loads(line)
                n += 1
                assert {"doc_id", "author_id", "community_id", "timestamp", "kind", "text"} <= set(row)
                if prev is not None:
                    assert row["timestamp"] >= prev
                prev = row["timestamp"]
        assert n > SMALL["n_communities"] * 3

    def test_byte_identical_across_runs(self, small_fixture, tmp_path):
        again = generate_synthetic(PipelineScenario(**SMALL), seed=77, out_dir=tmp_path)
        assert again.events_path.read_bytes() == small_fixture.events_path.read_bytes()
        assert again.groundtruth_path.read_bytes() == small_fixture.groundtruth_path.read_bytes()
        assert again.calibration_path.read_bytes() == small_fixture.calibration_path.read_bytes()
        assert again.norms_path.read_bytes() == small_fixture.norms_path.read_bytes()

    def test_seed_changes_events(self, small_fixture, tmp_path):
        other = generate_synthetic(PipelineScenario(**SMALL), seed=78, out_dir=tmp_path)
        assert other.events_path.read_bytes() != small_fixture.events_path.read_bytes()


def load_events(path):
    with open(path, encoding="utf-8") as fh:
        return [json.loads(line) for line in fh]


class TestFixtureSemantics:
    def test_founder_sets_match_ground_truth(self, small_fixture):
        rows = load_events(small_fixture.events_path)
        truth = small_fixture.ground_truth["communities"]
        checked = 0
        for cid in sorted(truth)[:25]:
            docs = [
                Document(
                    author_id=r["author_id"], community_id=r["community_id"],
                    timestamp=r["timestamp"], kind=r["kind"], text=r["text"],
                    parent_id=r.get("parent_id"), doc_id=r["doc_id"],
                )
                for r in rows
                if r["community_id"] == cid
            ]
            log = EventLog.build(cid, docs)
            founders = identify_founders(log)
            assert [f.user_id for f in founders] == truth[cid]["founder_ids"]
            checked += 1
        assert checked == 25

    def test_sustained_truth_matches_window_activity(self, small_fixture):
        rows = load_events(small_fixture.events_path)
        truth = small_fixture.ground_truth["communities"]
        inceptions = {}
        for r in rows:
            cid = r["community_id"]
            if cid in truth and (cid not in inceptions or r["timestamp"] < inceptions[cid]):
                inceptions[cid] = r["timestamp"]
        active = set()
        for r in rows:
            cid = r["community_id"]
            if cid not in truth:
                continue
            start = inceptions[cid] + 365 * DAY_SECONDS
            if start <= r["timestamp"] < start + 30 * DAY_SECONDS:
                active.add(cid)
        for cid, info in truth.items():
            assert (cid in active) == info["sustained"]

    def test_prior_docs_precede_inception_outside_focal(self, small_fixture):
        rows = load_events(small_fixture.events_path)
        truth = small_fixture.ground_truth["communities"]
        cid = sorted(truth)[0]
        founder = truth[cid]["founder_ids"][0]
        inception = min(r["timestamp"] for r in rows if r["community_id"] == cid)
        prior = [
            r for r in rows
            if r["author_id"] == founder and r["community_id"] != cid
        ]
        assert prior
        assert all(r["timestamp"] < inception for r in prior)

    def test_category_signal_tracks_traits(self, small_fixture):
        # pool share in a founder's prior text should rise with the latent trait
        rows = load_events(small_fixture.events_path)
        founders_truth = small_fixture.ground_truth["founders"]
        lexicon = load_category_lexicon(
            small_fixture.lexicons_dir / "sim_conscientiousness.txt"
        )
        texts = {}
        for r in rows:
            if r["author_id"] in founders_truth and r["community_id"].startswith("sim_misc"):
                texts.setdefault(r["author_id"], []).append(r["text"])
        values, shares = [], []
        for uid in sorted(texts):
            tokens = tokenize(" ".join(texts[uid]))
            pct = category_percentages(tokens, [lexicon])[f"cat:{lexicon.name}"]
            values.append(founders_truth[uid]["conscientiousness"])
            shares.append(pct)
        r = np.corrcoef(values, shares)[0, 1]
        assert r > 0.6
