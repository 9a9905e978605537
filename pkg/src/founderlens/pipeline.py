"""Stage orchestration with cached artifacts and a reproducibility manifest.

Stages run in a fixed order; each writes its artifacts under the output
directory and records their hashes. A later run with the same config skips
any stage whose recorded artifacts are intact. The manifest carries no
timestamps, so two cold runs of one config are byte-identical.
"""

from __future__ import annotations

import json
import logging
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import numpy as np

from . import dataio
from .calibration import (
    TRAITS,
    apply_exclusions,
    default_scoring_key,
    load_calibration_csv,
    select_features,
)
from .community import EventLog, compute_outcomes
from .config import PipelineConfig, config_digest, config_to_dict
from .errors import (
    DegenerateTextError,
    EmptyCommunityError,
    InputFormatError,
    InsufficientCoverageError,
    SampleSizeError,
    UserExcluded,
    ValidationError,
)
from .features import (
    assemble_matrix,
    build_bigram_vocabulary,
    featurize_user,
    tokenize,
    user_top_bigrams,
)
from .founders import FounderTraitEstimator, aggregate_community, founder_prior_corpus, identify_founders
from .learners import FAMILIES, LearnerSpec, load_trait_model, save_trait_model, train
from .lexicons import load_affect_norms, load_lexicon_dir
from .regression import (
    PREDICTORS,
    average_marginal_effect,
    build_design,
    ensemble_verdict,
    fit_design,
    fit_from_dict,
    fit_to_dict,
)
from .report import write_report, write_verdicts_csv
from .seeds import derive_seed

logger = logging.getLogger(__name__)

STAGES = ("featurize", "calibrate", "estimate", "analyze", "regress", "report")
MANIFEST_NAME = "manifest.json"

# sustained is Eq.-(1) logistic; everything else is an Eq.-(2) linear outcome
REGRESSION_OUTCOMES = (
    ("sustained", "logistic"),
    ("founder_retention", "linear"),
    ("size", "linear"),
    ("engagement", "linear"),
    ("log_avg_degree", "linear"),
    ("diameter", "linear"),
    ("n_components", "linear"),
    ("degree_centralization", "linear"),
    ("closeness_centralization", "linear"),
)


def _model_artifacts() -> list:
    return [f"models/{family}.{trait}.json" for family in FAMILIES for trait in TRAITS]


STAGE_ARTIFACTS = {
    "featurize": ["features.csv", "word_counts.csv", "bigram_vocab.json", "featurize_exclusions.csv"],
    "calibrate": ["calibration_traits.csv", "exclusions.csv", "selected_features.json",
                  "model_stats.csv"] + _model_artifacts(),
    "estimate": ["community_traits.csv", "founder_exclusions.csv"],
    "analyze": ["outcomes.csv"],
    "regress": ["fits.json", "verdicts.json", "marginal_effects.csv"],
    "report": ["report.md", "report.csv", "verdicts.csv"],
}


class RunState:
    """Shared per-run context: config, output dir, lazily loaded inputs."""

    def __init__(self, config: PipelineConfig):
        self.config = config
        self.out = Path(config.output)
        self._documents = None
        self._lexicons = None
        self._norms = None
        self._logs = None

    def artifact(self, name: str) -> Path:
        return self.out / name

    def documents(self):
        if self._documents is None:
            self._documents = dataio.load_documents(self.config.events)
        return self._documents

    def lexicons(self):
        if self._lexicons is None:
            self._lexicons = load_lexicon_dir(self.config.lexicons)
        return self._lexicons

    def norms(self):
        if self._norms is None:
            self._norms = load_affect_norms(self.config.norms)
        return self._norms

    def community_logs(self):
        if self._logs is None:
            groups: dict[str, list] = {}
            for doc in self.documents():
                groups.setdefault(doc.community_id, []).append(doc)
            self._logs = {cid: EventLog.build(cid, groups[cid]) for cid in sorted(groups)}
        return self._logs


def _map_jobs(fn, items, jobs: int) -> list:
    items = list(items)
    if jobs <= 1 or len(items) <= 1:
        return [fn(item) for item in items]
    with ThreadPoolExecutor(max_workers=jobs) as pool:
        return list(pool.map(fn, items))


def stage_featurize(state: RunState) -> dict:
    config = state.config
    lexicons = state.lexicons()
    norms = state.norms()
    records = load_calibration_csv(config.calibration)
    respondents = {r.user_id for r in records}

    docs_by_user: dict[str, list] = {}
    for doc in state.documents():
        if doc.author_id in respondents:
            docs_by_user.setdefault(doc.author_id, []).append(doc)
    for docs in docs_by_user.values():
        docs.sort(key=lambda d: (d.timestamp, d.doc_id or ""))

    word_counts = {
        uid: sum(tokenize(d.text).word_count for d in docs_by_user[uid])
        for uid in sorted(docs_by_user)
    }
    eligible = [uid for uid in sorted(docs_by_user) if word_counts[uid] >= config.min_words]
    per_user_top = {
        uid: user_top_bigrams(
            [tokenize(d.text) for d in docs_by_user[uid]], k=config.bigram_top_k
        )
        for uid in eligible
    }
    vocab = build_bigram_vocabulary(per_user_top, min_users=config.bigram_min_users)

    vectors = {}
    excluded = []
    for uid in eligible:
        try:
            vectors[uid] = featurize_user(
                docs_by_user[uid], lexicons, norms, vocab,
                min_words=config.min_words, user_id=uid,
            )
        except UserExcluded as exc:
            excluded.append((exc.user_id, exc.reason, exc.detail))
        except (DegenerateTextError, InsufficientCoverageError) as exc:
            excluded.append((uid, "degenerate_text", str(exc)))
    user_ids, names, matrix = assemble_matrix(vectors)

    dataio.write_feature_matrix(state.artifact("features.csv"), user_ids, names, matrix)
    dataio.write_word_counts(state.artifact("word_counts.csv"), word_counts)
    dataio.save_bigram_vocabulary(vocab, state.artifact("bigram_vocab.json"))
    dataio.write_exclusions(state.artifact("featurize_exclusions.csv"), excluded)
    return {
        "n_events": len(state.documents()),
        "n_respondents": len(records),
        "n_with_text": len(docs_by_user),
        "n_featurized": len(user_ids),
        "n_features": len(names),
        "vocabulary_size": len(vocab),
    }


def stage_calibrate(state: RunState) -> dict:
    config = state.config
    records = load_calibration_csv(config.calibration)
    word_counts = dataio.load_word_counts(state.artifact("word_counts.csv"))
    retained, report = apply_exclusions(
        records, word_counts, default_scoring_key(), min_words=config.min_words
    )
    user_ids, names, matrix = dataio.load_feature_matrix(state.artifact("features.csv"))
    row_index = {uid: i for i, uid in enumerate(user_ids)}
    usable = [r for r in retained if r.user_id in row_index]
    dropped = [r.user_id for r in retained if r.user_id not in row_index]
    if dropped:
        logger.warning("retained respondents missing feature rows: %s", dropped)
    X = matrix[[row_index[r.user_id] for r in usable]]

    selections = {}
    for pos, trait in enumerate(TRAITS):
        y = np.array([r.traits[pos] for r in usable])
        selections[trait] = select_features(X, names, y, trait=trait, k=config.top_k_features)
    name_index = {name: j for j, name in enumerate(names)}

    (state.out / "models").mkdir(exist_ok=True)

    def train_one(task):
        family, trait = task
        sel = selections[trait]
        pos = TRAITS.index(trait)
        y = np.array([r.traits[pos] for r in usable])
        sub = X[:, [name_index[f] for f in sel.final]]
        spec = LearnerSpec(
            family=family,
            grid=config.grids[family],
            seed=derive_seed(config.seed, "train", family, trait),
        )
        return train(
            spec, sub, y, trait=trait, feature_names=tuple(sel.final), kfolds=config.kfolds
        )

    tasks = [(family, trait) for family in FAMILIES for trait in TRAITS]
    models = _map_jobs(train_one, tasks, config.jobs)
    stats = []
    for (family, trait), model in zip(tasks, models):
        save_trait_model(model, state.artifact(f"models/{family}.{trait}.json"))
        stats.append(
            {
                "family": family,
                "trait": trait,
                "in_sample_adj_r2": model.in_sample_adj_r2,
                "resample_adj_r2": model.resample_adj_r2,
                "hyperparameters": model.chosen_hyperparameters,
            }
        )

    dataio.write_trait_scores(
        state.artifact("calibration_traits.csv"), {r.user_id: r.traits for r in usable}
    )
    dataio.write_exclusions(state.artifact("exclusions.csv"), report.exclusions)
    selected_payload = {
        trait: {
            "screened": [[name, float(r)] for name, r in sel.screened],
            "final": list(sel.final),
            "criterion_trace": [float(v) for v in sel.criterion_trace],
        }
        for trait, sel in selections.items()
    }
    with open(state.artifact("selected_features.json"), "w", encoding="utf-8") as fh:
        json.dump(selected_payload, fh, sort_keys=True, indent=1)
        fh.write("\n")
    dataio.write_model_stats(state.artifact("model_stats.csv"), stats)
    counts = {
        "n_respondents": report.n_respondents,
        "n_retained": report.n_retained,
        "n_trained_users": len(usable),
        "n_models": len(models),
    }
    for reason in ("incomplete", "constant_response", "no_text_match", "below_min_words"):
        counts[f"excluded_{reason}"] = report.count(reason)
    return counts


def _load_model_bundle(state: RunState) -> dict:
    return {
        family: {
            trait: load_trait_model(state.artifact(f"models/{family}.{trait}.json"))
            for trait in TRAITS
        }
        for family in FAMILIES
    }


def stage_estimate(state: RunState) -> dict:
    config = state.config
    vocab = dataio.load_bigram_vocabulary(state.artifact("bigram_vocab.json"))
    models = _load_model_bundle(state)
    estimator = FounderTraitEstimator(
        state.lexicons(), state.norms(), vocab, models, min_words=config.min_words
    )
    docs_by_author: dict[str, list] = {}
    for doc in state.documents():
        docs_by_author.setdefault(doc.author_id, []).append(doc)

    rows = {}
    excluded = []
    skipped = []
    n_founders_total = 0
    for cid, log in state.community_logs().items():
        founders = identify_founders(
            log, window_days=config.founder_window_days, max_n=config.max_founders
        )
        n_founders_total += len(founders)
        estimates = []
        for founder in founders:
            corpus = founder_prior_corpus(
                founder.user_id,
                docs_by_author.get(founder.user_id, []),
                log.inception_ts,
                focal_community_id=cid,
                max_posts=config.max_prior_posts,
            )
            est = estimator.estimate(founder.user_id, log.inception_ts, corpus)
            if est is None:
                excluded.append((cid, founder.user_id))
            else:
                estimates.append(est)
        try:
            rows[cid] = aggregate_community(estimates, cid)
        except EmptyCommunityError:
            logger.warning("community %s: every founder excluded; no trait row", cid)
            skipped.append(cid)

    dataio.write_community_traits(state.artifact("community_traits.csv"), rows)
    dataio.write_founder_exclusions(state.artifact("founder_exclusions.csv"), excluded)
    return {
        "n_communities": len(state.community_logs()),
        "n_with_traits": len(rows),
        "n_skipped": len(skipped),
        "n_founders": n_founders_total,
        "n_founders_excluded": len(excluded),
    }


def stage_analyze(state: RunState) -> dict:
    config = state.config
    outcomes = {}
    for cid, log in state.community_logs().items():
        founders = identify_founders(
            log, window_days=config.founder_window_days, max_n=config.max_founders
        )
        outcomes[cid] = compute_outcomes(
            log,
            [f.user_id for f in founders],
            year_mark_days=config.year_mark_days,
            window_days=config.window_days,
        )
    dataio.write_outcomes(state.artifact("outcomes.csv"), outcomes)
    return {
        "n_communities": len(outcomes),
        "n_sustained": sum(1 for o in outcomes.values() if o.sustained),
    }


def stage_regress(state: RunState) -> dict:
    config = state.config
    traits = dataio.load_community_traits(state.artifact("community_traits.csv"))
    outcomes = dataio.load_outcomes(state.artifact("outcomes.csv"))

    fits_payload = {}
    verdicts = {}
    marginal_rows = []
    counts: dict = {"n_outcomes_fit": 0, "n_outcomes_skipped": 0}

    def fit_outcome(task):
        outcome, family = task
        fits = {}
        designs = {}
        for source in FAMILIES:
            design = build_design(
                traits,
                outcomes,
                trait_source=source,
                outcome=outcome,
                family=family,
                standardize=config.standardized,
                log_outcome=outcome in config.log_outcomes,
            )
            designs[source] = design
            fits[source] = fit_design(design)
        return fits, designs

    for outcome, family in REGRESSION_OUTCOMES:
        try:
            fits, designs = fit_outcome((outcome, family))
        except (SampleSizeError, ValidationError) as exc:
            logger.warning("skipping outcome %r: %s", outcome, exc)
            counts["n_outcomes_skipped"] += 1
            continue
        fits_payload[outcome] = {source: fit_to_dict(fits[source]) for source in FAMILIES}
        verdicts[outcome] = {
            term: ensemble_verdict(fits, term, alpha=config.alpha) for term in PREDICTORS
        }
        counts["n_outcomes_fit"] += 1
        counts[f"n_{outcome}"] = fits[FAMILIES[0]].n
        if family == "logistic":
            for source in FAMILIES:
                if not fits[source].converged:
                    continue
                for j, term in enumerate(designs[source].predictor_names):
                    ame = average_marginal_effect(fits[source], designs[source], j)
                    marginal_rows.append([outcome, source, term, float(ame)])

    with open(state.artifact("fits.json"), "w", encoding="utf-8") as fh:
        json.dump({"format": "regression-fits", "fits": fits_payload}, fh, sort_keys=True)
        fh.write("\n")
    with open(state.artifact("verdicts.json"), "w", encoding="utf-8") as fh:
        json.dump({"format": "verdicts", "verdicts": verdicts}, fh, sort_keys=True, indent=1)
        fh.write("\n")
    dataio.write_marginal_effects(state.artifact("marginal_effects.csv"), marginal_rows)
    return counts


def stage_report(state: RunState) -> dict:
    with open(state.artifact("fits.json"), encoding="utf-8") as fh:
        payload = json.load(fh)
    with open(state.artifact("verdicts.json"), encoding="utf-8") as fh:
        verdicts = json.load(fh)["verdicts"]
    fits_by_outcome = {
        outcome: {source: fit_from_dict(d) for source, d in fits.items()}
        for outcome, fits in payload["fits"].items()
    }
    write_report(
        fits_by_outcome, verdicts,
        state.artifact("report.md"), state.artifact("report.csv"),
    )
    write_verdicts_csv(verdicts, state.artifact("verdicts.csv"))
    return {"n_outcomes": len(fits_by_outcome)}


STAGE_FNS = {
    "featurize": stage_featurize,
    "calibrate": stage_calibrate,
    "estimate": stage_estimate,
    "analyze": stage_analyze,
    "regress": stage_regress,
    "report": stage_report,
}


def load_manifest(output: str | Path) -> dict | None:
    path = Path(output) / MANIFEST_NAME
    if not path.is_file():
        return None
    with open(path, encoding="utf-8") as fh:
        return json.load(fh)


def _write_manifest(output: Path, manifest: dict) -> None:
    with open(output / MANIFEST_NAME, "w", encoding="utf-8") as fh:
        json.dump(manifest, fh, sort_keys=True, indent=1)
        fh.write("\n")


def _intact_record(previous: dict | None, name: str, out: Path):
    record = ((previous or {}).get("stages") or {}).get(name)
    if not record or record.get("status") != "completed":
        return None
    artifacts = record.get("artifacts", {})
    for rel, digest in artifacts.items():
        path = out / rel
        if not path.is_file() or dataio.hash_file(path) != digest:
            return None
    return record


def run_pipeline(
    config: PipelineConfig,
    stages=None,
    force: bool = False,
) -> dict:
    """Execute the requested stages (all by default); returns the manifest."""
    requested = set(STAGES if stages is None else stages)
    unknown = sorted(requested - set(STAGES))
    if unknown:
        raise ValidationError(f"unknown stages: {unknown}")

    state = RunState(config)
    state.out.mkdir(parents=True, exist_ok=True)
    digest = config_digest(config)
    previous = load_manifest(state.out)
    reuse_ok = (
        not force and previous is not None and previous.get("config_digest") == digest
    )
    manifest = {
        "format": "run-manifest",
        "version": 1,
        "config": config_to_dict(config),
        "config_digest": digest,
        "root_seed": config.seed,
        "failed_stage": None,
        "stages": {},
    }

    for name in STAGES:
        if name not in requested:
            record = _intact_record(previous, name, state.out) if reuse_ok else None
            manifest["stages"][name] = record if record else {"status": "not_run"}
            continue
        if reuse_ok:
            record = _intact_record(previous, name, state.out)
            if record is not None:
                logger.info("stage %s: artifacts intact, skipping", name)
                manifest["stages"][name] = record
                continue
        logger.info("stage %s: running", name)
        try:
            counts = STAGE_FNS[name](state)
        except Exception as exc:
            manifest["failed_stage"] = name
            manifest["stages"][name] = {"status": "failed"}
            _write_manifest(state.out, manifest)
            if isinstance(exc, FileNotFoundError):
                # Missing upstream artifact is a usage problem, not a bug.
                raise InputFormatError(
                    f"stage {name} needs a file that does not exist: "
                    f"{exc.filename} (run earlier stages first?)"
                ) from exc
            raise
        artifacts = {
            rel: dataio.hash_file(state.artifact(rel)) for rel in STAGE_ARTIFACTS[name]
        }
        manifest["stages"][name] = {
            "status": "completed",
            "artifacts": artifacts,
            "counts": counts,
        }

    _write_manifest(state.out, manifest)
    return manifest
