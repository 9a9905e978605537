"""Synthetic cohorts and text fixtures with planted ground-truth effects."""

from __future__ import annotations

import json
import logging
from collections.abc import Mapping
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .calibration import N_ITEMS, TRAITS, ScoringKey, default_scoring_key
from .community import DAY_SECONDS, CommunityOutcomes
from .errors import ValidationError
from .founders import CommunityFounderTraits
from .learners import FAMILIES, SCALE_MAX, SCALE_MIN
from .lexicons import NORMS_HEADER
from .regression import TERMS
from .seeds import derive_seed

logger = logging.getLogger(__name__)

MIN_COMMUNITIES = 200
MIN_CALIBRATION_USERS = 50

# Null coefficients everywhere except the planted survival effects.
DEFAULT_COHORT_COEFFICIENTS: Mapping[str, float] = {
    "intercept": -2.85,
    "extraversion": -0.09,
    "agreeableness": 0.14,
    "conscientiousness": 0.19,
    "n_founders": 0.30,
}

# Text-route effects are larger so the signal survives estimation noise.
DEFAULT_FIXTURE_COEFFICIENTS: Mapping[str, float] = {
    "intercept": -6.2,
    "extraversion": -1.2,
    "agreeableness": 1.2,
    "conscientiousness": 1.6,
    "n_founders": 0.25,
}


def _sigmoid(eta):
    return 1.0 / (1.0 + np.exp(-np.clip(eta, -35.0, 35.0)))


def _check_coefficients(coefficients: Mapping[str, float]) -> dict:
    unknown = sorted(set(coefficients) - set(TERMS))
    if unknown:
        raise ValidationError(f"unknown coefficient terms: {unknown}")
    return {t: float(coefficients.get(t, 0.0)) for t in TERMS}


def _check_survival_feasible(coefficients: Mapping[str, float], mean_founders: float) -> None:
    # Degenerate when the mid-scenario probability saturates: one class only.
    mid = 3.0
    eta = coefficients["intercept"] + mean_founders * coefficients["n_founders"]
    eta += mid * sum(coefficients[t] for t in TRAITS)
    pi = float(_sigmoid(eta))
    if not 1e-3 < pi < 1.0 - 1e-3:
        raise ValidationError(f"planted survival probability is degenerate ({pi:.6f} at scenario midpoint)")


@dataclass(frozen=True)
class RegressionScenario:
    """Community-level cohort with planted survival coefficients.

    Trait rows carry per-learner-family estimates: a shared latent trait
    vector per community plus small family-specific estimation noise.
    """

    n_communities: int = 8625
    coefficients: Mapping[str, float] = field(
        default_factory=lambda: dict(DEFAULT_COHORT_COEFFICIENTS)
    )
    estimate_noise_sd: float = 0.05
    min_founders: int = 2
    max_founders: int = 9

    def __post_init__(self):
        if self.n_communities < MIN_COMMUNITIES:
            raise ValidationError(
                f"scenario needs at least {MIN_COMMUNITIES} communities, got {self.n_communities}"
            )
        if not 1 <= self.min_founders <= self.max_founders <= 10:
            raise ValidationError("founder count range must satisfy 1 <= min <= max <= 10")
        if self.estimate_noise_sd < 0:
            raise ValidationError("estimate_noise_sd must be non-negative")
        resolved = _check_coefficients(self.coefficients)
        object.__setattr__(self, "coefficients", resolved)
        _check_survival_feasible(resolved, (self.min_founders + self.max_founders) / 2.0)


@dataclass(frozen=True)
class SimulatedCohort:
    """Design-ready rows plus the ground truth that generated them."""

    trait_rows: Mapping[str, CommunityFounderTraits]
    outcome_rows: Mapping[str, CommunityOutcomes]
    ground_truth: Mapping


def simulate_regression_cohort(scenario: RegressionScenario, seed: int) -> SimulatedCohort:
    """Draw one cohort: latent traits, founder counts, survival, noisy estimates."""
    rng = np.random.default_rng(derive_seed(seed, "cohort"))
    n = scenario.n_communities
    latent = rng.uniform(SCALE_MIN, SCALE_MAX, size=(n, len(TRAITS)))
    counts = rng.integers(scenario.min_founders, scenario.max_founders + 1, size=n)
    beta = np.array([scenario.coefficients[t] for t in TRAITS])
    eta = (
        scenario.coefficients["intercept"]
        + latent @ beta
        + scenario.coefficients["n_founders"] * counts
    )
    survived = rng.random(n) < _sigmoid(eta)

    estimates = {}
    for family in FAMILIES:
        noise = rng.normal(0.0, scenario.estimate_noise_sd, size=latent.shape)
        estimates[family] = np.clip(latent + noise, SCALE_MIN, SCALE_MAX)

    trait_rows = {}
    outcome_rows = {}
    for i in range(n):
        cid = f"sim{i:05d}"
        trait_rows[cid] = CommunityFounderTraits(
            community_id=cid,
            n_founders=int(counts[i]),
            traits={f: tuple(float(v) for v in estimates[f][i]) for f in FAMILIES},
        )
        outcome_rows[cid] = CommunityOutcomes(
            community_id=cid,
            sustained=bool(survived[i]),
            founder_retention=0.5 if survived[i] else 0.0,
        )
    ground_truth = {
        "coefficients": dict(scenario.coefficients),
        "estimate_noise_sd": scenario.estimate_noise_sd,
        "n_communities": n,
        "n_sustained": int(survived.sum()),
        "seed": int(seed),
    }
    logger.info("simulated cohort: %d communities, %d sustained", n, int(survived.sum()))
    return SimulatedCohort(trait_rows=trait_rows, outcome_rows=outcome_rows, ground_truth=ground_truth)


# --- full text fixture ---------------------------------------------------

_POOL_SIZE = 30
_FILLER_SIZE = 80
_POOL_STEMS = {
    "neuroticism": "fret",
    "extraversion": "viva",
    "openness": "nova",
    "agreeableness": "kind",
    "conscientiousness": "task",
}
_N_COMMON_COLLOCATIONS = 7
_N_RARE_COLLOCATIONS = 3


def trait_pools() -> dict:
    """Per-trait synthetic word pools; each word belongs to exactly one trait."""
    return {
        t: tuple(f"{_POOL_STEMS[t]}{k:02d}" for k in range(_POOL_SIZE)) for t in TRAITS
    }


def filler_pool() -> tuple:
    return tuple(f"plain{k:02d}" for k in range(_FILLER_SIZE))


def collocation_pairs() -> tuple:
    """Fixed two-word collocations; the first 7 are common, the rest rare."""
    total = _N_COMMON_COLLOCATIONS + _N_RARE_COLLOCATIONS
    return tuple((f"glue{k:02d}", f"bond{k:02d}") for k in range(total))


@dataclass(frozen=True)
class PipelineScenario:
    """Settings for the full text fixture: calibration cohort plus communities."""

    n_calibration_users: int = 240
    n_communities: int = 220
    docs_per_user: int = 2
    words_per_doc: int = 180
    min_founders: int = 2
    max_founders: int = 9
    coefficients: Mapping[str, float] = field(
        default_factory=lambda: dict(DEFAULT_FIXTURE_COEFFICIENTS)
    )
    trait_emphasis: float = 0.55
    collocation_rate: float = 0.03
    base_time: float = 1_600_000_000.0

    def __post_init__(self):
        if self.n_communities < MIN_COMMUNITIES:
            raise ValidationError(
                f"scenario needs at least {MIN_COMMUNITIES} communities, got {self.n_communities}"
            )
        if self.n_calibration_users < MIN_CALIBRATION_USERS:
            raise ValidationError(
                f"scenario needs at least {MIN_CALIBRATION_USERS} calibration users,"
                f" got {self.n_calibration_users}"
            )
        if self.docs_per_user < 1 or self.words_per_doc < 40:
            raise ValidationError("each user needs >= 1 document of >= 40 words")
        if not 1 <= self.min_founders <= self.max_founders <= 10:
            raise ValidationError("founder count range must satisfy 1 <= min <= max <= 10")
        if not 0.0 <= self.collocation_rate <= 0.2:
            raise ValidationError("collocation_rate out of [0, 0.2]")
        if self.trait_emphasis <= 0:
            raise ValidationError("trait_emphasis must be positive")
        if self.base_time <= 0:
            raise ValidationError("base_time must be positive epoch seconds")
        resolved = _check_coefficients(self.coefficients)
        object.__setattr__(self, "coefficients", resolved)
        _check_survival_feasible(resolved, (self.min_founders + self.max_founders) / 2.0)


@dataclass(frozen=True)
class SyntheticDataset:
    """Paths of one generated fixture plus its ground truth."""

    root: Path
    lexicons_dir: Path
    norms_path: Path
    calibration_path: Path
    events_path: Path
    groundtruth_path: Path
    ground_truth: Mapping


def _token_distribution(traits, scenario: PipelineScenario, vocab_index):
    """Mixture over the shared vocabulary: trait pools weighted by the trait value."""
    weights = np.zeros(len(vocab_index["vocab"]))
    for pos, trait in enumerate(TRAITS):
        lo, hi = vocab_index["pool_slices"][trait]
        pool_weight = np.exp(scenario.trait_emphasis * (traits[pos] - 3.0))
        weights[lo:hi] = pool_weight / (hi - lo)
    lo, hi = vocab_index["filler_slice"]
    weights[lo:hi] = 2.2 / (hi - lo)
    return weights / weights.sum()


def _vocab_index():
    pools = trait_pools()
    vocab = []
    pool_slices = {}
    for trait in TRAITS:
        lo = len(vocab)
        vocab.extend(pools[trait])
        pool_slices[trait] = (lo, len(vocab))
    lo = len(vocab)
    vocab.extend(filler_pool())
    return {
        "vocab": tuple(vocab),
        "pool_slices": pool_slices,
        "filler_slice": (lo, len(vocab)),
    }


def _make_text(rng, n_words: int, probs, vocab, collocation_rate: float) -> str:
    words = [vocab[k] for k in rng.choice(len(vocab), size=n_words, p=probs)]
    pairs = collocation_pairs()
    if collocation_rate > 0 and n_words >= 4:
        n_common = rng.binomial(n_words // 2, collocation_rate)
        n_rare = rng.binomial(n_words // 2, collocation_rate / 300.0)
        for count, bank in ((n_common, pairs[:_N_COMMON_COLLOCATIONS]),
                            (n_rare, pairs[_N_COMMON_COLLOCATIONS:])):
            for _ in range(count):
                pos = int(rng.integers(0, n_words - 1))
                first, second = bank[int(rng.integers(0, len(bank)))]
                words[pos] = first
                words[pos + 1] = second
    return " ".join(words)


def _affect_norm_table(rng) -> dict:
    """Valence/arousal for every fixture word; affect tracks the social pools."""
    norms = {}
    pools = trait_pools()
    extra = set(pools["extraversion"])
    neuro = set(pools["neuroticism"])
    openn = set(pools["openness"])
    all_words = sorted(
        set(w for pool in pools.values() for w in pool)
        | set(filler_pool())
        | set(w for pair in collocation_pairs() for w in pair)
    )
    for word in all_words:
        valence = 5.0
        arousal = 5.0
        if word in extra:
            valence += 1.8
            arousal += 1.2
        elif word in neuro:
            valence -= 1.8
            arousal += 0.8
        elif word in openn:
            arousal -= 1.0
        valence = float(np.clip(valence + rng.normal(0.0, 0.3), 1.0, 9.0))
        arousal = float(np.clip(arousal + rng.normal(0.0, 0.3), 1.0, 9.0))
        norms[word] = (valence, arousal)
    return norms


def _item_responses(rng, traits, key: ScoringKey) -> list:
    """Integer responses whose scored traits track the latent vector."""
    values = [0] * N_ITEMS
    for pos, trait in enumerate(TRAITS):
        for item in key.items[trait]:
            r = int(np.clip(round(traits[pos] + rng.normal(0.0, 0.45)), 1, 5))
            values[item - 1] = 6 - r if item in key.reversed_items else r
    return values


def _doc(doc_id, author, community, ts, kind, text, parent=None) -> dict:
    row = {
        "doc_id": doc_id,
        "author_id": author,
        "community_id": community,
        "timestamp": float(ts),
        "kind": kind,
        "text": text,
    }
    if parent is not None:
        row["parent_id"] = parent
    return row


def generate_synthetic(scenario: PipelineScenario, seed: int, out_dir: str | Path) -> SyntheticDataset:
    """Write a complete fixture: lexicons, norms, calibration CSV, events, truth."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    lexicons_dir = out / "lexicons"
    lexicons_dir.mkdir(exist_ok=True)

    pools = trait_pools()
    for trait in TRAITS:
        path = lexicons_dir / f"sim_{trait}.txt"
        path.write_text("\n".join(sorted(pools[trait])) + "\n", encoding="utf-8")

    norms_rng = np.random.default_rng(derive_seed(seed, "norms"))
    norms = _affect_norm_table(norms_rng)
    norms_path = out / "norms.csv"
    with open(norms_path, "w", encoding="utf-8", newline="") as fh:
        fh.write(",".join(NORMS_HEADER) + "\n")
        for word in sorted(norms):
            valence, arousal = norms[word]
            fh.write(f"{word},{valence!r},{arousal!r}\n")

    vocab_index = _vocab_index()
    vocab = vocab_index["vocab"]
    key = default_scoring_key()
    events: list[dict] = []
    truth_founders = {}
    truth_communities = {}

    # calibration cohort
    cal_rng = np.random.default_rng(derive_seed(seed, "calibration"))
    cal_rows = []
    cal_epoch = scenario.base_time - 500.0 * DAY_SECONDS
    for i in range(scenario.n_calibration_users):
        uid = f"cal{i:04d}"
        traits = cal_rng.uniform(SCALE_MIN, SCALE_MAX, size=len(TRAITS))
        responses = _item_responses(cal_rng, traits, key)
        cal_rows.append([uid] + [str(v) for v in responses])
        probs = _token_distribution(traits, scenario, vocab_index)
        for d in range(scenario.docs_per_user):
            n_words = int(scenario.words_per_doc * (0.9 + 0.2 * cal_rng.random()))
            text = _make_text(cal_rng, n_words, probs, vocab, scenario.collocation_rate)
            events.append(
                _doc(
                    f"{uid}d{d}", uid, f"sim_misc{i % 20:02d}",
                    cal_epoch + i * 3600.0 + d * 600.0, "post", text,
                )
            )

    # malformed-but-parseable respondents so exclusion paths get exercised
    mid = ["3"] * N_ITEMS
    varied = [str(1 + (i % 5)) for i in range(N_ITEMS)]
    incomplete = list(varied)
    incomplete[6] = ""
    cal_rows.append(["xtra_incomplete"] + incomplete)
    cal_rows.append(["xtra_constant"] + mid)
    cal_rows.append(["xtra_no_text"] + varied)
    cal_rows.append(["xtra_short"] + varied)
    probs_mid = _token_distribution([3.0] * 5, scenario, vocab_index)
    for uid in ("xtra_incomplete", "xtra_constant"):
        text = _make_text(cal_rng, scenario.words_per_doc, probs_mid, vocab, 0.0)
        events.append(_doc(f"{uid}d0", uid, "sim_misc00", cal_epoch + 9.0e6, "post", text))
    events.append(
        _doc(
            "xtra_shortd0", "xtra_short", "sim_misc00", cal_epoch + 9.1e6, "post",
            _make_text(cal_rng, 30, probs_mid, vocab, 0.0),
        )
    )

    calibration_path = out / "calibration.csv"
    with open(calibration_path, "w", encoding="utf-8", newline="") as fh:
        fh.write(",".join(["user_id"] + [f"r{i:02d}" for i in range(1, N_ITEMS + 1)]) + "\n")
        for row in cal_rows:
            fh.write(",".join(row) + "\n")

    # communities with planted survival effects on founder-trait means
    com_rng = np.random.default_rng(derive_seed(seed, "communities"))
    beta = np.array([scenario.coefficients[t] for t in TRAITS])
    for i in range(scenario.n_communities):
        cid = f"sim_g{i:04d}"
        inception = scenario.base_time + i * 7200.0
        k = int(com_rng.integers(scenario.min_founders, scenario.max_founders + 1))
        latent = com_rng.uniform(SCALE_MIN, SCALE_MAX, size=(k, len(TRAITS)))
        means = latent.mean(axis=0)
        eta = (
            scenario.coefficients["intercept"]
            + float(means @ beta)
            + scenario.coefficients["n_founders"] * k
        )
        survived = bool(com_rng.random() < _sigmoid(eta))

        founder_ids = []
        retained = []
        for j in range(k):
            uid = f"{cid}f{j}"
            founder_ids.append(uid)
            truth_founders[uid] = {t: float(latent[j, pos]) for pos, t in enumerate(TRAITS)}
            probs = _token_distribution(latent[j], scenario, vocab_index)
            for d in range(scenario.docs_per_user):
                n_words = int(scenario.words_per_doc * (0.9 + 0.2 * com_rng.random()))
                ts = inception - DAY_SECONDS * (30.0 + j * 3.0 + d) + float(com_rng.integers(0, 3600))
                text = _make_text(com_rng, n_words, probs, vocab, scenario.collocation_rate)
                events.append(
                    _doc(f"{uid}p{d}", uid, f"sim_misc{(i + j) % 20:02d}", ts, "post", text)
                )
            # short post inside the founder window marks them as a founder
            intro = _make_text(com_rng, 25, probs, vocab, 0.0)
            events.append(_doc(f"{uid}w", uid, cid, inception + j * 21600.0, "post", intro))
            consc = latent[j, TRAITS.index("conscientiousness")]
            if survived and com_rng.random() < float(_sigmoid(0.8 * (consc - 3.0))):
                retained.append(uid)

        members = []
        n_members = int(com_rng.integers(3, 9))
        for h in range(n_members):
            uid = f"{cid}m{h}"
            members.append(uid)
            ts = inception + DAY_SECONDS * (70.0 + 5.0 * h)
            text = _make_text(com_rng, 20, probs_mid, vocab, 0.0)
            events.append(_doc(f"{uid}p", uid, cid, ts, "post", text))

        if survived:
            window_start = inception + 365.0 * DAY_SECONDS
            post_ids = []
            authors = retained + members
            n_posts = 2 + i % 3
            for q in range(n_posts):
                author = authors[q % len(authors)]
                ts = window_start + DAY_SECONDS * (1.0 + 3.0 * q)
                text = _make_text(com_rng, 18, probs_mid, vocab, 0.0)
                doc_id = f"{cid}y{q}"
                post_ids.append(doc_id)
                events.append(_doc(doc_id, author, cid, ts, "post", text))
            n_comments = 2 + i % 4
            for q in range(n_comments):
                author = authors[(q + 1) % len(authors)]
                parent = post_ids[q % len(post_ids)]
                ts = window_start + DAY_SECONDS * (2.0 + 3.0 * q) + 600.0
                text = _make_text(com_rng, 15, probs_mid, vocab, 0.0)
                events.append(_doc(f"{cid}r{q}", author, cid, ts, "comment", text, parent=parent))

        truth_communities[cid] = {
            "sustained": survived,
            "n_founders": k,
            "founder_ids": founder_ids,
            "retained_founders": retained,
            "latent_trait_means": {t: float(means[pos]) for pos, t in enumerate(TRAITS)},
        }

    events.sort(key=lambda e: (e["timestamp"], e["doc_id"]))
    events_path = out / "events.jsonl"
    with open(events_path, "w", encoding="utf-8") as fh:
        for row in events:
            fh.write(json.dumps(row, sort_keys=True) + "\n")

    ground_truth = {
        "scenario": {
            "n_calibration_users": scenario.n_calibration_users,
            "n_communities": scenario.n_communities,
            "coefficients": dict(scenario.coefficients),
            "trait_emphasis": scenario.trait_emphasis,
            "collocation_rate": scenario.collocation_rate,
        },
        "seed": int(seed),
        "communities": truth_communities,
        "founders": truth_founders,
    }
    groundtruth_path = out / "groundtruth.json"
    with open(groundtruth_path, "w", encoding="utf-8") as fh:
        json.dump(ground_truth, fh, sort_keys=True, indent=1)
        fh.write("\n")

    n_sustained = sum(1 for v in truth_communities.values() if v["sustained"])
    logger.info(
        "fixture written to %s: %d events, %d/%d communities sustained",
        out, len(events), n_sustained, scenario.n_communities,
    )
    return SyntheticDataset(
        root=out,
        lexicons_dir=lexicons_dir,
        norms_path=norms_path,
        calibration_path=calibration_path,
        events_path=events_path,
        groundtruth_path=groundtruth_path,
        ground_truth=ground_truth,
    )
