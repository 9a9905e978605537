"""Founder identification, pre-inception trait estimation, aggregation.

Founders are the first users (at most 10) active in a community's first 60
days. Each founder's traits are estimated from their platform-wide documents
strictly before the community's inception, truncated to the earliest 2,000,
with the focal community excluded outright. Community-level trait values are
plain means over founders whose corpora passed the word threshold.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Iterable, Mapping, Sequence

from .calibration import TRAITS
from .community import DAY_SECONDS, EventLog
from .errors import EmptyCommunityError, UserExcluded, ValidationError
from .features import Document, featurize_user
from .learners import FAMILIES, TraitModel, predict

logger = logging.getLogger(__name__)

FOUNDER_WINDOW_DAYS = 60
MAX_FOUNDERS = 10
MAX_PRIOR_POSTS = 2000


@dataclass(frozen=True)
class FounderRecord:
    user_id: str
    community_id: str
    first_activity_ts: float
    prior_documents: tuple = ()


def identify_founders(
    log: EventLog,
    inception_ts: float | None = None,
    *,
    window_days: int = FOUNDER_WINDOW_DAYS,
    max_n: int = MAX_FOUNDERS,
) -> list[FounderRecord]:
    """First max_n distinct users active in [inception, inception+window).

    Ordering is by first activity, ties by user id. Permuting the event log
    cannot change the result; activity times are reduced per user first.
    """
    if inception_ts is None:
        inception_ts = log.inception_ts
    end = inception_ts + window_days * DAY_SECONDS
    first_seen: dict[str, float] = {}
    for doc in log.events:
        if inception_ts <= doc.timestamp < end:
            prev = first_seen.get(doc.author_id)
            if prev is None or doc.timestamp < prev:
                first_seen[doc.author_id] = doc.timestamp
    if not first_seen:
        raise EmptyCommunityError(
            f"community {log.community_id!r} has no active users in its founder window"
        )
    ordered = sorted(first_seen.items(), key=lambda kv: (kv[1], kv[0]))
    return [
        FounderRecord(user_id=uid, community_id=log.community_id, first_activity_ts=ts)
        for uid, ts in ordered[:max_n]
    ]


def founder_prior_corpus(
    user_id: str,
    global_events: Iterable[Document],
    inception_ts: float,
    *,
    focal_community_id: str,
    max_posts: int = MAX_PRIOR_POSTS,
) -> list[Document]:
    """The user's earliest pre-inception documents, focal community excluded.

    Strictly before inception; a document at the inception instant is out.
    """
    prior = [
        doc
        for doc in global_events
        if doc.author_id == user_id
        and doc.timestamp < inception_ts
        and doc.community_id != focal_community_id
    ]
    prior.sort(key=lambda d: (d.timestamp, d.community_id, d.kind, d.doc_id or ""))
    return prior[:max_posts]


ModelBundle = Mapping  # family -> trait -> TraitModel


def validate_model_bundle(models: ModelBundle):
    for family in FAMILIES:
        if family not in models:
            raise ValidationError(f"model bundle is missing family {family!r}")
        for trait in TRAITS:
            if trait not in models[family]:
                raise ValidationError(f"model bundle is missing {family}/{trait}")


def estimate_founder_traits(
    corpus: Sequence[Document],
    lexicons,
    norms,
    vocab,
    models: ModelBundle,
    *,
    min_words: int = 400,
    user_id: str | None = None,
) -> dict:
    """Featurize once, then apply all 4x5 models. Values land in [1,5].

    Raises the same exclusion signals as featurization; callers skip the
    founder and log.
    """
    validate_model_bundle(models)
    if not corpus:
        raise UserExcluded(user_id or "?", "below_min_words", "no prior documents")
    vector = featurize_user(
        corpus, lexicons, norms, vocab, min_words=min_words, user_id=user_id
    )
    return {
        family: tuple(predict(models[family][trait], vector) for trait in TRAITS)
        for family in FAMILIES
    }


class FounderTraitEstimator:
    """Caches per-(user, inception-cutoff) estimates across communities.

    A user can found several communities; their pre-cutoff corpus, and hence
    the estimate, is identical whenever the cutoff matches.
    """

    def __init__(self, lexicons, norms, vocab, models: ModelBundle, min_words: int = 400):
        validate_model_bundle(models)
        self.lexicons = lexicons
        self.norms = norms
        self.vocab = vocab
        self.models = models
        self.min_words = min_words
        self._cache: dict = {}

    def estimate(
        self, user_id: str, inception_ts: float, corpus: Sequence[Document]
    ) -> dict | None:
        """Per-family trait tuples, or None when the founder is excluded."""
        key = (user_id, inception_ts)
        if key in self._cache:
            return self._cache[key]
        try:
            estimates = estimate_founder_traits(
                corpus,
                self.lexicons,
                self.norms,
                self.vocab,
                self.models,
                min_words=self.min_words,
                user_id=user_id,
            )
        except UserExcluded as exc:
            logger.info("founder %s excluded: %s", user_id, exc)
            estimates = None
        self._cache[key] = estimates
        return estimates


@dataclass(frozen=True)
class CommunityFounderTraits:
    """Per-family founder-trait means plus the founder count control."""

    community_id: str
    n_founders: int
    traits: Mapping  # family -> tuple of 5 means, TRAITS order

    def __post_init__(self):
        if not 1 <= self.n_founders <= MAX_FOUNDERS:
            raise ValidationError(f"n_founders must be 1..{MAX_FOUNDERS}, got {self.n_founders}")
        for family in FAMILIES:
            if family not in self.traits:
                raise ValidationError(f"missing trait means for family {family!r}")
            values = self.traits[family]
            if len(values) != len(TRAITS):
                raise ValidationError(f"family {family!r} must carry {len(TRAITS)} means")
            if any(not 1.0 <= v <= 5.0 for v in values):
                raise ValidationError(f"family {family!r} has a mean outside [1,5]")


def aggregate_community(
    founder_estimates: Sequence[Mapping], community_id: str
) -> CommunityFounderTraits:
    """Mean over founders per family per trait; count enters as n_founders."""
    if not founder_estimates:
        raise EmptyCommunityError(
            f"community {community_id!r} has no founders with valid trait estimates"
        )
    n = len(founder_estimates)
    means = {
        family: tuple(
            sum(est[family][t] for est in founder_estimates) / n for t in range(len(TRAITS))
        )
        for family in FAMILIES
    }
    return CommunityFounderTraits(community_id=community_id, n_founders=n, traits=means)
