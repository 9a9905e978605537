"""Turn a user's collated text into a named numeric feature vector.

Three feature groups share one namespace:

* ``cat:<lexicon>``        percent of tokens matched by a category lexicon
* ``affect:<dim>_<stat>``  mean / population SD of valence and arousal over
                           tokens found in the norms (unmatched tokens skip)
* ``bigram:<a> <b>``       per-user relative frequency (x100) of a vocabulary
                           bigram; bigrams never cross document boundaries

Feature extraction is pure and deterministic, so per-user work can fan out
across processes; only vocabulary construction reduces over users.
"""
from __future__ import annotations

import logging
import math
import re
from collections import Counter
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Sequence

import numpy as np

from .errors import (
    DegenerateTextError,
    InsufficientCoverageError,
    UserExcluded,
    ValidationError,
)
from .lexicons import AffectNorms, CategoryLexicon, match_token

log = logging.getLogger(__name__)

DEFAULT_MIN_WORDS = 400
DEFAULT_TOP_BIGRAMS = 50
DEFAULT_BIGRAM_MIN_USERS = 100

AFFECT_FEATURES = (
    "affect:valence_mean",
    "affect:valence_sd",
    "affect:arousal_mean",
    "affect:arousal_sd",
)

DOCUMENT_KINDS = ("post", "comment")


@dataclass(frozen=True)
class Document:
    """One post or comment, as read from the events JSONL."""

    author_id: str
    community_id: str
    timestamp: float
    kind: str
    text: str
    parent_id: str | None = None
    doc_id: str | None = None

    def __post_init__(self):
        if self.kind not in DOCUMENT_KINDS:
            raise ValidationError(f"document kind must be one of {DOCUMENT_KINDS}, got {self.kind!r}")
        if not self.timestamp > 0:
            raise ValidationError(f"document timestamp must be positive, got {self.timestamp}")
        if self.kind == "comment" and self.parent_id is None:
            raise ValidationError("comment documents require a parent_id")


@dataclass(frozen=True)
class TokenizedText:
    tokens: tuple[str, ...]

    @property
    def word_count(self) -> int:
        return len(self.tokens)


# A token is a run of letters/digits/apostrophes; leading and trailing
# apostrophes are trimmed so only intra-word ones survive. Underscore is a
# separator despite being a \w character.
_TOKEN_RE = re.compile(r"(?:[^\W_]|')+")


def tokenize(text: str) -> TokenizedText:
    """Lowercase, Unicode-aware word tokenization. Empty text gives no tokens."""
    tokens = []
    for raw in _TOKEN_RE.findall(text.replace("’", "'").lower()):
        token = raw.strip("'")
        if token:
            tokens.append(token)
    return TokenizedText(tokens=tuple(tokens))


def category_percentages(
    text: TokenizedText, lexicons: Sequence[CategoryLexicon]
) -> dict[str, float]:
    """Percent of tokens matched, per lexicon."""
    if text.word_count == 0:
        raise DegenerateTextError("cannot compute category percentages on empty text")
    out: dict[str, float] = {}
    for lexicon in lexicons:
        matched = sum(1 for token in text.tokens if match_token(lexicon, token))
        out[f"cat:{lexicon.name}"] = 100.0 * matched / text.word_count
    return out


def affect_features(
    text: TokenizedText, norms: AffectNorms, *, user_id: str | None = None
) -> dict[str, float]:
    """Mean and population SD of valence and arousal over matched tokens.

    Tokens absent from the norms are skipped, not zero-filled. Fewer than two
    matches cannot support an SD and raise InsufficientCoverageError.
    """
    valences = []
    arousals = []
    for token in text.tokens:
        pair = norms.get(token)
        if pair is not None:
            valences.append(pair[0])
            arousals.append(pair[1])
    if len(valences) < 2:
        raise InsufficientCoverageError(len(valences), user_id=user_id)
    v = np.asarray(valences)
    a = np.asarray(arousals)
    return {
        "affect:valence_mean": float(v.mean()),
        "affect:valence_sd": float(v.std()),
        "affect:arousal_mean": float(a.mean()),
        "affect:arousal_sd": float(a.std()),
    }


def _as_token_lists(texts: TokenizedText | Sequence[TokenizedText]) -> list[tuple[str, ...]]:
    if isinstance(texts, TokenizedText):
        return [texts.tokens]
    return [t.tokens for t in texts]


def count_bigrams(texts: TokenizedText | Sequence[TokenizedText]) -> Counter[str]:
    """Adjacent-pair counts, never pairing across document boundaries."""
    counts: Counter[str] = Counter()
    for tokens in _as_token_lists(texts):
        for a, b in zip(tokens, tokens[1:]):
            counts[f"{a} {b}"] += 1
    return counts


def user_top_bigrams(
    texts: TokenizedText | Sequence[TokenizedText], k: int = DEFAULT_TOP_BIGRAMS
) -> list[str]:
    """The user's k most frequent bigrams; ties break lexicographically."""
    counts = count_bigrams(texts)
    ranked = sorted(counts.items(), key=lambda kv: (-kv[1], kv[0]))
    return [bigram for bigram, _ in ranked[:k]]


@dataclass(frozen=True)
class BigramVocabulary:
    """Bigrams that appear in strictly more than min_users users' top lists."""

    bigrams: tuple[str, ...]
    user_support: Mapping[str, int] = field(default_factory=dict)
    n_candidates: int = 0
    min_users: int = DEFAULT_BIGRAM_MIN_USERS

    def __len__(self) -> int:
        return len(self.bigrams)


def build_bigram_vocabulary(
    per_user_top: Mapping[str, Sequence[str]], min_users: int = DEFAULT_BIGRAM_MIN_USERS
) -> BigramVocabulary:
    """Reduce per-user top-bigram lists into the shared feature vocabulary."""
    if not per_user_top:
        raise ValidationError("cannot build a bigram vocabulary from zero users")
    support: Counter[str] = Counter()
    for bigrams in per_user_top.values():
        for bigram in set(bigrams):
            support[bigram] += 1
    kept = {b: c for b, c in support.items() if c > min_users}
    ordered = tuple(sorted(kept, key=lambda b: (-kept[b], b)))
    if not ordered:
        log.warning(
            "bigram vocabulary is empty: no bigram exceeded min_users=%d (candidates=%d)",
            min_users,
            len(support),
        )
    return BigramVocabulary(
        bigrams=ordered,
        user_support={b: kept[b] for b in ordered},
        n_candidates=len(support),
        min_users=min_users,
    )


def bigram_features(
    texts: TokenizedText | Sequence[TokenizedText], vocab: BigramVocabulary
) -> dict[str, float]:
    """Relative frequency (x100) of each vocabulary bigram in the user's text."""
    token_lists = _as_token_lists(texts)
    total = sum(max(len(tokens) - 1, 0) for tokens in token_lists)
    word_count = sum(len(tokens) for tokens in token_lists)
    if word_count <= 1:
        raise DegenerateTextError("bigram features need at least two words")
    if total == 0:
        # possible when every document is a single token
        raise DegenerateTextError("text contains no adjacent word pairs")
    counts = count_bigrams(texts)
    return {f"bigram:{b}": 100.0 * counts.get(b, 0) / total for b in vocab.bigrams}


@dataclass(frozen=True)
class FeatureVector:
    """Named features for one user; name set is fixed within a run."""

    values: Mapping[str, float]
    word_count: int

    def names(self) -> tuple[str, ...]:
        return tuple(self.values.keys())

    def as_array(self, names: Sequence[str]) -> np.ndarray:
        return np.array([self.values[name] for name in names], dtype=float)


def featurize_user(
    documents: Sequence[Document],
    lexicons: Sequence[CategoryLexicon],
    norms: AffectNorms,
    vocab: BigramVocabulary,
    *,
    min_words: int = DEFAULT_MIN_WORDS,
    user_id: str | None = None,
) -> FeatureVector:
    """Collate a user's documents and compute the full feature vector.

    Raises UserExcluded when the collated text is under min_words, and
    propagates InsufficientCoverageError when affect coverage is too thin;
    callers log and skip such users.
    """
    uid = user_id if user_id is not None else (documents[0].author_id if documents else "?")
    texts = [tokenize(doc.text) for doc in documents]
    word_count = sum(t.word_count for t in texts)
    if word_count < min_words:
        raise UserExcluded(uid, "below_min_words", f"{word_count} < {min_words}")
    collated = TokenizedText(tokens=tuple(tok for t in texts for tok in t.tokens))
    values: dict[str, float] = {}
    values.update(category_percentages(collated, lexicons))
    values.update(affect_features(collated, norms, user_id=uid))
    values.update(bigram_features(texts, vocab))
    return FeatureVector(values=values, word_count=word_count)


def assemble_matrix(
    vectors: Mapping[str, FeatureVector]
) -> tuple[list[str], list[str], np.ndarray]:
    """Stack per-user vectors into (user_ids, feature_names, matrix).

    Users are ordered by id; every vector must carry the identical name set.
    """
    if not vectors:
        raise ValidationError("no feature vectors to assemble")
    user_ids = sorted(vectors)
    names = list(vectors[user_ids[0]].values.keys())
    name_set = set(names)
    for uid in user_ids:
        if set(vectors[uid].values.keys()) != name_set:
            raise ValidationError(f"feature name set differs for user {uid!r}")
    matrix = np.array([[vectors[uid].values[n] for n in names] for uid in user_ids], dtype=float)
    return user_ids, names, matrix
