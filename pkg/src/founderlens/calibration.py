"""Labeled training set construction and two-stage feature selection.

Survey respondents are scored on the 20-item short personality inventory,
filtered by the published exclusion rules, and matched to their text. Per
trait, candidate features are screened to the top-k Pearson correlations and
then pruned by forward-backward stepwise search on a Gaussian linear model
with AIC as the criterion (the sources name no criterion; AIC is our pick,
iteration cap 200 moves).
"""
from __future__ import annotations

import csv
import logging
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Mapping, Sequence

import numpy as np

from .errors import InputFormatError, SampleSizeError, ValidationError

log = logging.getLogger(__name__)

# Canonical trait order; every 5-vector of traits in the package follows it.
TRAITS = ("neuroticism", "extraversion", "openness", "agreeableness", "conscientiousness")

N_ITEMS = 20
ITEMS_PER_TRAIT = 4
RESPONSE_MIN, RESPONSE_MAX = 1, 5

DEFAULT_TOP_K = 15
DEFAULT_MAX_MOVES = 200

EXCLUSION_REASONS = ("incomplete", "constant_response", "no_text_match", "below_min_words")


@dataclass(frozen=True)
class ScoringKey:
    """Item-to-trait assignment with reverse-keyed flags.

    The five 4-item sets must partition items 1..20.
    """

    items: Mapping[str, tuple[int, ...]]
    reversed_items: frozenset

    def __post_init__(self):
        if set(self.items) != set(TRAITS):
            raise ValidationError(f"scoring key must cover exactly the traits {TRAITS}")
        seen: list[int] = []
        for trait in TRAITS:
            idx = self.items[trait]
            if len(idx) != ITEMS_PER_TRAIT:
                raise ValidationError(f"trait {trait} must have {ITEMS_PER_TRAIT} items, got {len(idx)}")
            seen.extend(idx)
        if sorted(seen) != list(range(1, N_ITEMS + 1)):
            raise ValidationError("scoring key item sets must partition 1..20")
        if not self.reversed_items <= set(range(1, N_ITEMS + 1)):
            raise ValidationError("reverse-keyed items must be within 1..20")


def load_scoring_key(path: Path | str) -> ScoringKey:
    """Read a key CSV with columns item_index, trait, reverse_keyed."""
    path = Path(path)
    items: dict[str, list[int]] = {t: [] for t in TRAITS}
    reversed_items = set()
    with open(path, encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header != ["item_index", "trait", "reverse_keyed"]:
            raise InputFormatError(
                "expected header item_index,trait,reverse_keyed", path=str(path), line=1
            )
        for lineno, row in enumerate(reader, start=2):
            if len(row) != 3:
                raise InputFormatError("expected 3 columns", path=str(path), line=lineno)
            raw_idx, trait, raw_rev = row
            try:
                idx = int(raw_idx)
            except ValueError:
                raise InputFormatError(f"bad item index {raw_idx!r}", path=str(path), line=lineno)
            if trait not in TRAITS:
                raise InputFormatError(f"unknown trait {trait!r}", path=str(path), line=lineno)
            if raw_rev not in ("true", "false"):
                raise InputFormatError(
                    f"reverse_keyed must be true/false, got {raw_rev!r}", path=str(path), line=lineno
                )
            items[trait].append(idx)
            if raw_rev == "true":
                reversed_items.add(idx)
    return ScoringKey(
        items={t: tuple(v) for t, v in items.items()}, reversed_items=frozenset(reversed_items)
    )


def default_scoring_key() -> ScoringKey:
    """The published instrument layout shipped as package data."""
    return load_scoring_key(Path(__file__).parent / "data" / "mini_ipip_key.csv")


def score_mini_ipip(responses: Sequence[int], key: ScoringKey) -> tuple[float, ...]:
    """Trait scores in TRAITS order: mean of 4 items, reversed items as 6 - r."""
    if len(responses) != N_ITEMS:
        raise ValidationError(f"expected {N_ITEMS} responses, got {len(responses)}")
    for i, r in enumerate(responses, start=1):
        if not isinstance(r, int) or not RESPONSE_MIN <= r <= RESPONSE_MAX:
            raise ValidationError(f"response to item {i} out of range 1..5: {r!r}")
    scores = []
    for trait in TRAITS:
        total = 0.0
        for idx in key.items[trait]:
            r = responses[idx - 1]
            total += (6 - r) if idx in key.reversed_items else r
        scores.append(total / ITEMS_PER_TRAIT)
    return tuple(scores)


@dataclass(frozen=True)
class CalibrationRecord:
    """One survey respondent; traits present only once scored."""

    user_id: str
    item_responses: tuple
    traits: tuple | None = None

    def is_complete(self) -> bool:
        return len(self.item_responses) == N_ITEMS and all(
            r is not None for r in self.item_responses
        )

    def is_constant(self) -> bool:
        return self.is_complete() and len(set(self.item_responses)) == 1


def load_calibration_csv(path: Path | str) -> list[CalibrationRecord]:
    """Read respondents from a CSV: user_id, r01..r20. Blank cells mean skipped items."""
    path = Path(path)
    expected = ["user_id"] + [f"r{i:02d}" for i in range(1, N_ITEMS + 1)]
    records = []
    seen_users = set()
    with open(path, encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header != expected:
            raise InputFormatError(
                f"expected header {','.join(expected)}", path=str(path), line=1
            )
        for lineno, row in enumerate(reader, start=2):
            if len(row) != len(expected):
                raise InputFormatError(
                    f"expected {len(expected)} columns, got {len(row)}", path=str(path), line=lineno
                )
            user_id = row[0]
            if not user_id:
                raise InputFormatError("empty user_id", path=str(path), line=lineno)
            if user_id in seen_users:
                raise ValidationError(f"duplicate calibration user_id {user_id!r}")
            seen_users.add(user_id)
            responses = []
            for col, cell in enumerate(row[1:], start=1):
                if cell == "":
                    responses.append(None)
                    continue
                try:
                    value = int(cell)
                except ValueError:
                    raise InputFormatError(
                        f"response r{col:02d} must be an integer, got {cell!r}",
                        path=str(path),
                        line=lineno,
                    )
                if not RESPONSE_MIN <= value <= RESPONSE_MAX:
                    raise InputFormatError(
                        f"response r{col:02d} out of range 1..5: {value}",
                        path=str(path),
                        line=lineno,
                    )
                responses.append(value)
            records.append(CalibrationRecord(user_id=user_id, item_responses=tuple(responses)))
    return records


@dataclass(frozen=True)
class ExclusionReport:
    """Respondent vs retained bookkeeping, one reason per excluded user."""

    n_respondents: int
    n_retained: int
    exclusions: tuple

    def count(self, reason: str) -> int:
        return sum(1 for _, r, _ in self.exclusions if r == reason)


def apply_exclusions(
    records: Sequence[CalibrationRecord],
    word_counts: Mapping[str, int],
    key: ScoringKey,
    min_words: int = 400,
) -> tuple[list[CalibrationRecord], ExclusionReport]:
    """Filter respondents and score the survivors.

    word_counts maps user_id to collated word count; users absent from it had
    no usable text match. Retained records come back with traits populated.
    """
    retained: list[CalibrationRecord] = []
    exclusions: list[tuple[str, str, str]] = []

    def exclude(user_id: str, reason: str, detail: str):
        exclusions.append((user_id, reason, detail))
        log.info("excluding %s: %s (%s)", user_id, reason, detail)

    for record in records:
        if not record.is_complete():
            answered = sum(1 for r in record.item_responses if r is not None)
            exclude(record.user_id, "incomplete", f"{answered} of {N_ITEMS} items answered")
            continue
        if record.is_constant():
            exclude(
                record.user_id,
                "constant_response",
                f"all items answered {record.item_responses[0]}",
            )
            continue
        if record.user_id not in word_counts:
            exclude(record.user_id, "no_text_match", "no text matched to this respondent")
            continue
        words = word_counts[record.user_id]
        if words < min_words:
            exclude(record.user_id, "below_min_words", f"{words} < {min_words}")
            continue
        traits = score_mini_ipip(record.item_responses, key)
        retained.append(
            CalibrationRecord(
                user_id=record.user_id, item_responses=record.item_responses, traits=traits
            )
        )
    report = ExclusionReport(
        n_respondents=len(records), n_retained=len(retained), exclusions=tuple(exclusions)
    )
    return retained, report


def _pearson(x: np.ndarray, y: np.ndarray) -> float:
    # zero variance on either side has no defined correlation; screen treats it as 0
    xd = x - x.mean()
    yd = y - y.mean()
    sx = math.sqrt(float(xd @ xd))
    sy = math.sqrt(float(yd @ yd))
    if sx == 0.0 or sy == 0.0:
        return 0.0
    return float(xd @ yd) / (sx * sy)


def correlation_screen(
    matrix: np.ndarray, names: Sequence[str], y: np.ndarray, k: int = DEFAULT_TOP_K
) -> list[tuple[str, float]]:
    """Top-k features by |Pearson r| with the trait, ties lexicographic."""
    matrix = np.asarray(matrix, dtype=float)
    y = np.asarray(y, dtype=float)
    if matrix.ndim != 2 or matrix.shape[1] != len(names):
        raise ValidationError("feature matrix columns must align with names")
    if matrix.shape[0] != y.shape[0]:
        raise ValidationError("feature matrix and trait vector disagree on row count")
    if matrix.shape[0] < 3:
        raise SampleSizeError(f"correlation screen needs at least 3 users, got {matrix.shape[0]}")
    correlations = {name: _pearson(matrix[:, j], y) for j, name in enumerate(names)}
    ranked = sorted(names, key=lambda n: (-abs(correlations[n]), n))
    return [(n, correlations[n]) for n in ranked[:k]]


@dataclass(frozen=True)
class SelectedFeatureSet:
    trait: str
    screened: tuple
    final: tuple
    criterion_trace: tuple

    def __post_init__(self):
        screened_names = {name for name, _ in self.screened}
        if not set(self.final) <= screened_names:
            raise ValidationError("final feature set must be a subset of the screened set")


# Perfect fits drive SSE to 0 and the log criterion to -inf, where float noise
# decides moves; the floor keeps the search stable without affecting real fits.
_SSE_FLOOR_SCALE = 1e-10


def _aic(sse: float, n: int, n_features: int, floor: float) -> float:
    return n * math.log(max(sse, floor) / n) + 2.0 * (n_features + 1)


def _ols_sse(X: np.ndarray, y: np.ndarray) -> tuple[float, bool]:
    """(sum of squared residuals, full_rank) for y ~ [1, X]."""
    design = np.column_stack([np.ones(len(y)), X]) if X.shape[1] else np.ones((len(y), 1))
    coef, _, rank, _ = np.linalg.lstsq(design, y, rcond=None)
    resid = y - design @ coef
    return float(resid @ resid), rank == design.shape[1]


def stepwise_select(
    matrix: np.ndarray,
    names: Sequence[str],
    y: np.ndarray,
    *,
    trait: str = "",
    screened: Sequence[tuple[str, float]] | None = None,
    max_moves: int = DEFAULT_MAX_MOVES,
) -> SelectedFeatureSet:
    """Forward-backward stepwise search from the empty model.

    Each move considers every single add and drop, takes the lowest-AIC one
    (ties broken by feature name), and accepts it only on strict improvement.
    Candidates whose addition makes the design rank-deficient are dropped from
    the pool with a warning.
    """
    matrix = np.asarray(matrix, dtype=float)
    y = np.asarray(y, dtype=float)
    if not len(names):
        raise ValidationError("stepwise selection needs at least one screened feature")
    if matrix.shape != (y.shape[0], len(names)):
        raise ValidationError("feature matrix shape must be (n_users, n_screened)")
    if screened is None:
        screened = [(name, _pearson(matrix[:, j], y)) for j, name in enumerate(names)]

    col = {name: j for j, name in enumerate(names)}
    n = len(y)
    total_ss = float(((y - y.mean()) ** 2).sum())
    floor = _SSE_FLOOR_SCALE * max(total_ss, 1.0)

    def fit(selected: Sequence[str]) -> tuple[float, bool]:
        X = matrix[:, [col[s] for s in selected]]
        sse, full_rank = _ols_sse(X, y)
        return _aic(sse, n, len(selected), floor), full_rank

    pool = list(names)
    selected: list[str] = []
    current, _ = fit(selected)
    trace = [current]

    for _ in range(max_moves):
        candidates: list[tuple[float, str, str]] = []
        for name in pool:
            if name in selected:
                continue
            aic, full_rank = fit(sorted(selected + [name]))
            if not full_rank:
                log.warning("dropping %s from stepwise pool: design became rank-deficient", name)
                pool.remove(name)
                continue
            candidates.append((aic, name, "add"))
        for name in selected:
            aic, _ = fit([s for s in selected if s != name])
            candidates.append((aic, name, "drop"))
        if not candidates:
            break
        aic, name, kind = min(candidates, key=lambda c: (c[0], c[1]))
        if aic >= current - 1e-10:
            break
        if kind == "add":
            selected.append(name)
            selected.sort()
        else:
            selected.remove(name)
        current = aic
        trace.append(current)

    ordered_final = tuple(name for name, _ in screened if name in selected)
    return SelectedFeatureSet(
        trait=trait,
        screened=tuple(screened),
        final=ordered_final,
        criterion_trace=tuple(trace),
    )


def select_features(
    matrix: np.ndarray,
    names: Sequence[str],
    y: np.ndarray,
    *,
    trait: str,
    k: int = DEFAULT_TOP_K,
    max_moves: int = DEFAULT_MAX_MOVES,
) -> SelectedFeatureSet:
    """Both stages: correlation screen, then stepwise on the survivors."""
    screened = correlation_screen(matrix, names, y, k=k)
    index = {name: j for j, name in enumerate(names)}
    screened_names = [name for name, _ in screened]
    sub = np.asarray(matrix, dtype=float)[:, [index[n] for n in screened_names]]
    return stepwise_select(
        sub, screened_names, y, trait=trait, screened=screened, max_moves=max_moves
    )
