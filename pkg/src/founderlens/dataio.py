"""Artifact file formats: JSONL event logs and round-trip-exact CSVs.

Floats are written with repr() so every artifact parses back to the same
bit pattern; None becomes an empty cell.
"""

from __future__ import annotations

import csv
import hashlib
import json
from collections.abc import Mapping, Sequence
from pathlib import Path

import numpy as np

from .calibration import TRAITS
from .community import CommunityOutcomes
from .errors import InputFormatError, ValidationError
from .features import BigramVocabulary, Document
from .founders import CommunityFounderTraits
from .learners import FAMILIES

EVENT_FIELDS = ("author_id", "community_id", "timestamp", "kind", "text")

OUTCOME_COLUMNS = (
    "community_id",
    "sustained",
    "founder_retention",
    "size",
    "engagement",
    "avg_degree",
    "log_avg_degree",
    "diameter",
    "n_components",
    "degree_centralization",
    "closeness_centralization",
    "replies_skipped",
)

_INT_OUTCOMES = {"size", "diameter", "n_components", "replies_skipped"}


def load_documents(path: str | Path) -> list[Document]:
    """Read one JSON object per line into validated documents."""
    path = Path(path)
    docs = []
    try:
        fh = open(path, encoding="utf-8")
    except FileNotFoundError:
        raise InputFormatError("events file not found", path=str(path)) from None
    with fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                row = json.loads(line)
            except json.JSONDecodeError as exc:
                raise InputFormatError(
                    f"invalid JSON: {exc.msg}", path=str(path), line=lineno
                ) from None
            if not isinstance(row, dict):
                raise InputFormatError(
                    "event line must be a JSON object", path=str(path), line=lineno
                )
            missing = sorted(set(EVENT_FIELDS) - set(row))
            if missing:
                raise InputFormatError(
                    f"event is missing fields {missing}", path=str(path), line=lineno
                )
            try:
                docs.append(
                    Document(
                        author_id=str(row["author_id"]),
                        community_id=str(row["community_id"]),
                        timestamp=float(row["timestamp"]),
                        kind=str(row["kind"]),
                        text=str(row["text"]),
                        parent_id=row.get("parent_id"),
                        doc_id=row.get("doc_id"),
                    )
                )
            except (ValidationError, TypeError, ValueError) as exc:
                raise InputFormatError(
                    f"bad event: {exc}", path=str(path), line=lineno
                ) from None
    if not docs:
        raise InputFormatError("events file contains no events", path=str(path), line=1)
    return docs


def _cell(value) -> str:
    if value is None:
        return ""
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return repr(value)
    return str(value)


def _float_or_none(text: str):
    return None if text == "" else float(text)


def _int_or_none(text: str):
    return None if text == "" else int(text)


def _open_csv(path: Path, expected_header: Sequence[str]):
    fh = open(path, encoding="utf-8", newline="")
    reader = csv.reader(fh)
    header = next(reader, None)
    if header != list(expected_header):
        fh.close()
        raise InputFormatError(
            f"unexpected header {header!r}", path=str(path), line=1
        )
    return fh, reader


def _write_csv(path: Path, header: Sequence[str], rows) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        for row in rows:
            writer.writerow([_cell(v) for v in row])


def write_feature_matrix(path: str | Path, user_ids, feature_names, matrix) -> None:
    matrix = np.asarray(matrix, dtype=float)
    rows = ([uid] + [float(v) for v in matrix[i]] for i, uid in enumerate(user_ids))
    _write_csv(Path(path), ["user_id"] + list(feature_names), rows)


def load_feature_matrix(path: str | Path):
    """Returns (user_ids, feature_names, matrix)."""
    path = Path(path)
    with open(path, encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if not header or header[0] != "user_id":
            raise InputFormatError("feature matrix must start with user_id", path=str(path), line=1)
        names = header[1:]
        user_ids = []
        values = []
        for row in reader:
            user_ids.append(row[0])
            values.append([float(v) for v in row[1:]])
    matrix = np.asarray(values, dtype=float) if values else np.empty((0, len(names)))
    return user_ids, names, matrix


def write_word_counts(path: str | Path, counts: Mapping[str, int]) -> None:
    _write_csv(Path(path), ["user_id", "word_count"],
               ((uid, counts[uid]) for uid in sorted(counts)))


def load_word_counts(path: str | Path) -> dict:
    fh, reader = _open_csv(Path(path), ["user_id", "word_count"])
    with fh:
        return {row[0]: int(row[1]) for row in reader}


def write_trait_scores(path: str | Path, scores: Mapping[str, Sequence[float]]) -> None:
    _write_csv(Path(path), ["user_id"] + list(TRAITS),
               (([uid] + [float(v) for v in scores[uid]]) for uid in sorted(scores)))


def load_trait_scores(path: str | Path) -> dict:
    fh, reader = _open_csv(Path(path), ["user_id"] + list(TRAITS))
    with fh:
        return {row[0]: tuple(float(v) for v in row[1:]) for row in reader}


def write_exclusions(path: str | Path, exclusions: Sequence) -> None:
    _write_csv(Path(path), ["user_id", "reason", "detail"], exclusions)


def load_exclusions(path: str | Path) -> list:
    fh, reader = _open_csv(Path(path), ["user_id", "reason", "detail"])
    with fh:
        return [tuple(row) for row in reader]


def save_bigram_vocabulary(vocab: BigramVocabulary, path: str | Path) -> None:
    payload = {
        "format": "bigram-vocab",
        "bigrams": list(vocab.bigrams),
        "user_support": {b: vocab.user_support[b] for b in vocab.bigrams},
        "n_candidates": vocab.n_candidates,
        "min_users": vocab.min_users,
    }
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(payload, fh, sort_keys=True)
        fh.write("\n")


def load_bigram_vocabulary(path: str | Path) -> BigramVocabulary:
    path = Path(path)
    with open(path, encoding="utf-8") as fh:
        payload = json.load(fh)
    if payload.get("format") != "bigram-vocab":
        raise InputFormatError("not a bigram vocabulary file", path=str(path))
    return BigramVocabulary(
        bigrams=tuple(payload["bigrams"]),
        user_support={b: int(v) for b, v in payload["user_support"].items()},
        n_candidates=int(payload["n_candidates"]),
        min_users=int(payload["min_users"]),
    )


def _traits_columns():
    return [f"{family}.{trait}" for family in FAMILIES for trait in TRAITS]


def write_community_traits(path: str | Path, rows: Mapping[str, CommunityFounderTraits]) -> None:
    def emit():
        for cid in sorted(rows):
            row = rows[cid]
            values = [cid, row.n_founders]
            for family in FAMILIES:
                values.extend(float(v) for v in row.traits[family])
            yield values

    _write_csv(Path(path), ["community_id", "n_founders"] + _traits_columns(), emit())


def load_community_traits(path: str | Path) -> dict:
    fh, reader = _open_csv(Path(path), ["community_id", "n_founders"] + _traits_columns())
    out = {}
    with fh:
        for row in reader:
            cid = row[0]
            values = [float(v) for v in row[2:]]
            traits = {}
            for i, family in enumerate(FAMILIES):
                traits[family] = tuple(values[i * len(TRAITS):(i + 1) * len(TRAITS)])
            out[cid] = CommunityFounderTraits(
                community_id=cid, n_founders=int(row[1]), traits=traits
            )
    return out


def write_outcomes(path: str | Path, rows: Mapping[str, CommunityOutcomes]) -> None:
    def emit():
        for cid in sorted(rows):
            row = rows[cid]
            yield [getattr(row, col) for col in OUTCOME_COLUMNS]

    _write_csv(Path(path), OUTCOME_COLUMNS, emit())


def load_outcomes(path: str | Path) -> dict:
    fh, reader = _open_csv(Path(path), OUTCOME_COLUMNS)
    out = {}
    with fh:
        for row in reader:
            kwargs = {"community_id": row[0], "sustained": row[1] == "true"}
            for col, text in zip(OUTCOME_COLUMNS[2:], row[2:]):
                if col == "founder_retention":
                    kwargs[col] = float(text)
                elif col == "replies_skipped":
                    kwargs[col] = int(text)
                elif col in _INT_OUTCOMES:
                    kwargs[col] = _int_or_none(text)
                else:
                    kwargs[col] = _float_or_none(text)
            out[row[0]] = CommunityOutcomes(**kwargs)
    return out


def write_founder_exclusions(path: str | Path, rows: Sequence) -> None:
    _write_csv(Path(path), ["community_id", "user_id"], rows)


def write_marginal_effects(path: str | Path, rows: Sequence) -> None:
    _write_csv(Path(path), ["outcome", "trait_source", "term", "ame"], rows)


def write_model_stats(path: str | Path, stats: Sequence[Mapping]) -> None:
    header = ["family", "trait", "in_sample_adj_r2", "resample_adj_r2", "hyperparameters"]
    rows = (
        [s["family"], s["trait"], float(s["in_sample_adj_r2"]), float(s["resample_adj_r2"]),
         json.dumps(s["hyperparameters"], sort_keys=True)]
        for s in stats
    )
    _write_csv(Path(path), header, rows)


def hash_file(path: str | Path) -> str:
    digest = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            digest.update(chunk)
    return digest.hexdigest()
