"""Word-category lexicons and valence/arousal norms.

A category lexicon is a named set of lowercase entries; an entry ending in
"*" matches every token that begins with the part before the star (the
usual word-count dictionary convention), anything else matches exactly.
Norms map lemmas to mean valence and arousal ratings on a 1..9 scale.

Both structures are immutable after load and safe to share across workers.
"""
from __future__ import annotations

import csv
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Iterable, Mapping

from .errors import InputFormatError, ValidationError

RATING_MIN = 1.0
RATING_MAX = 9.0


@dataclass(frozen=True)
class CategoryLexicon:
    name: str
    exact_entries: frozenset[str]
    prefix_entries: frozenset[str]

    def __post_init__(self):
        if not self.name:
            raise ValidationError("lexicon name must be non-empty")
        for entry in self.exact_entries | self.prefix_entries:
            if not entry:
                raise ValidationError(f"lexicon {self.name!r}: empty entry")
            if entry != entry.lower():
                raise ValidationError(f"lexicon {self.name!r}: entry {entry!r} not lowercase")
        both = self.exact_entries & self.prefix_entries
        if both:
            raise ValidationError(
                f"lexicon {self.name!r}: entries in both exact and prefix sets: {sorted(both)}"
            )
        if not self.exact_entries and not self.prefix_entries:
            raise ValidationError(f"lexicon {self.name!r} is empty")

    def __len__(self) -> int:
        return len(self.exact_entries) + len(self.prefix_entries)


def match_token(lexicon: CategoryLexicon, token: str) -> bool:
    """True iff a normalized token is covered by the lexicon."""
    if token in lexicon.exact_entries:
        return True
    # Probe the token's own prefixes rather than scanning the prefix set.
    for i in range(1, len(token) + 1):
        if token[:i] in lexicon.prefix_entries:
            return True
    return False


def _parse_entry(raw: str, path: str, lineno: int) -> tuple[str, bool]:
    """Return (entry, is_prefix) for one lexicon line."""
    if any(ch.isspace() for ch in raw):
        raise InputFormatError(
            f"entry {raw!r} contains whitespace", path=path, line=lineno
        )
    star_at = raw.find("*")
    if star_at >= 0:
        if star_at != len(raw) - 1 or raw.count("*") != 1:
            raise InputFormatError(
                f"wildcard '*' must be the final character in {raw!r}",
                path=path,
                line=lineno,
            )
        entry = raw[:-1].lower()
        if not entry:
            raise InputFormatError("bare '*' entry is not allowed", path=path, line=lineno)
        return entry, True
    return raw.lower(), False


def load_category_lexicon(path: str | Path) -> CategoryLexicon:
    """Load a one-entry-per-line lexicon file; the file stem names the lexicon."""
    path = Path(path)
    exact: set[str] = set()
    prefix: set[str] = set()
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            raw = line.strip()
            if not raw or raw.startswith("#"):
                continue
            entry, is_prefix = _parse_entry(raw, str(path), lineno)
            (prefix if is_prefix else exact).add(entry)
    return CategoryLexicon(
        name=path.stem, exact_entries=frozenset(exact), prefix_entries=frozenset(prefix)
    )


def dump_category_lexicon(lexicon: CategoryLexicon, path: str | Path) -> None:
    """Write a lexicon back in the load format (entries sorted, comments dropped)."""
    lines = sorted(lexicon.exact_entries) + [p + "*" for p in sorted(lexicon.prefix_entries)]
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


@dataclass(frozen=True)
class AffectNorms:
    entries: Mapping[str, tuple[float, float]] = field(default_factory=dict)

    def __post_init__(self):
        for word, (valence, arousal) in self.entries.items():
            if word != word.lower():
                raise ValidationError(f"norms key {word!r} not lowercase")
            for label, value in (("valence", valence), ("arousal", arousal)):
                if not (RATING_MIN <= value <= RATING_MAX):
                    raise ValidationError(
                        f"{label} for {word!r} is {value}, outside [{RATING_MIN}, {RATING_MAX}]"
                    )

    def __len__(self) -> int:
        return len(self.entries)

    def get(self, token: str) -> tuple[float, float] | None:
        return self.entries.get(token)


NORMS_HEADER = ["word", "valence_mean", "arousal_mean"]


def load_affect_norms(path: str | Path) -> AffectNorms:
    """Load a word,valence_mean,arousal_mean CSV into validated norms."""
    path = Path(path)
    entries: dict[str, tuple[float, float]] = {}
    with open(path, encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header != NORMS_HEADER:
            raise InputFormatError(
                f"expected header {','.join(NORMS_HEADER)!r}, got {header}", path=str(path), line=1
            )
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != 3:
                raise InputFormatError(f"expected 3 columns, got {len(row)}", path=str(path), line=lineno)
            word = row[0].strip().lower()
            try:
                valence, arousal = float(row[1]), float(row[2])
            except ValueError as exc:
                raise InputFormatError(f"non-numeric rating in {row}", path=str(path), line=lineno) from exc
            if word in entries:
                raise ValidationError(f"duplicate norms entry for lemma {word!r}")
            entries[word] = (valence, arousal)
    return AffectNorms(entries=entries)


def _data_dir():
    return resources.files("founderlens").joinpath("data")


BUILTIN_LEXICON_NAMES = ("affect", "posemo", "negemo", "social")


def builtin_lexicon_path(name: str) -> Path:
    """Filesystem path of one of the bundled demonstration lexicons."""
    if name not in BUILTIN_LEXICON_NAMES:
        raise ValidationError(f"no builtin lexicon named {name!r}; have {BUILTIN_LEXICON_NAMES}")
    return Path(str(_data_dir().joinpath("lexicons", f"{name}.txt")))


def load_builtin_lexicons() -> list[CategoryLexicon]:
    """The small demonstration lexicon set shipped with the package.

    Real analyses are expected to supply their own dictionaries; these exist
    so the pipeline runs out of the box and the file format has a reference.
    """
    return [load_category_lexicon(builtin_lexicon_path(name)) for name in BUILTIN_LEXICON_NAMES]


def load_lexicon_dir(directory: str | Path) -> list[CategoryLexicon]:
    """Load every *.txt lexicon in a directory, sorted by name."""
    directory = Path(directory)
    paths = sorted(directory.glob("*.txt"))
    if not paths:
        raise ValidationError(f"no lexicon files (*.txt) found in {directory}")
    return [load_category_lexicon(p) for p in paths]


def category_name_templates() -> list[str]:
    """Category names of the common 2015 word-count dictionary, as templates.

    Only the names ship (the dictionary itself is proprietary); users create
    a lexicon file per category they can populate.
    """
    text = _data_dir().joinpath("category_names_2015.txt").read_text(encoding="utf-8")
    return [ln.strip() for ln in text.splitlines() if ln.strip() and not ln.startswith("#")]


def builtin_affect_norms() -> AffectNorms:
    """The bundled demonstration valence/arousal norms."""
    return load_affect_norms(Path(str(_data_dir().joinpath("affect_norms.csv"))))
