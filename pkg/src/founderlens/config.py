"""Run configuration: TOML file plus flag overrides, archived per run."""

from __future__ import annotations

import hashlib
import json
from collections.abc import Mapping
from dataclasses import dataclass, field, fields, replace
from pathlib import Path

try:
    import tomllib as tomli  # 3.11+
except ModuleNotFoundError:
    import tomli

from .errors import InputFormatError, ValidationError
from .learners import DEFAULT_GRIDS, FAMILIES

_PATH_KEYS = ("lexicons", "norms", "calibration", "events", "output")
_THRESHOLD_KEYS = (
    "min_words",
    "top_k_features",
    "bigram_top_k",
    "bigram_min_users",
    "founder_window_days",
    "max_founders",
    "max_prior_posts",
    "year_mark_days",
    "window_days",
    "kfolds",
    "alpha",
)
_REGRESSION_KEYS = ("log_outcomes", "standardized")


def _default_grids() -> dict:
    return {family: dict(DEFAULT_GRIDS[family]) for family in FAMILIES}


@dataclass(frozen=True)
class PipelineConfig:
    lexicons: Path
    norms: Path
    calibration: Path
    events: Path
    output: Path
    seed: int = 0
    min_words: int = 400
    top_k_features: int = 15
    bigram_top_k: int = 50
    bigram_min_users: int = 100
    founder_window_days: int = 60
    max_founders: int = 10
    max_prior_posts: int = 2000
    year_mark_days: int = 365
    window_days: int = 30
    kfolds: int = 10
    alpha: float = 0.05
    jobs: int = 1
    log_outcomes: tuple = ()
    standardized: bool = False
    grids: Mapping = field(default_factory=_default_grids)

    def __post_init__(self):
        for key in _PATH_KEYS:
            object.__setattr__(self, key, Path(getattr(self, key)))
        for key in _THRESHOLD_KEYS[:-1] + ("seed", "jobs"):
            value = getattr(self, key)
            if not isinstance(value, int) or isinstance(value, bool):
                raise ValidationError(f"{key} must be an integer, got {value!r}")
        for key in _THRESHOLD_KEYS[:-1]:
            if getattr(self, key) <= 0:
                raise ValidationError(f"{key} must be positive")
        if self.seed < 0:
            raise ValidationError("seed must be non-negative")
        if self.jobs < 1:
            raise ValidationError("jobs must be at least 1")
        if not 0.0 < self.alpha <= 0.5:
            raise ValidationError(f"alpha out of (0, 0.5]: {self.alpha}")
        if self.max_founders > 10:
            raise ValidationError("max_founders is capped at 10")
        if self.kfolds < 2:
            raise ValidationError("kfolds must be at least 2")
        object.__setattr__(self, "log_outcomes", tuple(str(v) for v in self.log_outcomes))
        grids = {}
        for family in FAMILIES:
            axes = dict(self.grids.get(family, DEFAULT_GRIDS[family]))
            grids[family] = {name: tuple(values) for name, values in axes.items()}
        unknown = sorted(set(self.grids) - set(FAMILIES))
        if unknown:
            raise ValidationError(f"unknown learner families in grids: {unknown}")
        object.__setattr__(self, "grids", grids)


def _check_keys(section: Mapping, allowed, where: str, path: str) -> None:
    unknown = sorted(set(section) - set(allowed))
    if unknown:
        raise InputFormatError(f"unknown keys in {where}: {unknown}", path=path)


def load_config(path: str | Path, overrides: Mapping | None = None) -> PipelineConfig:
    """Parse a TOML config; non-None override values win over file values."""
    path = Path(path)
    try:
        with open(path, "rb") as fh:
            raw = tomli.load(fh)
    except FileNotFoundError:
        raise InputFormatError("config file not found", path=str(path)) from None
    except tomli.TOMLDecodeError as exc:
        raise InputFormatError(f"invalid TOML: {exc}", path=str(path)) from None

    _check_keys(raw, ("seed", "jobs", "paths", "thresholds", "regression", "grids"),
                "config", str(path))
    paths_section = raw.get("paths", {})
    _check_keys(paths_section, _PATH_KEYS, "[paths]", str(path))
    missing = sorted(set(_PATH_KEYS) - set(paths_section))
    if missing:
        raise InputFormatError(f"[paths] is missing {missing}", path=str(path))
    thresholds = raw.get("thresholds", {})
    _check_keys(thresholds, _THRESHOLD_KEYS, "[thresholds]", str(path))
    regression = raw.get("regression", {})
    _check_keys(regression, _REGRESSION_KEYS, "[regression]", str(path))

    kwargs: dict = {}
    base = path.parent
    for key in _PATH_KEYS:
        kwargs[key] = base / str(paths_section[key])
    kwargs.update(thresholds)
    kwargs.update(regression)
    for key in ("seed", "jobs"):
        if key in raw:
            kwargs[key] = raw[key]
    if "grids" in raw:
        kwargs["grids"] = raw["grids"]

    try:
        config = PipelineConfig(**kwargs)
    except TypeError as exc:
        raise InputFormatError(f"bad config value: {exc}", path=str(path)) from None
    if overrides:
        config = apply_overrides(config, overrides)
    return config


def apply_overrides(config: PipelineConfig, overrides: Mapping) -> PipelineConfig:
    known = {f.name for f in fields(PipelineConfig)}
    updates = {}
    for key, value in overrides.items():
        if value is None:
            continue
        if key not in known:
            raise ValidationError(f"unknown config override: {key}")
        updates[key] = value
    return replace(config, **updates) if updates else config


def config_to_dict(config: PipelineConfig) -> dict:
    """JSON-safe snapshot, archived verbatim in the run manifest."""
    out = {}
    for f in fields(PipelineConfig):
        value = getattr(config, f.name)
        if isinstance(value, Path):
            value = str(value)
        elif f.name == "grids":
            value = {fam: {k: list(v) for k, v in axes.items()} for fam, axes in value.items()}
        elif isinstance(value, tuple):
            value = list(value)
        out[f.name] = value
    return out


def config_digest(config: PipelineConfig) -> str:
    payload = json.dumps(config_to_dict(config), sort_keys=True).encode("utf-8")
    return hashlib.sha256(payload).hexdigest()
