import json

import pytest

from founderlens.config import (
    PipelineConfig,
    apply_overrides,
    config_digest,
    config_to_dict,
    load_config,
)
from founderlens.errors import InputFormatError, ValidationError
from founderlens.learners import DEFAULT_GRIDS

PATHS = dict(
    lexicons="lex", norms="n.csv", calibration="c.csv", events="e.jsonl", output="out"
)


class TestValidation:
    def test_defaults_valid(self):
        config = PipelineConfig(**PATHS)
        assert config.min_words == 400
        assert config.alpha == 0.05
        assert config.grids["random_forest"] == {
            k: tuple(v) for k, v in DEFAULT_GRIDS["random_forest"].items()
        }

    @pytest.mark.parametrize("key,value", [
        ("min_words", 0), ("kfolds", 1), ("alpha", 0.0), ("alpha", 0.6),
        ("jobs", 0), ("max_founders", 11), ("seed", -1), ("top_k_features", -3),
    ])
    def test_bad_values_rejected(self, key, value):
        with pytest.raises(ValidationError):
            PipelineConfig(**PATHS, **{key: value})

    def test_non_integer_threshold_rejected(self):
        with pytest.raises(ValidationError):
            PipelineConfig(**PATHS, min_words=1.5)

    def test_unknown_grid_family_rejected(self):
        with pytest.raises(ValidationError):
            PipelineConfig(**PATHS, grids={"neural_net": {}})

    def test_partial_grids_filled_from_defaults(self):
        config = PipelineConfig(**PATHS, grids={"random_forest": {"trees": [5]}})
        assert config.grids["random_forest"] == {"trees": (5,)}
        assert "learning_rate" in config.grids["gradient_boosting"]


def write_config(tmp_path, body):
    path = tmp_path / "run.toml"
    path.write_text(body, encoding="utf-8")
    return path


GOOD = """\
seed = 7

[paths]
lexicons = "lex"
norms = "norms.csv"
calibration = "cal.csv"
events = "events.jsonl"
output = "out"

[thresholds]
min_words = 150
kfolds = 5

[regression]
log_outcomes = ["engagement"]

[grids.random_forest]
trees = [30]
max_features = ["third"]
"""


class TestLoadConfig:
    def test_round_trip(self, tmp_path):
        config = load_config(write_config(tmp_path, GOOD))
        assert config.seed == 7
        assert config.min_words == 150
        assert config.kfolds == 5
        assert config.log_outcomes == ("engagement",)
        assert config.grids["random_forest"] == {"trees": (30,), "max_features": ("third",)}
        # paths resolve relative to the config file
        assert config.events == tmp_path / "events.jsonl"
        assert config.output == tmp_path / "out"

    def test_missing_file(self, tmp_path):
        with pytest.raises(InputFormatError):
            load_config(tmp_path / "absent.toml")

    def test_invalid_toml(self, tmp_path):
        with pytest.raises(InputFormatError):
            load_config(write_config(tmp_path, "paths = ["))

    def test_missing_paths(self, tmp_path):
        with pytest.raises(InputFormatError) as exc:
            load_config(write_config(tmp_path, "[paths]\nlexicons = 'x'\n"))
        assert "norms" in str(exc.value)

    def test_unknown_key_rejected(self, tmp_path):
        body = GOOD + "\n[thresholds2]\nx = 1\n"
        with pytest.raises(InputFormatError):
            load_config(write_config(tmp_path, body))

    def test_unknown_threshold_rejected(self, tmp_path):
        body = GOOD.replace("min_words = 150", "minwords = 150")
        with pytest.raises(InputFormatError):
            load_config(write_config(tmp_path, body))

    def test_overrides_win(self, tmp_path):
        config = load_config(
            write_config(tmp_path, GOOD), {"seed": 99, "min_words": 80, "alpha": None}
        )
        assert config.seed == 99
        assert config.min_words == 80
        assert config.alpha == 0.05

    def test_unknown_override_rejected(self, tmp_path):
        config = load_config(write_config(tmp_path, GOOD))
        with pytest.raises(ValidationError):
            apply_overrides(config, {"minwords": 3})


class TestDigest:
    def test_stable_and_sensitive(self, tmp_path):
        a = load_config(write_config(tmp_path, GOOD))
        b = load_config(write_config(tmp_path, GOOD))
        assert config_digest(a) == config_digest(b)
        c = apply_overrides(a, {"seed": 8})
        assert config_digest(a) != config_digest(c)

    def test_dict_is_json_safe(self):
        config = PipelineConfig(**PATHS)
        json.dumps(config_to_dict(config))
