"""Shared fixtures: a small synthetic dataset plus acceptance-criterion logging."""

import pytest

from founderlens.config import load_config
from founderlens.pipeline import run_pipeline
from founderlens.simulate import PipelineScenario, generate_synthetic

FAST_CONFIG = """\
seed = 7

[paths]
lexicons = "lexicons"
norms = "norms.csv"
calibration = "calibration.csv"
events = "events.jsonl"
output = "out"

[thresholds]
min_words = 60
bigram_min_users = 12
kfolds = 5

[grids.random_forest]
trees = [30]
max_features = ["third"]

[grids.gradient_boosting]
trees = [60]
depth = [2]
learning_rate = [0.1]

[grids.support_vector]
c = [1.0]
epsilon = [0.1]
"""


@pytest.fixture(scope="session")
def fast_dataset(tmp_path_factory):
    """Small end-to-end dataset (~0.1s to generate) with a matching config."""
    root = tmp_path_factory.mktemp("fastdata")
    scenario = PipelineScenario(
        n_calibration_users=50, n_communities=200, docs_per_user=1,
        words_per_doc=120, min_founders=2, max_founders=4,
    )
    dataset = generate_synthetic(scenario, 7, root)
    config_path = root / "config.toml"
    config_path.write_text(FAST_CONFIG, encoding="utf-8")
    return dataset, config_path


@pytest.fixture(scope="session")
def fast_run(fast_dataset):
    """One completed pipeline run over the fast dataset (shared, treat read-only)."""
    dataset, config_path = fast_dataset
    config = load_config(config_path, {})
    manifest = run_pipeline(config)
    return config, manifest


# ---------------------------------------------------------------------------
# Acceptance criteria reporting: each acceptance test is tagged with
# @pytest.mark.criterion(n, "label") and its outcome is echoed as one
# pass/fail line in the terminal summary.

_CRITERION_RESULTS = {}


def pytest_configure(config):
    config.addinivalue_line(
        "markers", "criterion(number, label): acceptance criterion covered by this test"
    )


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    report = outcome.get_result()
    marker = item.get_closest_marker("criterion")
    if marker is None:
        return
    number = marker.args[0]
    label = marker.args[1] if len(marker.args) > 1 else ""
    if report.when == "call":
        _CRITERION_RESULTS[number] = (report.passed, label)
    elif report.when == "setup" and report.failed:
        _CRITERION_RESULTS[number] = (False, label + " (setup failed)")


def pytest_terminal_summary(terminalreporter):
    if not _CRITERION_RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(_CRITERION_RESULTS):
        passed, label = _CRITERION_RESULTS[number]
        status = "PASS" if passed else "FAIL"
        terminalreporter.write_line(f"criterion {number}: {status} - {label}")
