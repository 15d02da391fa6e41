"""Shared corpora and the acceptance summary printed at the end of a run."""

from __future__ import annotations

import numpy as np
import pytest

from fundusgate.features import extract_features
from fundusgate.prefilter import AnatomyMasks, prefilter_image
from fundusgate.preprocess import prescreen_preprocess
from fundusgate.synth import Severity, corpus_specs, generate

SCREEN_SEED = 42
FILTER_SEED = 43

_results: dict[int, tuple[str, str, str]] = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(number, title): acceptance criterion carried by the test")


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    marker = item.get_closest_marker("criterion")
    if marker is None or rep.when != "call" and not (rep.when == "setup" and not rep.passed):
        return
    number, title = marker.args
    detail = "; ".join(str(v) for k, v in item.user_properties if k == "detail")
    _results[number] = ("PASS" if rep.passed else "FAIL", title, detail)


def pytest_terminal_summary(terminalreporter):
    if not _results:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(_results):
        status, title, detail = _results[number]
        line = f"{status} criterion {number:2d}: {title}"
        terminalreporter.write_line(line + (f" ({detail})" if detail else ""))


@pytest.fixture(scope="session")
def screening_corpus():
    """Combined features and labels for 100 normal + 100 severely abnormal images."""
    X, y = [], []
    for spec in corpus_specs(SCREEN_SEED, normal=100, abnormal=100):
        rgb, truth = generate(spec)
        X.append(extract_features(prescreen_preprocess(rgb)))
        y.append(truth.class_label)
    return np.vstack(X), y


@pytest.fixture(scope="session")
def filtering_corpus():
    """Per-image (severity, candidates, lesion union, retained fraction) for 50 lesioned + 50 clean."""
    out = []
    for spec in corpus_specs(FILTER_SEED, normal=50, lesioned=50):
        rgb, truth = generate(spec)
        res = prefilter_image(rgb, AnatomyMasks(vessels=truth.vessels))
        lesions = np.zeros(truth.fov.shape, dtype=bool)
        for m in truth.lesion_masks:
            lesions |= m
        out.append((spec.severity, res.candidates, lesions, res.retained_fraction))
    assert sum(s is Severity.LESIONED for s, *_ in out) == 50
    return out
