import numpy as np
import pytest

from neuracoustic.periphery import PeripheryConfig
from neuracoustic.stimulus import load_manifest
from neuracoustic.synth import write_desk_corpus

# Coarse grid for unit tests: same model, fewer channels and repetitions.
SMALL = PeripheryConfig(n_cf=8, n_reps=10, internal_rate_hz=40_000.0, cf_max_hz=6000.0)


@pytest.fixture(scope="session")
def small_config():
    return SMALL


@pytest.fixture(scope="session")
def desk_corpus_path(tmp_path_factory):
    return write_desk_corpus(tmp_path_factory.mktemp("desk"), n_words=10)


@pytest.fixture(scope="session")
def desk_corpus(desk_corpus_path):
    return load_manifest(desk_corpus_path)


@pytest.fixture(scope="session")
def tiny_corpus_path(tmp_path_factory):
    return write_desk_corpus(tmp_path_factory.mktemp("tiny"), n_words=2)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


def pytest_terminal_summary(terminalreporter):
    try:
        from test_acceptance import RESULTS
    except ImportError:
        return
    if RESULTS:
        terminalreporter.section("acceptance criteria")
        for n in sorted(RESULTS):
            terminalreporter.write_line(RESULTS[n])
