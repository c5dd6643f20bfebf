"""Shared fixtures."""

from pathlib import Path

import numpy as np
import pytest

from config import build_config, get_project_root, load_config

DEFAULT_CONF = get_project_root() / "conf" / "default.conf"

# 20 s of traffic instead of 240 s; enough to exercise every event kind
SHORT_RUN = {
    "workload.low_rate": "1",
    "workload.high_rate": "6",
    "workload.warm_s": "5",
    "workload.ramp_s": "5",
    "workload.hold_s": "10",
    "run.drain_s": "10",
}


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture
def default_config():
    return load_config(DEFAULT_CONF)


@pytest.fixture
def short_config():
    return load_config(DEFAULT_CONF, SHORT_RUN)


@pytest.fixture
def short_overrides():
    return dict(SHORT_RUN)


@pytest.fixture
def conf_path() -> Path:
    return DEFAULT_CONF


@pytest.fixture
def bare_config():
    """Model defaults, no files involved."""
    return build_config(SHORT_RUN)


@pytest.fixture
def make_config():
    """Short-run scenario with extra dotted overrides."""
    def _make(overrides=None):
        return load_config(DEFAULT_CONF, {**SHORT_RUN, **(overrides or {})})
    return _make
