"""Shared scenario builders for the test suite."""

import numpy as np
import pytest

from mc2g.harness import config_from_dict

# Reference five-symbol scenario: 3 user clusters, 4 item clusters,
# ratings in {1..5}, correct-rating probability 0.6 (0.1 on each other symbol).
FIVE_SYMBOL_DOC = {
    "n": 2000,
    "m": 1000,
    "k1": 3,
    "k2": 4,
    "alphabet": [1, 2, 3, 4, 5],
    "z_table": [[5, 1, 4, 2], [2, 4, 5, 1], [3, 2, 5, 5]],
    "personalization": {"correct_prob": 0.6},
    "i1": 2.0,
    "i2": 2.0,
    "ratios": [1.0],
    "trials": 1,
    "base_seed": 0,
}

# Binary scenario: 2 user clusters, 3 item clusters, additive Bern(0.25) noise.
BINARY_DOC = {
    "n": 3000,
    "m": 3000,
    "k1": 2,
    "k2": 3,
    "alphabet": [0, 1],
    "z_table": [[0, 1, 0], [0, 0, 1]],
    "personalization": {"table": [[0.75, 0.25], [0.25, 0.75]]},
    "i1": 1.5,
    "i2": 2.0,
    "p_values": [0.004],
    "trials": 1,
    "base_seed": 0,
}


def make_config(base_doc, **overrides):
    doc = dict(base_doc)
    doc.update(overrides)
    return config_from_dict(doc)


@pytest.fixture
def five_symbol_config():
    return make_config(FIVE_SYMBOL_DOC)


@pytest.fixture
def binary_config():
    return make_config(BINARY_DOC)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    import sys
    module = sys.modules.get("test_acceptance") \
        or sys.modules.get("tests.test_acceptance")
    if module is not None and module.REPORT:
        terminalreporter.section("acceptance criteria")
        for line in module.REPORT:
            terminalreporter.write_line(line)
