"""Shared fixtures and helpers for a test environment."""

import os
import random
from pathlib import Path

import pytest

import kacbench.config as config
import kacbench.log
from kacbench.config import LogLevel, conf
from kacbench.system import FiniteSystem, SampledSystem

N_RANDOM = 100
"""Number of randomized instances of the property checks."""


class UtilFuncs:
    """Helpers used in tests."""

    @staticmethod
    def reset_conf() -> None:
        """Unload config (useful for testing)."""
        if config.CONFFILE_ENVVAR in os.environ:
            del os.environ[config.CONFFILE_ENVVAR]

        try:
            del config._conf
        except AttributeError:
            pass

    @staticmethod
    def rng(seed: int) -> random.Random:
        """Random source of one randomized instance."""
        return random.Random(seed)


@pytest.fixture(scope="session")
def testutils():
    """Fixture giving access to helper functions anywhere in test suite."""
    return UtilFuncs


@pytest.fixture(scope="session")
def test_config(testutils, tmp_path_factory):
    """Initialize settings for the test environment."""
    config.init_conf()

    conf().kacbench.log.level = LogLevel.DEBUG
    conf().kacbench.log.file = Path("test_kacbench.log")
    kacbench.log.init_logger(conf().kacbench.log.level.value, conf().kacbench.log.file)

    # small chunks, so that the chunked summation is exercised
    conf().kacbench.chunk_size = 4096

    yield conf()

    testutils.reset_conf()


@pytest.fixture
def cyclic5():
    """The 5-cycle with uniform masses."""
    return FiniteSystem.cyclic(5)


@pytest.fixture
def rotation():
    """The golden mean rotation."""
    return SampledSystem.rotation(seed=0)
