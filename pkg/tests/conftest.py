"""Shared fixtures for the contact-ms test suite."""

import logging

import pytest

from contact_ms.model import Grid1D, GridSpec, ModelParams
from contact_ms.utils import PACKAGE_LOGGER


@pytest.fixture(autouse=True)
def reset_package_logger():
    """Drop handlers installed by setup_logging so streams never outlive a test."""
    yield
    pkg_logger = logging.getLogger(PACKAGE_LOGGER)
    for handler in list(pkg_logger.handlers):
        handler.close()
    pkg_logger.handlers.clear()


@pytest.fixture
def unit_params():
    """Flat interface of unit length with neutral walls."""
    return ModelParams(l=1.0)


@pytest.fixture
def small_spec():
    """A 65-node Chebyshev recipe, enough for the low modes."""
    return GridSpec(n=65)


@pytest.fixture
def unit_grid():
    return Grid1D.chebyshev(1.0, 65)
