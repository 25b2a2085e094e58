"""
Shared fixtures for the fp-reach test suite
"""

import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent.parent / "src"))

from fp_reach.dynamics import SystemParams
from fp_reach.periodic import REFERENCE_PERIOD, REFERENCE_STATE, differential_correct


@pytest.fixture(scope="session")
def params():
    """Earth-Moon constants with the 50 mN / 1000 kg acceleration bound"""
    return SystemParams()


@pytest.fixture(scope="session")
def reference_orbit(params):
    """The corrected reference orbit, shared by every module that needs one"""
    return differential_correct(REFERENCE_STATE, REFERENCE_PERIOD, params)
