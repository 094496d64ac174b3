import sys
from pathlib import Path

import pytest

sys.path.append(str(Path(__file__).resolve().parents[1]))

from utils.spectral_metric import TruncationPolicy  # noqa: E402


def pytest_configure(config):
	config.addinivalue_line("markers", "slow: full acceptance grids (deselect with -m 'not slow')")


@pytest.fixture
def trunc():
	return TruncationPolicy()
