import sys
from pathlib import Path

import numpy as np
import pytest

# flat-module layout: make the project root importable from tests/
sys.path.insert(0, str(Path(__file__).resolve().parent))


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture
def write_matrix(tmp_path):
    """Write a pixel matrix as whitespace-separated text and return its path."""

    def _write(name, pixels):
        path = tmp_path / name
        path.write_text('\n'.join(' '.join(str(v) for v in row) for row in pixels) + '\n')
        return path

    return _write
