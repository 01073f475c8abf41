from pathlib import Path

import pytest

DATA_DIR = Path(__file__).parent / "data"


@pytest.fixture
def clean_dir(tmp_path) -> Path:
    """Create a clean directory for testing."""
    dirpath = tmp_path / "clean_dir"
    dirpath.mkdir()
    return dirpath


@pytest.fixture
def data_dir() -> Path:
    """Directory of the small input files used by the tests."""
    return DATA_DIR
