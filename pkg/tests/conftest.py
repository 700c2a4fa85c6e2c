import numpy as np
import pytest
from dotenv import load_dotenv

from bnpl.models import PartialRanking

# Load environment variables from .env file for testing
load_dotenv()


@pytest.fixture
def rng() -> np.random.Generator:
    """Fixed-seed generator; every stochastic test starts from the same stream."""
    return np.random.default_rng(20240117)


@pytest.fixture
def three_lists() -> list[PartialRanking]:
    """Three top-2 lists over items a, b, c."""
    return [
        PartialRanking(("a", "b")),
        PartialRanking(("b", "c")),
        PartialRanking(("a", "c")),
    ]


@pytest.fixture
def write_csv(tmp_path):
    """Write CSV text to a temporary file and return its path."""

    def _write(text: str, name: str = "rankings.csv"):
        path = tmp_path / name
        path.write_text(text, encoding="utf-8")
        return path

    return _write
