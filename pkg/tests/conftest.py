import sys
from pathlib import Path

import pytest

from abrbench.link import load_trajectory

REPO_ROOT = Path(__file__).resolve().parents[1]
PAPER_TRAJECTORY = REPO_ROOT / "trajectories" / "paper_fig4.json"

sys.path.insert(0, str(Path(__file__).parent))


@pytest.fixture(scope="session")
def paper_trajectory():
    return load_trajectory(PAPER_TRAJECTORY)
