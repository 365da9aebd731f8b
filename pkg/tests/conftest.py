import os
import sys

import pytest

MODELS_DIR = os.path.join(os.path.dirname(__file__), os.pardir, "models")

sys.path.insert(0, os.path.dirname(__file__))


@pytest.fixture
def models_dir():
    return os.path.abspath(MODELS_DIR)
