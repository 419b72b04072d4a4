import os
import sys

import pytest

sys.path.insert(0, os.path.abspath(os.path.join(os.path.dirname(__file__), '..')))

from rankskew.model.dynamics import DT_GBM, GBM, FractionalSteinStein  # noqa: E402
from rankskew.model.dynamics import ModelSpec, SimConfig  # noqa: E402
from rankskew.model.index import IndexSpec, terminal_index  # noqa: E402


@pytest.fixture(autouse=True)
def clear_path_cache():
    terminal_index.cache_clear()
    yield
    terminal_index.cache_clear()


@pytest.fixture
def gbm_model():
    return ModelSpec((GBM(0.2), GBM(0.6)))


@pytest.fixture
def fss_model():
    return ModelSpec((FractionalSteinStein(0.2, 0.6, -0.5), FractionalSteinStein(0.6, 0.7, -0.5)))


@pytest.fixture
def tie_spec():
    return IndexSpec((100., 100.), (1.,))


@pytest.fixture
def distinct_spec():
    return IndexSpec((100., 96.), (1.,))


@pytest.fixture
def short_cfg():
    return SimConfig.for_maturity(0.02, DT_GBM, 4000, 7)
