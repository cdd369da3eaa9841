from fractions import Fraction

import numpy as np
import pytest

from gibbs_occ.config import get_settings
from gibbs_occ.weights import parse_family

EXACT_FAMILIES = (
    "logseries",
    "negbin:alpha=2",
    "engen:alpha=1/2",
    "cayley",
    "tree:a=2,b=1",
    "newengen:alpha=1/2",
    "linear",
    "bell",
)


@pytest.fixture(autouse=True)
def _fresh_settings(monkeypatch, tmp_path):
    monkeypatch.setenv("GIBBS_OCC_LOG_FILE", str(tmp_path / "logs" / "gibbs_occ.log"))
    get_settings.cache_clear()
    yield
    get_settings.cache_clear()


@pytest.fixture
def logseries():
    return parse_family("logseries")


@pytest.fixture
def cayley():
    return parse_family("cayley")


@pytest.fixture
def linear():
    return parse_family("linear")


@pytest.fixture
def negbin1():
    return parse_family("negbin:alpha=1")


@pytest.fixture(params=EXACT_FAMILIES)
def exact_family(request):
    return parse_family(request.param)


@pytest.fixture(params=[Fraction(1, 2), Fraction(1), Fraction(7, 3)], ids=["1/2", "1", "7/3"])
def exact_theta(request):
    return request.param


@pytest.fixture
def rng():
    return np.random.Generator(np.random.PCG64(12345))
