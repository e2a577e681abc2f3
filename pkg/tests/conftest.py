from importlib.resources import files

import numpy as np
import pytest

from csicalc.ldag import parse_ldag

FIXTURES = ("fig1d", "fig6a", "fig6b", "fig6c", "fig6d", "fig6e", "backdoor", "frontdoor", "bow")


def load(name):
    return parse_ldag(files("csicalc.graphs").joinpath(name + ".ldag").read_text())


@pytest.fixture
def fig1d():
    return load("fig1d")


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


_RESULTS = {}


def solved(name, query="P(Y | do(X))", **kw):
    """identify() on a bundled fixture, cached for the whole session."""
    from csicalc.search import identify

    key = (name, query, tuple(sorted(kw.items())))
    if key not in _RESULTS:
        _RESULTS[key] = identify(load(name), query, **kw)
    return _RESULTS[key]
