import warnings

import numpy as np
import pytest

from qpwcheck.encoding import EncodingParams, HashSpec
from qpwcheck.errors import RegimeWarning
from qpwcheck.protocol import ProtocolParams
from qpwcheck.swaptest import RngSeed


def make_params(m=16, n=8, d=3, s=1, *, ideal=False, seed=0, **kw):
    enc = EncodingParams(m, n, d, kw.pop("r_bits", None))
    spec = HashSpec("ideal", n, key=seed) if ideal else None
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RegimeWarning)
        return ProtocolParams(enc, s, seed=RngSeed(seed), hash_spec=spec, **kw)


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


def within_sigma(value, expected, sigma, k=3.0):
    return abs(value - expected) <= k * sigma


# acceptance criteria register one line each; the summary repeats them
ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
