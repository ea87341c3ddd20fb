import sys

import numpy as np
import pytest

from uavcollect.beamforming import BeamInstance


def random_instance(rng, m, s, noise=1e-13, floors=None):
    """Channels at realistic path-loss scale (-90..-70 dB), powers 10..100 mW."""
    scale = np.sqrt(10 ** rng.uniform(-9, -7, s))
    h = (rng.standard_normal((m, s)) + 1j * rng.standard_normal((m, s))) / np.sqrt(2) * scale
    return BeamInstance(h, rng.uniform(0.01, 0.1, s), noise, floors=floors)


def oracle_instances(n=200, seed=0):
    """Instance family of the oracle-equivalence gate: M in {2,4,8}, 1..3 nodes."""
    rng = np.random.default_rng(seed)
    out = []
    for _ in range(n):
        m = int(rng.choice([2, 4, 8]))
        s = int(rng.choice([1, 2, 3]))
        out.append(random_instance(rng, m, s))
    return out


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


def pytest_terminal_summary(terminalreporter):
    mod = sys.modules.get("test_acceptance")
    if mod is None or not mod.RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(mod.CRITERIA):
        terminalreporter.write_line(mod.format_line(n))
