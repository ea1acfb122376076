import numpy as np
import pytest

from kbilinear import KernelSpec, SamplingConfig, build_kedmd, fit_all, generate, zone_temp_benchmark


@pytest.fixture(scope="session")
def zone():
    return zone_temp_benchmark()


@pytest.fixture(scope="session")
def k1():
    return KernelSpec(n=1, s=1, scale=1.0)


@pytest.fixture(scope="session")
def sampling():
    return SamplingConfig(dt=0.01, substeps=100)


@pytest.fixture(scope="session")
def fitted(zone, k1, sampling):
    """Zone-temperature data and models for d = 5, 9, 17."""
    out = {}
    for d in (5, 9, 17):
        data = generate(zone, sampling, k1, d, d_j=2, seed=0)
        ests = fit_all(data.triplets)
        out[d] = (data, ests, build_kedmd(data.centers, ests, k1))
    return out


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def pytest_terminal_summary(terminalreporter):
    import sys

    mod = sys.modules.get("test_acceptance") or sys.modules.get("tests.test_acceptance")
    if mod is None or not mod.VERDICTS:
        return
    terminalreporter.section("acceptance criteria")
    for line in sorted(mod.VERDICTS, key=lambda l: int(l.split("criterion ")[1].split(":")[0])):
        terminalreporter.write_line(line)
