import numpy as np
import pytest


def random_spd(rng, n, cond=10.0):
    Q, _ = np.linalg.qr(rng.standard_normal((n, n)))
    w = np.exp(rng.uniform(0, np.log(cond), n))
    S = (Q * w) @ Q.T
    return 0.5 * (S + S.T)


def random_sym(rng, n):
    A = rng.standard_normal((n, n))
    return 0.5 * (A + A.T)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture
def toy2():
    return np.array([[1.0, 0.5], [0.5, 1.0]])


def pytest_terminal_summary(terminalreporter):
    import sys
    results = {}
    for name, mod in list(sys.modules.items()):
        if name.split(".")[-1] == "test_acceptance":
            results.update(getattr(mod, "RESULTS", {}))
    if results:
        terminalreporter.section("acceptance criteria")
        for k in sorted(results):
            terminalreporter.write_line(results[k])
