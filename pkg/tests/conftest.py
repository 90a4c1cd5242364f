import numpy as np
import pytest

from adtalk import _kernels

BACKENDS = ["numpy"] + (["numba"] if _kernels.HAVE_NUMBA else [])

_ACCEPTANCE = []


@pytest.fixture(params=BACKENDS)
def backend(request, monkeypatch):
    """Run a test once per kernel implementation."""
    kernels = _kernels.NUMPY_KERNELS if request.param == "numpy" else _kernels.NUMBA_KERNELS
    for name, fn in kernels.items():
        monkeypatch.setattr(_kernels, name, fn)
    return request.param


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def pytest_configure(config):
    config.addinivalue_line("markers", "acceptance(number, title): exit criterion of the build")


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    mark = item.get_closest_marker("acceptance")
    if mark is not None and rep.when == "call":
        _ACCEPTANCE.append((mark.args[0], mark.args[1], item.name, rep.outcome))
    elif mark is not None and rep.when == "setup" and rep.outcome != "passed":
        _ACCEPTANCE.append((mark.args[0], mark.args[1], item.name, rep.outcome))


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    by_num = {}
    for num, title, name, outcome in _ACCEPTANCE:
        by_num.setdefault((num, title), []).append(outcome)
    for (num, title), outcomes in sorted(by_num.items()):
        verdict = "PASS" if all(o == "passed" for o in outcomes) else "FAIL"
        terminalreporter.write_line(f"[{verdict}] criterion {num}: {title} ({len(outcomes)} checks)")
