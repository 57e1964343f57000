import pytest

from twinlink.harness import light_config
from twinlink.harness.config import SEED_ENV
from twinlink.scene import generate_grid_dataset, generate_vehicular_dataset

_ACCEPTANCE = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(n, title): acceptance criterion number and title")


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    mark = item.get_closest_marker("criterion")
    if mark is None:
        return
    n, title = mark.args
    if rep.when == "call" or (rep.when == "setup" and rep.outcome != "passed"):
        _ACCEPTANCE[n] = (title, "PASS" if rep.passed else "FAIL", rep.duration)


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(_ACCEPTANCE):
        title, verdict, secs = _ACCEPTANCE[n]
        terminalreporter.write_line(f"{verdict} criterion {n:2d}: {title} ({secs:.2f} s)")


@pytest.fixture(scope="session")
def light():
    """Light config plus its grid and vehicular datasets, generated once."""
    mp = pytest.MonkeyPatch()
    mp.delenv(SEED_ENV, raising=False)
    cfg = light_config()
    mp.undo()
    scene = cfg.scene_config()
    return cfg, generate_grid_dataset(scene), generate_vehicular_dataset(scene)
