import pytest

import qtherm as qt


@pytest.fixture(scope="session")
def run():
    """Bundled default operating point."""
    return qt.default_config()


@pytest.fixture(scope="session")
def params(run):
    return run.params


@pytest.fixture(scope="session")
def gp(run):
    return qt.GaussianParams.from_machine(run.params, run.g_fit_ratio)
