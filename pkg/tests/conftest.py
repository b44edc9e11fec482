import pytest

from semiwave.experiments import gaussian_fixture, ode_exact_scenario, run_scenario


@pytest.fixture(scope="session")
def fixture_run():
    """The amplitude-10 Gaussian scenario at h = 1/512, run once per session."""
    return run_scenario(gaussian_fixture())


@pytest.fixture(scope="session")
def ode_exact_run():
    return run_scenario(ode_exact_scenario())
