import numpy as np
import pytest
import yaml

from rydkick.basis import build_basis
from rydkick.radial import solve_basis

# Lines collected by the acceptance module, echoed in the terminal summary.
ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


SMALL_CONFIG = {
    "basis": {"n_min": 20, "n_max": 45, "l_max": 4, "unitarity_tol": 1.0e-2},
    "hcp": {"delay_scan": {"start": 5.0, "end": 6.0, "step": 0.5}},
    "scan": {"tau_start_ps": 12.5, "tau_end_ps": 24.5, "tau_step_ps": 0.375, "shots": 40},
}


@pytest.fixture
def small_config_file(tmp_path):
    path = tmp_path / "small.yaml"
    path.write_text(yaml.safe_dump(SMALL_CONFIG))
    return path


@pytest.fixture(scope="session")
def small_basis():
    return tuple(build_basis(20, 45, 4))


@pytest.fixture(scope="session")
def small_wavefunctions(small_basis):
    return solve_basis(small_basis)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
