import numpy as np
import pytest

from syncbandit import PoissonIndicatorProcess, PolynomialProcess, ProblemInstance

# lines reported by the acceptance module, echoed in the terminal summary
ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


def linear_instance(K=1, slope=1.0, r_min=0.1, r_max=10.0, B=None, noise=0.0):
    """Arms with mean cost ``slope * tau`` (Cbar = slope * tau**2 / 2)."""
    slopes = np.broadcast_to(np.asarray(slope, dtype=float), (K,))
    procs = [PolynomialProcess(a, 1.0, noise=noise) for a in slopes]
    B = K * 0.5 * (r_min + r_max) if B is None else B
    return ProblemInstance(procs, r_min, r_max, B, U=40.0, name="linear")


def random_instance(rng, K=10, family="polynomial", r_min=0.025, r_max=3.0, B=None):
    if family == "polynomial":
        procs = [PolynomialProcess(a, p) for a, p in
                 zip(rng.uniform(0.05, 1.0, K), rng.uniform(0.5, 1.0, K))]
        U = 40.0
    else:
        procs = [PoissonIndicatorProcess(lam) for lam in rng.uniform(0.005, 5.0, K)]
        U = 1.0
    B = 0.4 * K if B is None else B
    return ProblemInstance(procs, r_min, r_max, B, U=U, name=f"random-{family}")


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
