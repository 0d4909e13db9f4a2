import numpy as np
import pytest

from pmclab.core import DesignData, ModelPrior, SlabSpec
from pmclab.simlab.data import TruthSpec, gen_dataset, gen_orthonormal_design


def random_instance(seed: int, n: int = 30, p: int = 5, signal=(1.5, -1.0), phi: float = 10.0):
    rng = np.random.default_rng(seed)
    X = rng.standard_normal((n, p))
    beta = np.zeros(p)
    beta[: len(signal)] = signal
    y = X @ beta + rng.standard_normal(n)
    return DesignData(y, X), SlabSpec(rng.uniform(0.5, 2.0, p) * phi), ModelPrior.bernoulli(rng.uniform(0.2, 0.8, p))


def orthonormal_instance(seed: int, n: int = 60, p: int = 6, values=(2.0, 2.0), sigma0: float = 1.0):
    truth = TruthSpec.leading(p, values, sigma0)
    X = gen_orthonormal_design(n, p, np.random.default_rng(seed))
    return gen_dataset(X, truth, np.random.default_rng(seed + 1)), truth


@pytest.fixture
def small_data():
    return random_instance(0)


# acceptance lines are collected here and echoed in the terminal summary
ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
