import time
from types import SimpleNamespace

import numpy as np
import pytest

from gmvae import data_io, kernels
from gmvae.config import load_config
from gmvae.training import train

ACCEPTANCE_LINES = []


def record(criterion, passed, detail):
    line = f"[{'PASS' if passed else 'FAIL'}] criterion {criterion}: {detail}"
    ACCEPTANCE_LINES.append(line)
    print(line)
    return passed


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture(scope="session", autouse=True)
def warm_kernels():
    # compile the numba kernels once, outside any timed section
    kernels.lgamma(np.array([1.5]))
    kernels.digamma(np.array([1.5]))
    kernels.trigamma(np.array([1.5]))
    kernels.gammainc_lower(np.array([1.5]), np.array([0.5]))
    kernels.gamma_shape_grad(np.array([1.5]), np.array([0.5]))
    kernels.standard_gamma(np.array([1.5, 0.5]), np.random.default_rng(0))


@pytest.fixture(scope="session")
def desk_run(tmp_path_factory):
    """The packaged desk configuration trained once for the whole session."""
    config = load_config(None, env={})
    out_dir = tmp_path_factory.mktemp("desk")
    train_bits = data_io.load_dataset(None, "train", config.threshold, config.n_train, config.seed).bits
    test_bits = data_io.load_dataset(None, "test", config.threshold, config.n_test, config.seed).bits
    start = time.perf_counter()
    state = train(config, train_bits, test_bits=None, out_dir=str(out_dir))
    return SimpleNamespace(
        config=config, state=state, model=state.model, train_bits=train_bits, test_bits=test_bits,
        out_dir=out_dir, seconds=time.perf_counter() - start,
    )
