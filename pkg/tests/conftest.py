import os
from pathlib import Path

import numpy as np
import pytest

from memgan.mnist import TEST_FILES, TRAIN_FILES

ROOT = Path(__file__).resolve().parents[1]


def _data_dir():
    for cand in (os.environ.get("MEMGAN_DATA_DIR"), ROOT / "data" / "mnist"):
        if cand and all((Path(cand) / f).exists() for f in TRAIN_FILES + TEST_FILES):
            return Path(cand)
    return None


DATA_DIR = _data_dir()
needs_mnist = pytest.mark.skipif(DATA_DIR is None, reason="MNIST IDX files not found")


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture(scope="session")
def mnist_dir():
    if DATA_DIR is None:
        pytest.skip("MNIST IDX files not found")
    return DATA_DIR


@pytest.fixture(scope="session")
def mnist_train(mnist_dir):
    from memgan.mnist import load_mnist

    return load_mnist(mnist_dir, "train")


@pytest.fixture(scope="session")
def mnist_test(mnist_dir):
    from memgan.mnist import load_mnist

    return load_mnist(mnist_dir, "test")


def pytest_terminal_summary(terminalreporter):
    import sys

    mod = sys.modules.get("test_acceptance")
    if mod is None or not mod.RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for line in sorted(mod.RESULTS, key=lambda s: int(s.split("]")[1].split(".")[0])):
        terminalreporter.write_line(line)
