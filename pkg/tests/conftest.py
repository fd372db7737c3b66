import random
from pathlib import Path

import pytest

from poarewrite.surface import load_bundled

DATA = Path(__file__).parent / "data"


def pytest_addoption(parser):
    parser.addoption("--seed", type=int, default=20240607, help="seed for the randomized suites")


@pytest.fixture(scope="session")
def seed(request):
    return request.config.getoption("--seed")


@pytest.fixture
def rng(seed):
    return random.Random(seed)


@pytest.fixture(scope="session")
def bubble():
    return load_bundled("bubble.mod").module("BUBBLE-SORT")


@pytest.fixture(scope="session")
def bubble_plus():
    return load_bundled("bubble-plus.mod").module("BUBBLE-SORT")


@pytest.fixture(scope="session")
def nat():
    return load_bundled("nat.mod").module("NAT")


@pytest.fixture(scope="session")
def beta_fail():
    return load_bundled("beta-fail.mod").module("BETA-FAIL")


@pytest.fixture(scope="session")
def solutions():
    return load_bundled("solutions.mod").module("SOLUTIONS")


@pytest.fixture
def data_dir():
    return DATA
