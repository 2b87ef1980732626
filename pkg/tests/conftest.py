import random

import pytest

from mibe.backend import Mirrored, production, toy
from mibe.ceremony import PkgSecret, PkpoSecret, SystemParams, keypair_from_scalar, setup


def toy_params(pkg_pr: int, pkpo_pr: int, q: int = 101):
    """Toy deployment with pinned authority secrets."""
    b = toy(q)
    gen = Mirrored(b.generator("g1"), b.generator("g2"))
    pkg_pub = Mirrored.from_scalar(b, pkg_pr, gen)
    pkpo_pub = Mirrored.from_scalar(b, pkpo_pr, pkg_pub)
    return SystemParams(b, gen, pkg_pub, pkpo_pub), PkgSecret(pkg_pr), PkpoSecret(pkpo_pr)


@pytest.fixture
def rng():
    return random.Random(20261016)


@pytest.fixture(scope="session")
def prod():
    return production()


@pytest.fixture(params=["toy", "production"])
def backend(request):
    return toy() if request.param == "toy" else production()


@pytest.fixture
def fixture_7_11():
    """q=101, pkg_pr=7, pkpo_pr=11, usk_pr=13 and an identity whose toy Q_ID is 29."""
    params, pkg, pkpo = toy_params(7, 11)
    user = keypair_from_scalar(params, "user-33", 13)
    return params, pkg, pkpo, user


@pytest.fixture(scope="session")
def prod_deployment():
    return setup(random.Random(7401), production())


def pytest_terminal_summary(terminalreporter):
    import sys

    mod = sys.modules.get("test_acceptance")
    if mod is None or not mod.RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for line in mod.report_lines():
        terminalreporter.write_line(line)
