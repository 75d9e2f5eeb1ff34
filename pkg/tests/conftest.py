import math

import pytest

from exterior_decay import maps
from exterior_decay.problem_model import GammaSpec, ProblemSpec
from exterior_decay.quadrature import build_grid

KAPPA_1 = (2 - math.sqrt(2)) / 4
KAPPA_2 = (1 - math.sqrt(5 / 8)) / 2


def canonical(c=0.125, g=None, n=3, q_plus=0.5, gamma=None, **kw):
    """n=3, R=1, u0=varsigma=p=1, m = c r^-2 U, q_+ constant."""
    extra = {} if gamma is None else {"gamma": gamma}
    return ProblemSpec(
        n,
        1.0,
        kw.pop("u0", 1.0),
        kw.pop("varsigma", 1.0),
        1.0,
        maps.RadialUMap([(maps.power(c, -2.0), 1.0)]),
        g=maps.ZERO if g is None else maps.power(g, -2.0),
        q_plus=maps.constant(q_plus),
        **extra,
        **kw,
    )


def trivial(n=3):
    return ProblemSpec(n, 1.0, 1.0, 1.0, 1.0, maps.RadialUMap([]), gamma=GammaSpec("zero"))


@pytest.fixture
def canon1():
    return canonical()


@pytest.fixture
def canon2():
    return canonical(g=1 / 16)


@pytest.fixture
def grid1k():
    return build_grid(1.0, 1e6, 1024)


def pytest_terminal_summary(terminalreporter):
    mod = __import__("sys").modules.get("test_acceptance")
    lines = getattr(mod, "RESULTS", None)
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in sorted(lines):
            terminalreporter.write_line(line)
