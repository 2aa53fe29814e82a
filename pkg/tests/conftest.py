from fractions import Fraction

import pytest

from twzhu.instances import build_heisenberg, build_stable_untwisted_module, build_twisted_fock


@pytest.fixture(scope="session")
def V6():
    return build_heisenberg(6)


@pytest.fixture(scope="session")
def V4():
    return build_heisenberg(4)


@pytest.fixture(scope="session")
def twisted4(V6):
    return build_twisted_fock(V6, cutoff=4)


@pytest.fixture(scope="session")
def stable4(V6):
    return build_stable_untwisted_module(V6, Fraction(1, 3), 4)
