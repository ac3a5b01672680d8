import math

import pytest

from singular_biharmonic import (
    find_periodic,
    homoclinic_by_continuation,
    homoclinic_by_tail_shooting,
    make_constants,
    parse_spec,
)

#: closed-form homoclinic of the n=8 critical model is K * sech(t)^2
SECH_AMPLITUDE = math.sqrt(120.0)


@pytest.fixture(scope="session")
def critical():
    spec = parse_spec("critical", 8)
    return make_constants(8, spec), spec


@pytest.fixture(scope="session")
def hardy():
    spec = parse_spec("beta=32;mono=1,3", 8)
    return make_constants(8, spec), spec


@pytest.fixture(scope="session")
def periodic4(critical):
    consts, spec = critical
    return find_periodic(consts, spec, 4.0)


@pytest.fixture(scope="session")
def tail_homoclinic(critical):
    consts, spec = critical
    return homoclinic_by_tail_shooting(consts, spec)


@pytest.fixture(scope="session")
def continuation_homoclinic(critical):
    consts, spec = critical
    return homoclinic_by_continuation(consts, spec)


@pytest.fixture(scope="session")
def hardy_homoclinic(hardy):
    consts, spec = hardy
    return homoclinic_by_tail_shooting(consts, spec)
