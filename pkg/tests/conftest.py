import pytest

from acmass import DomainSpec, build_domain, make_quartic


@pytest.fixture(scope="session")
def pot():
    return make_quartic()


@pytest.fixture(scope="session")
def disk():
    return build_domain(DomainSpec("unit_disk", h=0.05))


@pytest.fixture(scope="session")
def disk_fine():
    return build_domain(DomainSpec("unit_disk", h=0.03))


@pytest.fixture(scope="session")
def disk02():
    return build_domain(DomainSpec("unit_disk", h=0.02))


@pytest.fixture(scope="session")
def annulus():
    return build_domain(DomainSpec("annulus", r_in=0.5, r_out=1.0, h=0.03))


@pytest.fixture(scope="session")
def eccentric():
    return build_domain(DomainSpec("eccentric_annulus", r_in=0.4, offset=0.25, h=0.03))


@pytest.fixture(scope="session")
def rect():
    # 2 x 1 rectangle centered at the origin; the bottom edge is y = -0.5
    return build_domain(DomainSpec("rectangle", width=2.0, height=1.0, h=0.025))
