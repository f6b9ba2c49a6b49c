import numpy as np
import pytest

from src.models.lattice import SiteSet, build_domain, unit_ball_volume
from src.utils.exceptions import ConfigError, DomainError, EmptyWindowError, ValidationError


def test_domain_geometry(domain2):
    assert domain2.h == pytest.approx(1 / 16)
    assert domain2.R_M == pytest.approx(0.25)
    assert domain2.site_count == 256
    assert domain2.coordinates.shape == (256, 2)


@pytest.mark.parametrize("m, n, period, key", [
    (1, 16, 1.0, "domain.m"),
    (2, 3, 1.0, "domain.n_per_axis"),
    (2, 16, 0.0, "domain.period"),
])
def test_build_domain_rejects(m, n, period, key):
    with pytest.raises(ConfigError) as info:
        build_domain(m, n, period)
    assert info.value.config_key == key


def test_periodic_distance_wraps():
    domain = build_domain(2, 8, 1.0)
    last_on_axis = int(np.ravel_multi_index((7, 0), domain.shape))
    assert domain.periodic_distance(0, last_on_axis) == pytest.approx(domain.h)
    assert domain.periodic_distance([0.05, 0.0], [0.95, 0.0]) == pytest.approx(0.1)


def test_unit_ball_volume():
    assert unit_ball_volume(2) == pytest.approx(np.pi)
    assert unit_ball_volume(3) == pytest.approx(4 * np.pi / 3)


def test_ball_quadrature_is_normalized(domain2):
    _, weights = domain2.ball_quadrature(5, 0.2)
    assert weights.sum() == pytest.approx(np.pi * 0.2 ** 2, rel=1e-12)
    assert np.all(weights > 0)


def test_ball_sites_radius_range(domain2):
    assert 0 in domain2.ball_sites(0, domain2.h)
    with pytest.raises(DomainError):
        domain2.ball_sites(0, 0.5)
    with pytest.raises(DomainError):
        domain2.ball_sites(0, 0.0)


def test_unit_shell_holds_face_diagonals(domain2):
    shell = domain2.shell_sites(0, domain2.h)
    # four axis neighbors at h and four diagonal neighbors at sqrt(2) h
    assert len(shell) == 8
    assert 0 not in shell


def test_shell_width_below_h(domain2):
    with pytest.raises(DomainError):
        domain2.shell_sites(0, 3 * domain2.h, width=domain2.h / 2)


def test_cylinder_window(domain2):
    times = [0.0, 0.01, 0.02, 0.03]
    sites, window = domain2.cylinder_window(times, 0, 0.02, 0.1)
    assert window == range(1, 4)
    assert len(sites) > 0
    _, strip = domain2.cylinder_window(times, 0, 0.03, 0.1, strip=True)
    assert strip == range(0, 3)
    with pytest.raises(EmptyWindowError):
        domain2.cylinder_window([0.0, 1.0], 0, 0.5, 0.1)


def test_site_set_validation(domain2):
    with pytest.raises(ValidationError):
        SiteSet([1, 1], domain2)
    with pytest.raises(ValidationError):
        SiteSet([domain2.site_count], domain2)
    assert SiteSet([3, 1], domain2).as_set() == {1, 3}


def test_shell_weight(domain2):
    assert domain2.shell_weight() == pytest.approx(domain2.h)
    assert domain2.shell_weight(2 * domain2.h) == pytest.approx(domain2.h / 2)
